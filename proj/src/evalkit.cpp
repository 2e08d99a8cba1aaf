#include "xmodal/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace xmodal {

using nlohmann::json;

EvalReport EvalReport::from_scores(double t1, double t2, double t3) {
  for (double s : {t1, t2, t3}) {
    if (!(s >= 0.0 && s <= 100.0)) throw std::invalid_argument("eval: scores must lie in [0, 100]");
  }
  EvalReport r;
  r.t1 = t1;
  r.t2 = t2;
  r.t3 = t3;
  r.forgetting_gap = t1 - t2;
  r.modality_gap = t2 - t3;
  return r;
}

static std::vector<int> strip_eos(const std::vector<int>& tokens) {
  std::vector<int> out = tokens;
  while (!out.empty() && out.back() == Vocab::kEos) out.pop_back();
  return out;
}

static bool sample_correct(const ModelParams& params, const Sample& s, EvalModality modality, int max_len) {
  Tensor prefix;
  if (modality == EvalModality::text) {
    prefix = embed_text_values(params, s.q);
  } else {
    if (!s.frames) {
      throw std::invalid_argument("eval: sample " + std::to_string(s.id) + " has no frames for speech scoring");
    }
    prefix = encode_speech_values(params, *s.frames);
  }
  return strip_eos(greedy_decode(params, prefix, max_len)) == strip_eos(s.y);
}

double score(const ModelParams& params, const std::vector<Sample>& data, EvalModality modality, int max_len) {
  if (modality == EvalModality::speech && params.role != Role::student) {
    throw std::invalid_argument("eval: speech scoring requires student parameters");
  }
  if (data.empty()) throw std::invalid_argument("eval: empty dataset");
  int correct = 0;
  for (const Sample& s : data) correct += sample_correct(params, s, modality, max_len) ? 1 : 0;
  return 100.0 * correct / static_cast<double>(data.size());
}

EvalReport evaluate_triple(const ModelParams& teacher, const ModelParams& student,
                           const std::vector<Sample>& text_data, const std::vector<Sample>& speech_data,
                           int max_len) {
  if (teacher.role != Role::teacher) throw std::invalid_argument("eval: first model must be a teacher");
  if (student.role != Role::student) throw std::invalid_argument("eval: second model must be a student");
  if (text_data.size() != speech_data.size()) {
    throw std::invalid_argument("eval: text and speech datasets differ in size");
  }
  if (text_data.empty()) throw std::invalid_argument("eval: empty dataset");
  for (size_t i = 0; i < text_data.size(); ++i) {
    if (text_data[i].id != speech_data[i].id) {
      throw std::invalid_argument("eval: dataset id mismatch at position " + std::to_string(i) + " (" +
                                  std::to_string(text_data[i].id) + " vs " + std::to_string(speech_data[i].id) + ")");
    }
  }

  EvalReport r;
  r.n_samples = static_cast<int>(text_data.size());
  int c1 = 0, c2 = 0, c3 = 0;
  for (size_t i = 0; i < text_data.size(); ++i) {
    SampleVerdict v;
    v.id = text_data[i].id;
    v.teacher_text = sample_correct(teacher, text_data[i], EvalModality::text, max_len);
    v.student_text = sample_correct(student, text_data[i], EvalModality::text, max_len);
    v.student_speech = sample_correct(student, speech_data[i], EvalModality::speech, max_len);
    c1 += v.teacher_text;
    c2 += v.student_text;
    c3 += v.student_speech;
    r.verdicts.push_back(v);
  }
  const double n = static_cast<double>(r.n_samples);
  r.t1 = 100.0 * c1 / n;
  r.t2 = 100.0 * c2 / n;
  r.t3 = 100.0 * c3 / n;
  r.forgetting_gap = r.t1 - r.t2;
  r.modality_gap = r.t2 - r.t3;
  return r;
}

static std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string render_report(const EvalReport& r) {
  std::ostringstream os;
  auto line = [&os](const std::string& model, const std::string& modality, double v) {
    os << model;
    os << std::string(model.size() < 22 ? 22 - model.size() : 1, ' ');
    os << modality << std::string(modality.size() < 10 ? 10 - modality.size() : 1, ' ');
    const std::string s = fmt2(v);
    os << std::string(s.size() < 8 ? 8 - s.size() : 0, ' ') << s << '\n';
  };
  os << "model                 modality     score\n";
  os << "-----------------------------------------\n";
  line("teacher (T1)", "T->T", r.t1);
  line("student (T2)", "T->T", r.t2);
  line("student (T3)", "S->T", r.t3);
  os << "-----------------------------------------\n";
  line("forgetting gap", "T1-T2", r.forgetting_gap);
  line("modality gap", "T2-T3", r.modality_gap);
  if (r.n_samples > 0) os << "(" << r.n_samples << " samples)\n";
  return os.str();
}

json report_json(const EvalReport& r) {
  json j;
  j["t1"] = r.t1;
  j["t2"] = r.t2;
  j["t3"] = r.t3;
  j["forgetting_gap"] = r.forgetting_gap;
  j["modality_gap"] = r.modality_gap;
  j["n_samples"] = r.n_samples;
  json verdicts = json::array();
  for (const SampleVerdict& v : r.verdicts) {
    verdicts.push_back({{"id", v.id},
                        {"teacher_text", v.teacher_text},
                        {"student_text", v.student_text},
                        {"student_speech", v.student_speech}});
  }
  j["verdicts"] = std::move(verdicts);
  return j;
}

}  // namespace xmodal
