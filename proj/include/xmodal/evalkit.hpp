#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/dataset.hpp"
#include "xmodal/tinylm.hpp"

namespace xmodal {

// Measurement protocol: T1 = teacher on text, T2 = student on text,
// T3 = student on speech. forgetting_gap = T1 - T2 quantifies catastrophic
// forgetting, modality_gap = T2 - T3 quantifies modality inequivalence.
// Gaps are signed; a negative forgetting gap means the student beat the
// teacher.

enum class EvalModality { text, speech };

struct SampleVerdict {
  int64_t id = 0;
  bool teacher_text = false;
  bool student_text = false;
  bool student_speech = false;
};

struct EvalReport {
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double forgetting_gap = 0.0;
  double modality_gap = 0.0;
  int n_samples = 0;
  std::vector<SampleVerdict> verdicts;

  static EvalReport from_scores(double t1, double t2, double t3);
};

// Exact-match accuracy in percent: greedy-decode each query on the requested
// path and compare with the gold answer, EOS stripped on both sides.
double score(const ModelParams& params, const std::vector<Sample>& data, EvalModality modality, int max_len = 16);

// Runs all three scores over paired datasets (same ids, same order; the text
// and speech data may be the same vector when it carries frames).
EvalReport evaluate_triple(const ModelParams& teacher, const ModelParams& student,
                           const std::vector<Sample>& text_data, const std::vector<Sample>& speech_data,
                           int max_len = 16);

// Plain-text table, scores rounded to 2 decimals.
std::string render_report(const EvalReport& report);

// Full-precision JSON document.
nlohmann::json report_json(const EvalReport& report);

}  // namespace xmodal
