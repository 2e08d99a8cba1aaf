// Command-line pipeline driver: corpus generation, speech synthesis, teacher
// pretraining, label caching, dual-channel distillation, evaluation and
// gradient checking. Batch-only; every command takes an explicit --seed and
// produces byte-identical outputs for identical inputs and flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmodal/distill.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/evalkit.hpp"
#include "xmodal/modality.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/taskgen.hpp"
#include "xmodal/tinylm.hpp"
#include "xmodal/trainer.hpp"

namespace fs = std::filesystem;
using namespace xmodal;

namespace {

// Compute is single-threaded; the env var caps the worker pool, so any valid
// value is honored trivially. Invalid values are still a hard error.
void check_thread_env() {
  const char* v = std::getenv("XMD_THREADS");
  if (v == nullptr) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) {
    throw std::invalid_argument("XMD_THREADS must be a positive integer, got '" + std::string(v) + "'");
  }
}

ModelParams load_role_checkpoint(const std::string& path, Role role, const char* what) {
  ModelParams m = load_checkpoint(path);
  if (m.role != role) {
    throw std::invalid_argument(std::string(what) + " checkpoint '" + path + "' has role " + role_name(m.role) +
                                ", expected " + role_name(role));
  }
  return m;
}

struct GenArgs {
  uint64_t seed = 7;
  std::string out_dir;
};

void run_gen(const GenArgs& a) {
  const Corpus corpus = generate_corpus(a.seed);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);

  save_vocab(corpus.vocab, (dir / "vocab.json").string());
  save_jsonl(corpus.pretrain, (dir / "pretrain.jsonl").string());
  auto [t2t, s2t] = build_distill_corpus(corpus.distill, 1, 2);
  save_jsonl(t2t, (dir / "distill_t2t.jsonl").string());
  save_jsonl(s2t, (dir / "distill_s2t.jsonl").string());
  save_jsonl(corpus.naive, (dir / "naive.jsonl").string());
  save_jsonl(corpus.eval, (dir / "eval.jsonl").string());

  std::cout << "wrote " << corpus.pretrain.size() << " pretrain, " << t2t.size() << " t2t, " << s2t.size()
            << " s2t, " << corpus.naive.size() << " naive, " << corpus.eval.size() << " eval samples to "
            << a.out_dir << "\n";
}

struct SynthArgs {
  std::string data;
  uint64_t seed = 7;
  double sigma = kDefaultJitterSigma;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  std::vector<Sample> samples = load_jsonl(a.data);
  const AcousticCodebook cb = AcousticCodebook::generate(64);
  synthesize_dataset(cb, samples, a.seed, a.sigma);
  save_jsonl(samples, a.out);
  std::cout << "synthesized frames for " << samples.size() << " samples -> " << a.out << "\n";
}

struct PretrainArgs {
  std::string data;
  std::string vocab;
  std::string out_ckpt;
  std::string preset = "desk-scale";
  uint64_t seed = 7;
};

void run_pretrain(const PretrainArgs& a) {
  const std::vector<Sample> samples = load_jsonl(a.data);
  const Vocab vocab = load_vocab(a.vocab);
  ModelDims dims;
  dims.vocab = vocab.size();

  TrainConfig cfg = pretrain_preset_config(a.preset);
  cfg.seed = a.seed;
  DistillConfig loss = variant_config("ce", Channel::t2t);
  cfg.mix = {MixEntry{loss, &samples, 1.0}};

  ModelParams model = init_model(dims, vocab, Role::teacher, a.seed);
  const TrainLog log = train(model, nullptr, cfg);
  save_checkpoint(model, a.out_ckpt);
  std::cout << "pretrained teacher for " << cfg.epochs << " epochs (" << log.steps.size() << " steps), final ce "
            << (log.steps.empty() ? 0.0 : log.steps.back().ce) << " -> " << a.out_ckpt << "\n";
}

struct InitStudentArgs {
  std::string teacher;
  uint64_t seed = 7;
  std::string out_ckpt;
};

void run_init_student(const InitStudentArgs& a) {
  const ModelParams teacher = load_role_checkpoint(a.teacher, Role::teacher, "teacher");
  const ModelParams student = init_student_from_teacher(teacher, a.seed);
  save_checkpoint(student, a.out_ckpt);
  std::cout << "initialized student from " << a.teacher << " (adapter seed " << a.seed << ") -> " << a.out_ckpt
            << "\n";
}

struct LabelArgs {
  std::string ckpt;
  std::string data;
  std::string out;
};

void run_labels(const LabelArgs& a) {
  const ModelParams teacher = load_role_checkpoint(a.ckpt, Role::teacher, "teacher");
  std::vector<Sample> samples = load_jsonl(a.data);
  samples = generate_teacher_targets(teacher, std::move(samples));
  save_jsonl(samples, a.out);
  std::cout << "cached teacher labels for " << samples.size() << " samples -> " << a.out << "\n";
}

struct DistillArgs {
  std::string teacher;
  std::string student_init;
  std::string variant = "teacher_ce_kl";
  std::string channels = "s2t";
  double lambda = 0.5;
  double tau = 2.0;
  std::string preset = "desk-scale";
  uint64_t seed = 7;
  std::string t2t_data;
  std::string s2t_data;
  std::string out_ckpt;
  std::string log;
};

void run_distill(const DistillArgs& a) {
  if (a.channels != "s2t" && a.channels != "s2t+t2t") {
    throw std::invalid_argument("--channels must be s2t or s2t+t2t, got '" + a.channels + "'");
  }
  const ModelParams teacher = load_role_checkpoint(a.teacher, Role::teacher, "teacher");
  ModelParams student = load_role_checkpoint(a.student_init, Role::student, "student");

  TrainConfig cfg = preset_config(a.preset);
  cfg.seed = a.seed;

  std::vector<Sample> t2t_samples, s2t_samples;
  if (a.s2t_data.empty()) throw std::invalid_argument("--s2t-data is required");
  s2t_samples = load_jsonl(a.s2t_data);
  if (a.channels == "s2t+t2t") {
    if (a.t2t_data.empty()) throw std::invalid_argument("--t2t-data is required for channels s2t+t2t");
    t2t_samples = load_jsonl(a.t2t_data);
    // published channel ratio is 1:2 (T2T : S2T)
    cfg.mix.push_back(MixEntry{variant_config(a.variant, Channel::t2t, a.lambda, a.tau), &t2t_samples, 1.0});
    cfg.mix.push_back(MixEntry{variant_config(a.variant, Channel::s2t, a.lambda, a.tau), &s2t_samples, 2.0});
  } else {
    cfg.mix.push_back(MixEntry{variant_config(a.variant, Channel::s2t, a.lambda, a.tau), &s2t_samples, 1.0});
  }

  const TrainLog log = train(student, &teacher, cfg);
  save_checkpoint(student, a.out_ckpt);
  if (!a.log.empty()) save_train_log(log, a.log);
  std::cout << "distilled (" << a.variant << ", " << a.channels << ") for " << cfg.epochs << " epochs ("
            << log.steps.size() << " steps) -> " << a.out_ckpt << "\n";
}

struct EvalArgs {
  std::string teacher;
  std::string student;
  std::string data;
  std::string report;
};

void run_eval(const EvalArgs& a) {
  const ModelParams teacher = load_role_checkpoint(a.teacher, Role::teacher, "teacher");
  const ModelParams student = load_role_checkpoint(a.student, Role::student, "student");
  const std::vector<Sample> data = load_jsonl(a.data);

  const EvalReport report = evaluate_triple(teacher, student, data, data);
  if (!a.report.empty()) {
    std::ofstream f(a.report, std::ios::trunc);
    if (!f) throw std::runtime_error("eval: cannot open '" + a.report + "' for writing");
    f << report_json(report).dump(2) << '\n';
  }
  std::cout << render_report(report);
}

struct GradCheckArgs {
  std::string ckpt;
  int samples = 64;
  double tolerance = 1e-4;
  uint64_t seed = 7;
};

void run_gradcheck(const GradCheckArgs& a) {
  const ModelParams model = load_checkpoint(a.ckpt);

  // Deterministic probe instance over the reserved-free end of the vocab.
  Sample probe;
  probe.id = 0;
  probe.q = {4, 5};
  probe.y = {6, Vocab::kEos};
  probe.split = "distill";
  const AcousticCodebook cb = AcousticCodebook::generate(model.dims.vocab, model.dims.frame_dim);
  probe.frames = synthesize(cb, probe.q, derive_seed(a.seed, 1), kDefaultJitterSigma).frames;

  // A perturbed sibling plays the teacher so the KL term is active.
  ModelParams ref = init_model(model.dims, model.vocab, Role::teacher, derive_seed(a.seed, 2));

  constexpr double eps = 1e-4;
  bool ok = true;
  for (const Channel channel : {Channel::t2t, Channel::s2t}) {
    if (channel == Channel::s2t && model.role != Role::student) continue;
    const DistillConfig cfg = variant_config("ce_kl", channel, 0.5, 2.0);
    auto loss_fn = [&](const std::vector<Var>& leaves) {
      BoundModel bm;
      bm.params = &model;
      bm.leaves = leaves;
      const BoundModel tb = bind_const(ref);
      const LossGraph g = channel == Channel::t2t ? t2t_loss(&tb, bm, probe, cfg) : s2t_loss(&tb, bm, probe, cfg);
      return g.total;
    };
    const GradCheckReport rep =
        grad_check(loss_fn, model.tensors, eps, a.tolerance, a.samples, derive_seed(a.seed, 3));
    std::cout << channel_name(channel) << "_loss grad check: " << rep.summary() << "\n";
    ok = ok && rep.pass();
  }
  if (!ok) throw NumericError("gradient check exceeded tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal knowledge distillation testbed"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "generate vocab, fact corpora and splits");
  cgen->add_option("--seed", gen.seed, "rng seed");
  cgen->add_option("--out-dir", gen.out_dir, "output directory")->required();

  SynthArgs synth;
  auto* csynth = app.add_subcommand("synth", "attach synthesized speech frames to a dataset");
  csynth->add_option("--data", synth.data, "input JSONL")->required();
  csynth->add_option("--seed", synth.seed, "rng seed");
  csynth->add_option("--sigma", synth.sigma, "jitter stddev");
  csynth->add_option("--out", synth.out, "output JSONL")->required();

  PretrainArgs pre;
  auto* cpre = app.add_subcommand("pretrain", "train the teacher on the fact corpus");
  cpre->add_option("--data", pre.data, "pretrain JSONL")->required();
  cpre->add_option("--vocab", pre.vocab, "vocab JSON")->required();
  cpre->add_option("--out-ckpt", pre.out_ckpt, "output checkpoint")->required();
  cpre->add_option("--preset", pre.preset, "paper-default|desk-scale");
  cpre->add_option("--seed", pre.seed, "rng seed");

  InitStudentArgs ini;
  auto* cini = app.add_subcommand("init-student", "student = teacher copy + fresh adapter");
  cini->add_option("--teacher", ini.teacher, "teacher checkpoint")->required();
  cini->add_option("--seed", ini.seed, "adapter init seed");
  cini->add_option("--out-ckpt", ini.out_ckpt, "output checkpoint")->required();

  LabelArgs lab;
  auto* clab = app.add_subcommand("teacher-labels", "cache greedy teacher answers (yhat)");
  clab->add_option("--ckpt", lab.ckpt, "teacher checkpoint")->required();
  clab->add_option("--data", lab.data, "input JSONL")->required();
  clab->add_option("--out", lab.out, "output JSONL")->required();

  DistillArgs dis;
  auto* cdis = app.add_subcommand("distill", "dual-channel knowledge distillation");
  cdis->add_option("--teacher", dis.teacher, "teacher checkpoint")->required();
  cdis->add_option("--student-init", dis.student_init, "student checkpoint to start from")->required();
  cdis->add_option("--variant", dis.variant, "ce|ce_kl|teacher_ce|teacher_ce_kl");
  cdis->add_option("--channels", dis.channels, "s2t|s2t+t2t");
  cdis->add_option("--lambda", dis.lambda, "KL weight");
  cdis->add_option("--tau", dis.tau, "softening temperature");
  cdis->add_option("--preset", dis.preset, "paper-default|desk-scale");
  cdis->add_option("--seed", dis.seed, "rng seed");
  cdis->add_option("--t2t-data", dis.t2t_data, "T2T channel JSONL");
  cdis->add_option("--s2t-data", dis.s2t_data, "S2T channel JSONL");
  cdis->add_option("--out-ckpt", dis.out_ckpt, "output checkpoint")->required();
  cdis->add_option("--log", dis.log, "training log JSONL");

  EvalArgs ev;
  auto* cev = app.add_subcommand("eval", "T1/T2/T3 scores and gap report");
  cev->add_option("--teacher", ev.teacher, "teacher checkpoint")->required();
  cev->add_option("--student", ev.student, "student checkpoint")->required();
  cev->add_option("--data", ev.data, "eval JSONL (text + frames)")->required();
  cev->add_option("--report", ev.report, "report JSON path");

  GradCheckArgs gc;
  auto* cgc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
  cgc->add_option("--ckpt", gc.ckpt, "checkpoint to check")->required();
  cgc->add_option("--samples", gc.samples, "sampled coordinates");
  cgc->add_option("--tolerance", gc.tolerance, "max relative error");
  cgc->add_option("--seed", gc.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    check_thread_env();
    if (cgen->parsed()) run_gen(gen);
    if (csynth->parsed()) run_synth(synth);
    if (cpre->parsed()) run_pretrain(pre);
    if (cini->parsed()) run_init_student(ini);
    if (clab->parsed()) run_labels(lab);
    if (cdis->parsed()) run_distill(dis);
    if (cev->parsed()) run_eval(ev);
    if (cgc->parsed()) run_gradcheck(gc);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
