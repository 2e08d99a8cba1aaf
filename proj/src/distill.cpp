#include "xmodal/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace xmodal {

std::string channel_name(Channel c) { return c == Channel::t2t ? "t2t" : "s2t"; }

Channel channel_from_name(const std::string& s) {
  if (s == "t2t") return Channel::t2t;
  if (s == "s2t") return Channel::s2t;
  throw std::invalid_argument("unknown channel '" + s + "'");
}

void DistillConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("distill: KL weight lambda must be >= 0");
  if (tau <= 0.0) throw std::invalid_argument("distill: temperature tau must be > 0");
}

DistillConfig variant_config(const std::string& variant, Channel channel, double lambda, double tau) {
  DistillConfig cfg;
  cfg.lambda = lambda;
  cfg.tau = tau;
  cfg.channel = channel;
  if (variant == "ce") {
    cfg.target_source = TargetSource::gold;
    cfg.use_kl = false;
  } else if (variant == "ce_kl") {
    cfg.target_source = TargetSource::gold;
    cfg.use_kl = true;
  } else if (variant == "teacher_ce") {
    cfg.target_source = TargetSource::teacher;
    cfg.use_kl = false;
  } else if (variant == "teacher_ce_kl") {
    cfg.target_source = TargetSource::teacher;
    cfg.use_kl = true;
  } else {
    throw std::invalid_argument("unknown loss variant '" + variant +
                                "' (expected ce|ce_kl|teacher_ce|teacher_ce_kl)");
  }
  cfg.validate();
  return cfg;
}

std::string variant_name(const DistillConfig& cfg) {
  std::string n = cfg.target_source == TargetSource::teacher ? "teacher_ce" : "ce";
  if (cfg.use_kl) n += "_kl";
  return n;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

std::vector<double> soften(const std::vector<double>& logits, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("soften: temperature must be > 0");
  if (logits.empty()) throw std::invalid_argument("soften: empty logits row");
  double mx = logits[0] / tau;
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = logits[i] / tau;
    mx = std::max(mx, p[i]);
  }
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

static std::vector<uint8_t> full_mask(size_t n) { return std::vector<uint8_t>(n, 1); }

static int count_unmasked(const std::vector<uint8_t>& mask) {
  int n = 0;
  for (uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

double ce_loss(const Tensor& logits, const std::vector<int>& targets, const std::vector<uint8_t>& mask_in) {
  if (logits.shape.size() != 2) throw std::invalid_argument("ce_loss: logits must be 2-D, got " + shape_str(logits.shape));
  const int steps = logits.shape[0], v = logits.shape[1];
  if (static_cast<size_t>(steps) != targets.size()) {
    throw std::invalid_argument("ce_loss: " + std::to_string(steps) + " logit rows vs " +
                                std::to_string(targets.size()) + " targets");
  }
  const std::vector<uint8_t> mask = mask_in.empty() ? full_mask(targets.size()) : mask_in;
  if (mask.size() != targets.size()) throw std::invalid_argument("ce_loss: mask length mismatch");
  const int n = count_unmasked(mask);
  if (n == 0) throw std::invalid_argument("ce_loss: mask excludes every position");

  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= v) throw std::invalid_argument("ce_loss: target id " + std::to_string(t) + " out of range");
    double mx = logits.at(i, 0);
    for (int j = 1; j < v; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(logits.at(i, j) - mx);
    acc += std::log(z) + mx - logits.at(i, t);
  }
  return acc / n;
}

double kl_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau,
               const std::vector<uint8_t>& mask_in) {
  if (tau <= 0.0) throw std::invalid_argument("kl_loss: temperature must be > 0");
  if (teacher_logits.shape != student_logits.shape || teacher_logits.shape.size() != 2) {
    throw std::invalid_argument("kl_loss: shape mismatch " + shape_str(teacher_logits.shape) + " vs " +
                                shape_str(student_logits.shape));
  }
  const int steps = teacher_logits.shape[0], v = teacher_logits.shape[1];
  const std::vector<uint8_t> mask = mask_in.empty() ? full_mask(static_cast<size_t>(steps)) : mask_in;
  if (mask.size() != static_cast<size_t>(steps)) throw std::invalid_argument("kl_loss: mask length mismatch");
  const int n = count_unmasked(mask);
  if (n == 0) throw std::invalid_argument("kl_loss: mask excludes every position");

  double acc = 0.0;
  std::vector<double> trow(static_cast<size_t>(v)), srow(static_cast<size_t>(v));
  for (int i = 0; i < steps; ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    for (int j = 0; j < v; ++j) {
      trow[static_cast<size_t>(j)] = teacher_logits.at(i, j);
      srow[static_cast<size_t>(j)] = student_logits.at(i, j);
    }
    // log-space: sum_j p_j (log p_j - log q_j)
    const std::vector<double> p = soften(trow, tau);
    const std::vector<double> q = soften(srow, tau);
    for (int j = 0; j < v; ++j) {
      const double pj = p[static_cast<size_t>(j)];
      if (pj > 0.0) acc += pj * (std::log(pj) - std::log(q[static_cast<size_t>(j)]));
    }
  }
  return acc / n;
}

// ---------------------------------------------------------------------------
// Channel losses
// ---------------------------------------------------------------------------

static const std::vector<int>& pick_targets(const Sample& sample, const DistillConfig& cfg) {
  if (cfg.target_source == TargetSource::gold) return sample.y;
  if (!sample.yhat) {
    throw std::invalid_argument("distill: sample " + std::to_string(sample.id) +
                                " has no cached teacher answer (yhat) but the variant needs one");
  }
  return *sample.yhat;
}

static LossGraph build_loss(const BoundModel* teacher, const BoundModel& student, const Var& student_prefix,
                            const std::vector<int>& q, const Sample& sample, const DistillConfig& cfg) {
  cfg.validate();
  const std::vector<int>& targets = pick_targets(sample, cfg);
  const int l = static_cast<int>(targets.size());
  const int v = student.params->dims.vocab;

  LossGraph g;
  Var student_logits = forward_lm(student, student_prefix, targets);

  // CE over the answer positions (prompt and SEP are not in the logits).
  Tensor onehot({l, v});
  for (int i = 0; i < l; ++i) onehot.at(i, targets[static_cast<size_t>(i)]) = 1.0;
  Var logp = log_softmax(student_logits);
  g.ce = scale(masked_sum(logp, onehot), -1.0 / l);

  if (cfg.use_kl) {
    if (teacher == nullptr) throw std::invalid_argument("distill: KL term requested but no teacher model given");
    // Teacher is always conditioned on the text question, teacher-forced on
    // the same targets; its logits enter as constants.
    const Tensor zt = forward_lm(*teacher, embed_text(*teacher, q), targets).detach().value();

    Tensor weights({l, v});
    double const_term = 0.0;
    std::vector<double> row(static_cast<size_t>(v));
    for (int i = 0; i < l; ++i) {
      for (int j = 0; j < v; ++j) row[static_cast<size_t>(j)] = zt.at(i, j);
      const std::vector<double> p = soften(row, cfg.tau);
      for (int j = 0; j < v; ++j) {
        const double pj = p[static_cast<size_t>(j)];
        weights.at(i, j) = pj / l;
        if (pj > 0.0) const_term += pj * std::log(pj) / l;
      }
    }
    Var logq = log_softmax(scale(student_logits, 1.0 / cfg.tau));
    g.kl = add(Var::constant(Tensor::scalar(const_term)), scale(masked_sum(logq, weights), -1.0));
    g.total = add(g.ce, scale(g.kl, cfg.lambda * cfg.tau * cfg.tau));
    g.breakdown.kl = g.kl.value().data[0];
  } else {
    g.total = g.ce;
  }

  g.breakdown.ce = g.ce.value().data[0];
  g.breakdown.total = g.total.value().data[0];
  g.breakdown.token_count = l;
  return g;
}

LossGraph t2t_loss(const BoundModel* teacher, const BoundModel& student, const Sample& sample,
                   const DistillConfig& cfg) {
  if (cfg.channel != Channel::t2t) throw std::invalid_argument("t2t_loss: config is for the " + channel_name(cfg.channel) + " channel");
  return build_loss(teacher, student, embed_text(student, sample.q), sample.q, sample, cfg);
}

LossGraph s2t_loss(const BoundModel* teacher, const BoundModel& student, const Sample& sample,
                   const DistillConfig& cfg) {
  if (cfg.channel != Channel::s2t) throw std::invalid_argument("s2t_loss: config is for the " + channel_name(cfg.channel) + " channel");
  if (!sample.frames) {
    throw std::invalid_argument("s2t_loss: sample " + std::to_string(sample.id) + " has no synthesized frames");
  }
  if (sample.frames->shape[0] != kFramesPerToken * static_cast<int>(sample.q.size())) {
    throw std::invalid_argument("s2t_loss: sample " + std::to_string(sample.id) +
                                " frames do not match its question length");
  }
  return build_loss(teacher, student, encode_speech(student, *sample.frames), sample.q, sample, cfg);
}

LossGraph s2t_loss(const BoundModel* teacher, const BoundModel& student, const std::vector<int>& q,
                   const SpeechQuery& qa, const Sample& targets, const DistillConfig& cfg) {
  if (qa.source_tokens != q) {
    throw std::invalid_argument("s2t_loss: speech query provenance does not match the paired text question");
  }
  Sample s = targets;
  s.q = q;
  s.frames = qa.frames;
  return s2t_loss(teacher, student, s, cfg);
}

LossBreakdown t2t_loss(const ModelParams& teacher, const ModelParams& student, const Sample& sample,
                       const DistillConfig& cfg) {
  const BoundModel t = bind_const(teacher);
  const BoundModel s = bind_const(student);
  return t2t_loss(&t, s, sample, cfg).breakdown;
}

LossBreakdown s2t_loss(const ModelParams& teacher, const ModelParams& student, const Sample& sample,
                       const DistillConfig& cfg) {
  const BoundModel t = bind_const(teacher);
  const BoundModel s = bind_const(student);
  return s2t_loss(&t, s, sample, cfg).breakdown;
}

std::vector<Sample> generate_teacher_targets(const ModelParams& teacher, std::vector<Sample> samples, int max_len) {
  for (Sample& s : samples) {
    s.yhat = greedy_decode(teacher, embed_text_values(teacher, s.q), max_len);
  }
  return samples;
}

}  // namespace xmodal
