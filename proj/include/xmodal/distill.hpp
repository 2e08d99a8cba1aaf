#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/modality.hpp"
#include "xmodal/tensor.hpp"
#include "xmodal/tinylm.hpp"

namespace xmodal {

enum class Channel { t2t, s2t };

std::string channel_name(Channel c);
Channel channel_from_name(const std::string& s);

enum class TargetSource { gold, teacher };

// The four loss variants: (gold, no KL) = "ce", (gold, KL) = "ce_kl",
// (teacher, no KL) = "teacher_ce", (teacher, KL) = "teacher_ce_kl".
struct DistillConfig {
  double lambda = 0.5;  // KL weight
  double tau = 2.0;     // softening temperature
  TargetSource target_source = TargetSource::gold;
  bool use_kl = false;
  Channel channel = Channel::t2t;

  void validate() const;
};

DistillConfig variant_config(const std::string& variant, Channel channel, double lambda = 0.5, double tau = 2.0);
std::string variant_name(const DistillConfig& cfg);

struct LossBreakdown {
  double ce = 0.0;
  double kl = 0.0;  // pre-scaling; zero when the KL term is disabled
  double total = 0.0;  // ce + lambda * tau^2 * kl
  int token_count = 0;
};

// ---------------------------------------------------------------------------
// Kernels (value level).
// ---------------------------------------------------------------------------

// softmax(logits / tau); max-subtracted, sums to 1.
std::vector<double> soften(const std::vector<double>& logits, double tau);

// Mean over unmasked positions of -log softmax(logits)[target]. An empty
// mask means all positions count.
double ce_loss(const Tensor& logits, const std::vector<int>& targets, const std::vector<uint8_t>& mask = {});

// Mean over unmasked positions of KL(soften(teacher) || soften(student)),
// log-space computation. Step counts must agree: both sides are teacher-forced
// on the same target sequence, so they do by construction.
double kl_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau,
               const std::vector<uint8_t>& mask = {});

// ---------------------------------------------------------------------------
// Channel losses (graph level). The student side is differentiable; teacher
// logits are detached, so no gradient ever reaches teacher parameters even
// when the teacher is bound with gradient-tracking leaves.
// ---------------------------------------------------------------------------

struct LossGraph {
  Var total;  // scalar root for backward()
  Var ce;
  Var kl;  // undefined Var when use_kl is false
  LossBreakdown breakdown;
};

// Student consumes the text question; teacher (needed only for the KL term)
// consumes the same text.
LossGraph t2t_loss(const BoundModel* teacher, const BoundModel& student, const Sample& sample,
                   const DistillConfig& cfg);

// Student consumes synthesized speech; teacher consumes the paired text.
LossGraph s2t_loss(const BoundModel* teacher, const BoundModel& student, const Sample& sample,
                   const DistillConfig& cfg);

// Explicit speech-query form; rejects a SpeechQuery whose provenance does not
// match the text question it is paired with.
LossGraph s2t_loss(const BoundModel* teacher, const BoundModel& student, const std::vector<int>& q,
                   const SpeechQuery& qa, const Sample& targets, const DistillConfig& cfg);

// Value-level conveniences.
LossBreakdown t2t_loss(const ModelParams& teacher, const ModelParams& student, const Sample& sample,
                       const DistillConfig& cfg);
LossBreakdown s2t_loss(const ModelParams& teacher, const ModelParams& student, const Sample& sample,
                       const DistillConfig& cfg);

// Greedy-decodes the teacher on every text question and caches the result in
// the yhat field. Deterministic; answers are capped at max_len tokens and
// always end in EOS.
std::vector<Sample> generate_teacher_targets(const ModelParams& teacher, std::vector<Sample> samples,
                                             int max_len = 16);

}  // namespace xmodal
