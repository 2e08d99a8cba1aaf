#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

enum class Role { teacher, student };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

struct ModelDims {
  int vocab = 64;
  int d_model = 32;
  int n_layers = 2;
  int n_heads = 2;
  int d_ff = 64;
  int max_seq = 64;
  int frame_dim = 24;  // acoustic frame width consumed by the student adapter

  int head_dim() const { return d_model / n_heads; }
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Decoder-only transformer, pre-LN, learned positional embeddings, plus an
// optional speech adapter (students only). Parameters live in `tensors`,
// aligned one-to-one with param_layout(); that order is also the checkpoint
// order.
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
};

std::vector<ParamSpec> param_layout(const ModelDims& dims, Role role);

struct ModelParams {
  ModelDims dims;
  Role role = Role::teacher;
  Vocab vocab;
  std::vector<Tensor> tensors;

  int param_index(const std::string& name) const;  // throws if unknown
  const Tensor& param(const std::string& name) const { return tensors[param_index(name)]; }
  Tensor& param(const std::string& name) { return tensors[param_index(name)]; }

 private:
  mutable std::vector<ParamSpec> layout_cache_;  // derived from dims/role on first lookup
};

// Fresh model with seeded gaussian(0, 0.08) weights, unit layer-norm gains,
// zero biases. Student adapters are seeded uniform(-0.1, 0.1).
ModelParams init_model(const ModelDims& dims, Vocab vocab, Role role, uint64_t seed);

// Student = bit-exact copy of the teacher's weights plus a freshly seeded
// adapter. Immediately after this call the text path of both models is
// identical.
ModelParams init_student_from_teacher(const ModelParams& teacher, uint64_t adapter_seed);

// Graph-bound view of a model: one Var per parameter tensor, same order.
struct BoundModel {
  const ModelParams* params = nullptr;
  std::vector<Var> leaves;

  const Var& p(int index) const { return leaves[static_cast<size_t>(index)]; }
  const Var& p(const std::string& name) const { return leaves[static_cast<size_t>(params->param_index(name))]; }
};

BoundModel bind(const ModelParams& params);        // differentiable leaves
BoundModel bind_const(const ModelParams& params);  // evaluation only

// Gradients per parameter tensor, in layout order. Valid after backward().
std::vector<Tensor> collect_grads(const BoundModel& m);

// Token embeddings: row i of the result is the embedding-table row of
// tokens[i]. Positions are added later, inside the transformer core.
Var embed_text(const BoundModel& m, const std::vector<int>& tokens);

// Speech path: mean-pool each consecutive pair of frames, then apply the
// linear adapter. Output length is ceil(num_frames / 2). Teachers have no
// adapter and never consume speech.
Var encode_speech(const BoundModel& m, const Tensor& frames);

// Teacher-forced forward pass over [prefix | SEP | BOS y_1 .. y_{L-1}].
// Returns L x V logits, one row per target position; causal masking makes
// row i independent of targets at positions >= i.
Var forward_lm(const BoundModel& m, const Var& prefix, const std::vector<int>& targets);

// Greedy decoding from a prefix of embeddings. Appends the argmax token
// (ties break toward the lowest id) until EOS or max_len tokens, then caps
// with EOS if the model never produced one.
std::vector<int> greedy_decode(const ModelParams& params, const Tensor& prefix, int max_len);

// Value-level conveniences for the decoding/eval paths.
Tensor embed_text_values(const ModelParams& params, const std::vector<int>& tokens);
Tensor encode_speech_values(const ModelParams& params, const Tensor& frames);

// ---------------------------------------------------------------------------
// Checkpoint format "xmd1": one JSON header line (format, role, dims, vocab)
// followed by every parameter tensor as little-endian 64-bit reals, in
// param_layout() order.
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace xmodal
