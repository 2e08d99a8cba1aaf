#include "xmodal/tinylm.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "xmodal/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format xmd1 stores little-endian doubles");

namespace xmodal {

using nlohmann::json;

std::string role_name(Role r) { return r == Role::teacher ? "teacher" : "student"; }

Role role_from_name(const std::string& s) {
  if (s == "teacher") return Role::teacher;
  if (s == "student") return Role::student;
  throw std::invalid_argument("unknown model role '" + s + "'");
}

void ModelDims::validate() const {
  if (vocab < 8) throw std::invalid_argument("dims: vocab must be >= 8");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_seq <= 0 || frame_dim <= 0) {
    throw std::invalid_argument("dims: all sizes must be positive");
  }
  if (d_model % n_heads != 0) throw std::invalid_argument("dims: d_model must be divisible by n_heads");
}

std::vector<ParamSpec> param_layout(const ModelDims& dims, Role role) {
  dims.validate();
  std::vector<ParamSpec> specs;
  const int d = dims.d_model, hd = dims.head_dim();
  specs.push_back({"tok_embed", {dims.vocab, d}});
  specs.push_back({"pos_embed", {dims.max_seq, d}});
  for (int l = 0; l < dims.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    specs.push_back({p + "ln1_gain", {d}});
    specs.push_back({p + "ln1_bias", {d}});
    for (int h = 0; h < dims.n_heads; ++h) {
      const std::string hp = p + "head" + std::to_string(h) + ".";
      specs.push_back({hp + "wq", {d, hd}});
      specs.push_back({hp + "wk", {d, hd}});
      specs.push_back({hp + "wv", {d, hd}});
    }
    specs.push_back({p + "attn_out_w", {d, d}});
    specs.push_back({p + "attn_out_b", {d}});
    specs.push_back({p + "ln2_gain", {d}});
    specs.push_back({p + "ln2_bias", {d}});
    specs.push_back({p + "ff1_w", {d, dims.d_ff}});
    specs.push_back({p + "ff1_b", {dims.d_ff}});
    specs.push_back({p + "ff2_w", {dims.d_ff, d}});
    specs.push_back({p + "ff2_b", {d}});
  }
  specs.push_back({"final_ln_gain", {d}});
  specs.push_back({"final_ln_bias", {d}});
  specs.push_back({"out_w", {d, dims.vocab}});
  specs.push_back({"out_b", {dims.vocab}});
  if (role == Role::student) {
    specs.push_back({"adapter_w", {dims.frame_dim, d}});
    specs.push_back({"adapter_b", {d}});
  }
  return specs;
}

int ModelParams::param_index(const std::string& name) const {
  if (layout_cache_.empty()) layout_cache_ = param_layout(dims, role);
  for (size_t i = 0; i < layout_cache_.size(); ++i) {
    if (layout_cache_[i].name == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("model: no parameter named '" + name + "'");
}

static bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ModelParams init_model(const ModelDims& dims, Vocab vocab, Role role, uint64_t seed) {
  vocab.validate();
  if (vocab.size() != dims.vocab) {
    throw std::invalid_argument("model: vocab has " + std::to_string(vocab.size()) + " tokens but dims.vocab is " +
                                std::to_string(dims.vocab));
  }
  ModelParams m;
  m.dims = dims;
  m.role = role;
  m.vocab = std::move(vocab);

  Rng rng(seed);
  constexpr double init_std = 0.08;
  for (const ParamSpec& spec : param_layout(dims, role)) {
    Tensor t(spec.shape);
    if (ends_with(spec.name, "_gain")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (spec.name.rfind("adapter_", 0) == 0) {
      for (double& v : t.data) v = rng.uniform(-0.1, 0.1);
    } else if (ends_with(spec.name, "_b") || ends_with(spec.name, "_bias")) {
      // zeros
    } else {
      for (double& v : t.data) v = rng.gauss(0.0, init_std);
    }
    m.tensors.push_back(std::move(t));
  }
  return m;
}

ModelParams init_student_from_teacher(const ModelParams& teacher, uint64_t adapter_seed) {
  if (teacher.role != Role::teacher) {
    throw std::invalid_argument("init_student_from_teacher: source model must have the teacher role");
  }
  ModelParams s;
  s.dims = teacher.dims;
  s.role = Role::student;
  s.vocab = teacher.vocab;
  s.tensors = teacher.tensors;  // bit-exact copy of the text path

  Rng rng(adapter_seed);
  for (const ParamSpec& spec : {ParamSpec{"adapter_w", {s.dims.frame_dim, s.dims.d_model}},
                                ParamSpec{"adapter_b", {s.dims.d_model}}}) {
    Tensor t(spec.shape);
    for (double& v : t.data) v = rng.uniform(-0.1, 0.1);
    s.tensors.push_back(std::move(t));
  }
  return s;
}

static void check_bound(const ModelParams& params) {
  const auto layout = param_layout(params.dims, params.role);
  if (params.tensors.size() != layout.size()) {
    throw std::invalid_argument("model: expected " + std::to_string(layout.size()) + " parameter tensors, got " +
                                std::to_string(params.tensors.size()));
  }
}

BoundModel bind(const ModelParams& params) {
  check_bound(params);
  BoundModel m;
  m.params = &params;
  m.leaves.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) m.leaves.push_back(Var::leaf(t));
  return m;
}

BoundModel bind_const(const ModelParams& params) {
  check_bound(params);
  BoundModel m;
  m.params = &params;
  m.leaves.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) m.leaves.push_back(Var::constant(t));
  return m;
}

std::vector<Tensor> collect_grads(const BoundModel& m) {
  std::vector<Tensor> grads;
  grads.reserve(m.leaves.size());
  for (const Var& leaf : m.leaves) grads.push_back(leaf.grad());
  return grads;
}

Var embed_text(const BoundModel& m, const std::vector<int>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("embed_text: empty token sequence");
  for (int t : tokens) {
    if (t < 0 || t >= m.params->dims.vocab) {
      throw std::invalid_argument("embed_text: token id " + std::to_string(t) + " out of range (vocab " +
                                  std::to_string(m.params->dims.vocab) + ")");
    }
  }
  return embed_rows(m.p("tok_embed"), tokens);
}

Var encode_speech(const BoundModel& m, const Tensor& frames) {
  if (m.params->role != Role::student) {
    throw std::invalid_argument("encode_speech: teacher models never consume speech");
  }
  if (frames.shape.size() != 2 || frames.shape[1] != m.params->dims.frame_dim) {
    throw std::invalid_argument("encode_speech: frames must be [n," + std::to_string(m.params->dims.frame_dim) +
                                "], got " + shape_str(frames.shape));
  }
  const int f = frames.shape[0];
  const int w = frames.shape[1];
  const int out_len = (f + 1) / 2;

  // Mean-pool consecutive pairs; an odd trailing frame is its own group.
  Tensor pooled({out_len, w});
  for (int i = 0; i < out_len; ++i) {
    const int a = 2 * i;
    const int b = std::min(a + 1, f - 1);
    for (int j = 0; j < w; ++j) {
      pooled.at(i, j) = a == b ? frames.at(a, j) : 0.5 * (frames.at(a, j) + frames.at(b, j));
    }
  }
  return add(matmul(Var::constant(pooled), m.p("adapter_w")), m.p("adapter_b"));
}

// Shared transformer trunk: positions in, final layer-norm out.
static Var transformer_core(const BoundModel& m, const Var& input) {
  const ModelDims& dims = m.params->dims;
  const int t = input.value().shape[0];
  if (t > dims.max_seq) {
    throw std::invalid_argument("forward: sequence length " + std::to_string(t) + " exceeds max_seq " +
                                std::to_string(dims.max_seq));
  }

  std::vector<int> positions(static_cast<size_t>(t));
  std::iota(positions.begin(), positions.end(), 0);
  Var x = add(input, embed_rows(m.p("pos_embed"), positions));

  Tensor causal({t, t});
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) causal.at(i, j) = -1e9;
  const Var mask = Var::constant(causal);
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(dims.head_dim()));

  for (int l = 0; l < dims.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Var h = add(mul(layer_norm(x), m.p(p + "ln1_gain")), m.p(p + "ln1_bias"));

    Var heads;
    for (int hd = 0; hd < dims.n_heads; ++hd) {
      const std::string hp = p + "head" + std::to_string(hd) + ".";
      Var q = matmul(h, m.p(hp + "wq"));
      Var k = matmul(h, m.p(hp + "wk"));
      Var v = matmul(h, m.p(hp + "wv"));
      Var scores = add(scale(matmul(q, transpose(k)), inv_sqrt_hd), mask);
      Var probs = exp_elem(log_softmax(scores));
      Var o = matmul(probs, v);
      heads = hd == 0 ? o : concat_cols(heads, o);
    }
    x = add(x, add(matmul(heads, m.p(p + "attn_out_w")), m.p(p + "attn_out_b")));

    Var f = add(mul(layer_norm(x), m.p(p + "ln2_gain")), m.p(p + "ln2_bias"));
    f = add(matmul(f, m.p(p + "ff1_w")), m.p(p + "ff1_b"));
    f = add(matmul(relu(f), m.p(p + "ff2_w")), m.p(p + "ff2_b"));
    x = add(x, f);
  }
  return add(mul(layer_norm(x), m.p("final_ln_gain")), m.p("final_ln_bias"));
}

Var forward_lm(const BoundModel& m, const Var& prefix, const std::vector<int>& targets) {
  if (targets.empty()) throw std::invalid_argument("forward_lm: empty target sequence");
  if (prefix.value().shape.size() != 2 || prefix.value().shape[1] != m.params->dims.d_model) {
    throw std::invalid_argument("forward_lm: prefix must be [n," + std::to_string(m.params->dims.d_model) +
                                "], got " + shape_str(prefix.value().shape));
  }
  const int p = prefix.value().shape[0];
  const int l = static_cast<int>(targets.size());

  std::vector<int> teacher_forced;
  teacher_forced.reserve(targets.size());
  teacher_forced.push_back(Vocab::kBos);
  for (size_t i = 0; i + 1 < targets.size(); ++i) teacher_forced.push_back(targets[i]);

  Var input = concat_rows(concat_rows(prefix, embed_text(m, {Vocab::kSep})), embed_text(m, teacher_forced));
  Var hidden = transformer_core(m, input);
  Var rows = slice_rows(hidden, p + 1, l);
  return add(matmul(rows, m.p("out_w")), m.p("out_b"));
}

std::vector<int> greedy_decode(const ModelParams& params, const Tensor& prefix, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  const BoundModel m = bind_const(params);
  const Var pf = Var::constant(prefix);

  std::vector<int> out;
  while (static_cast<int>(out.size()) < max_len) {
    if (static_cast<int>(out.size()) == max_len - 1) {
      out.push_back(Vocab::kEos);  // cap: last slot is reserved for EOS
      break;
    }
    std::vector<int> tail = {Vocab::kSep, Vocab::kBos};
    tail.insert(tail.end(), out.begin(), out.end());
    Var hidden = transformer_core(m, concat_rows(pf, embed_text(m, tail)));
    Var last = slice_rows(hidden, hidden.value().shape[0] - 1, 1);
    const Tensor logits = add(matmul(last, m.p("out_w")), m.p("out_b")).value();

    int best = 0;
    for (int v = 1; v < params.dims.vocab; ++v) {
      if (logits.data[static_cast<size_t>(v)] > logits.data[static_cast<size_t>(best)]) best = v;
    }
    out.push_back(best);
    if (best == Vocab::kEos) break;
  }
  return out;
}

Tensor embed_text_values(const ModelParams& params, const std::vector<int>& tokens) {
  return embed_text(bind_const(params), tokens).value();
}

Tensor encode_speech_values(const ModelParams& params, const Tensor& frames) {
  return encode_speech(bind_const(params), frames).value();
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::string& path) {
  check_bound(params);
  json header;
  header["format"] = "xmd1";
  header["role"] = role_name(params.role);
  header["dims"] = {{"vocab", params.dims.vocab},     {"d_model", params.dims.d_model},
                    {"n_layers", params.dims.n_layers}, {"n_heads", params.dims.n_heads},
                    {"d_ff", params.dims.d_ff},       {"max_seq", params.dims.max_seq},
                    {"frame_dim", params.dims.frame_dim}};
  header["vocab"] = params.vocab.tokens;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  f << header.dump() << '\n';
  for (const Tensor& t : params.tensors) {
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("checkpoint: '" + path + "' missing header line");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: '" + path + "' header is not valid JSON: " + e.what());
  }
  if (header.value("format", "") != "xmd1") {
    throw std::runtime_error("checkpoint: '" + path + "' has unsupported format '" +
                             header.value("format", "<missing>") + "'");
  }

  ModelParams m;
  try {
    const json& d = header.at("dims");
    m.dims.vocab = d.at("vocab").get<int>();
    m.dims.d_model = d.at("d_model").get<int>();
    m.dims.n_layers = d.at("n_layers").get<int>();
    m.dims.n_heads = d.at("n_heads").get<int>();
    m.dims.d_ff = d.at("d_ff").get<int>();
    m.dims.max_seq = d.at("max_seq").get<int>();
    m.dims.frame_dim = d.at("frame_dim").get<int>();
    m.role = role_from_name(header.at("role").get<std::string>());
    m.vocab.tokens = header.at("vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: '" + path + "' header incomplete: " + e.what());
  }
  m.vocab.validate();
  if (m.vocab.size() != m.dims.vocab) {
    throw std::runtime_error("checkpoint: '" + path + "' vocab size disagrees with dims");
  }

  for (const ParamSpec& spec : param_layout(m.dims, m.role)) {
    Tensor t(spec.shape);
    f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(double))) {
      throw std::runtime_error("checkpoint: '" + path + "' truncated while reading " + spec.name);
    }
    if (!t.all_finite()) throw std::runtime_error("checkpoint: '" + path + "' has non-finite values in " + spec.name);
    m.tensors.push_back(std::move(t));
  }
  char extra;
  if (f.read(&extra, 1)) throw std::runtime_error("checkpoint: '" + path + "' has trailing bytes");
  return m;
}

}  // namespace xmodal
