#include "xmodal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

static int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: dimension sizes must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

int Tensor::rows() const {
  if (shape.size() != 2) throw std::invalid_argument("tensor: rows() on non-2D shape " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) throw std::invalid_argument("tensor: cols() on non-2D shape " + shape_str(shape));
  return shape[1];
}

double& Tensor::at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
double Tensor::at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Graph nodes
// ---------------------------------------------------------------------------

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated iff requires_grad; zeroed at creation
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // pulls node.grad into parents
  bool requires_grad = false;
};

}  // namespace detail

using detail::Node;

static std::shared_ptr<Node> make_node(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad = Tensor(n->value.shape);
  return n;
}

Var Var::leaf(Tensor value) { return Var(make_node(std::move(value), true)); }
Var Var::constant(Tensor value) { return Var(make_node(std::move(value), false)); }

const Tensor& Var::value() const {
  if (!node_) throw std::runtime_error("Var: value() on empty handle");
  return node_->value;
}

const Tensor& Var::grad() const {
  if (!node_) throw std::runtime_error("Var: grad() on empty handle");
  if (!node_->requires_grad) throw std::runtime_error("Var: grad() on a node that does not require gradients");
  return node_->grad;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var Var::detach() const {
  if (!node_) throw std::runtime_error("Var: detach() on empty handle");
  return Var::constant(node_->value);
}

// Helper owning the wiring pattern shared by all primitives: the child node
// requires a gradient iff any parent does, and only then are parents retained
// and the backward rule kept. A subgraph built purely from constants stays
// constant, so e.g. a no-grad model forward allocates no gradient buffers.
class OpBuilder {
 public:
  static Var unary(const Var& a, Tensor out, std::function<void(Node&, Node&)> back) {
    auto child = make_node(std::move(out), a.node_->requires_grad);
    if (child->requires_grad) {
      child->parents = {a.node_};
      child->backward_fn = [back = std::move(back)](Node& self) { back(self, *self.parents[0]); };
    }
    return Var(child);
  }

  static Var binary(const Var& a, const Var& b, Tensor out,
                    std::function<void(Node&, Node&, Node&)> back) {
    const bool rg = a.node_->requires_grad || b.node_->requires_grad;
    auto child = make_node(std::move(out), rg);
    if (rg) {
      child->parents = {a.node_, b.node_};
      child->backward_fn = [back = std::move(back)](Node& self) {
        back(self, *self.parents[0], *self.parents[1]);
      };
    }
    return Var(child);
  }

  static Node& node(const Var& v) { return *v.node_; }
};

static void require_defined(const Var& v, const char* op) {
  if (!v.defined()) throw std::invalid_argument(std::string(op) + ": empty operand");
}

static void op_shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
}

// Broadcast classification for add/mul: equal shapes, second operand a
// trailing-axis vector of a 2-D first operand, or second operand a scalar.
enum class Bcast { same, row_vector, scalar_rhs };

static Bcast classify_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) return Bcast::same;
  if (b.numel() == 1) return Bcast::scalar_rhs;
  if (a.shape.size() == 2 && b.shape.size() == 1 && b.shape[0] == a.shape[1]) return Bcast::row_vector;
  op_shape_error(op, a, b);
  return Bcast::same;  // unreachable
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = classify_broadcast("add", av, bv);

  Tensor out = av;
  const int n = bv.shape.empty() ? 1 : (mode == Bcast::row_vector ? bv.shape[0] : 1);
  switch (mode) {
    case Bcast::same:
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
      break;
    case Bcast::scalar_rhs:
      for (double& v : out.data) v += bv.data[0];
      break;
    case Bcast::row_vector:
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i % n];
      break;
  }

  return OpBuilder::binary(a, b, std::move(out), [mode, n](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) {
      for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i];
    }
    if (pb.requires_grad) {
      switch (mode) {
        case Bcast::same:
          for (size_t i = 0; i < pb.grad.data.size(); ++i) pb.grad.data[i] += self.grad.data[i];
          break;
        case Bcast::scalar_rhs:
          for (double g : self.grad.data) pb.grad.data[0] += g;
          break;
        case Bcast::row_vector:
          for (size_t i = 0; i < self.grad.data.size(); ++i) pb.grad.data[i % n] += self.grad.data[i];
          break;
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = classify_broadcast("mul", av, bv);

  Tensor out = av;
  const int n = mode == Bcast::row_vector ? bv.shape[0] : 1;
  switch (mode) {
    case Bcast::same:
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
      break;
    case Bcast::scalar_rhs:
      for (double& v : out.data) v *= bv.data[0];
      break;
    case Bcast::row_vector:
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i % n];
      break;
  }

  return OpBuilder::binary(a, b, std::move(out), [mode, n](Node& self, Node& pa, Node& pb) {
    const Tensor& av = pa.value;
    const Tensor& bv = pb.value;
    if (pa.requires_grad) {
      switch (mode) {
        case Bcast::same:
          for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i] * bv.data[i];
          break;
        case Bcast::scalar_rhs:
          for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i] * bv.data[0];
          break;
        case Bcast::row_vector:
          for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i] * bv.data[i % n];
          break;
      }
    }
    if (pb.requires_grad) {
      switch (mode) {
        case Bcast::same:
          for (size_t i = 0; i < pb.grad.data.size(); ++i) pb.grad.data[i] += self.grad.data[i] * av.data[i];
          break;
        case Bcast::scalar_rhs:
          for (size_t i = 0; i < self.grad.data.size(); ++i) pb.grad.data[0] += self.grad.data[i] * av.data[i];
          break;
        case Bcast::row_vector:
          for (size_t i = 0; i < self.grad.data.size(); ++i) pb.grad.data[i % n] += self.grad.data[i] * av.data[i];
          break;
      }
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[1] != bv.shape[0]) {
    op_shape_error("matmul", av, bv);
  }
  const int m = av.shape[0], k = av.shape[1], n = bv.shape[1];

  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av.data[static_cast<size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const size_t brow = static_cast<size_t>(p) * n;
      const size_t orow = static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) out.data[orow + j] += aip * bv.data[brow + j];
    }
  }

  return OpBuilder::binary(a, b, std::move(out), [m, k, n](Node& self, Node& pa, Node& pb) {
    // dA += G * B^T, dB += A^T * G
    if (pa.requires_grad) {
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) {
            acc += self.grad.data[static_cast<size_t>(i) * n + j] * pb.value.data[static_cast<size_t>(p) * n + j];
          }
          pa.grad.data[static_cast<size_t>(i) * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            acc += pa.value.data[static_cast<size_t>(i) * k + p] * self.grad.data[static_cast<size_t>(i) * n + j];
          }
          pb.grad.data[static_cast<size_t>(p) * n + j] += acc;
        }
      }
    }
  });
}

Var transpose(const Var& a) {
  require_defined(a, "transpose");
  const Tensor& av = a.value();
  if (av.shape.size() != 2) {
    throw std::invalid_argument("transpose: expected 2-D operand, got " + shape_str(av.shape));
  }
  const int m = av.shape[0], n = av.shape[1];
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(j) * m + i] = av.data[static_cast<size_t>(i) * n + j];

  return OpBuilder::unary(a, std::move(out), [m, n](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        pa.grad.data[static_cast<size_t>(i) * n + j] += self.grad.data[static_cast<size_t>(j) * m + i];
  });
}

Var embed_rows(const Var& table, const std::vector<int>& ids) {
  require_defined(table, "embed_rows");
  const Tensor& tv = table.value();
  if (tv.shape.size() != 2) {
    throw std::invalid_argument("embed_rows: table must be 2-D, got " + shape_str(tv.shape));
  }
  if (ids.empty()) throw std::invalid_argument("embed_rows: empty id list");
  const int v = tv.shape[0], d = tv.shape[1];
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw std::invalid_argument("embed_rows: id " + std::to_string(id) + " out of range for table " +
                                  shape_str(tv.shape));
    }
  }

  Tensor out({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    const size_t src = static_cast<size_t>(ids[i]) * d;
    std::copy_n(tv.data.begin() + src, d, out.data.begin() + i * d);
  }

  return OpBuilder::unary(table, std::move(out), [ids, d](Node& self, Node& pt) {
    if (!pt.requires_grad) return;
    for (size_t i = 0; i < ids.size(); ++i) {
      const size_t dst = static_cast<size_t>(ids[i]) * d;
      for (int j = 0; j < d; ++j) pt.grad.data[dst + j] += self.grad.data[i * d + j];
    }
  });
}

Var relu(const Var& a) {
  require_defined(a, "relu");
  Tensor out = a.value();
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return OpBuilder::unary(a, std::move(out), [](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (size_t i = 0; i < pa.grad.data.size(); ++i) {
      if (pa.value.data[i] > 0.0) pa.grad.data[i] += self.grad.data[i];
    }
  });
}

Var layer_norm(const Var& a, double eps) {
  require_defined(a, "layer_norm");
  const Tensor& av = a.value();
  const int n = av.shape.empty() ? 0 : av.shape.back();
  if (n <= 0) throw std::invalid_argument("layer_norm: bad shape " + shape_str(av.shape));
  const int64_t rows = av.numel() / n;

  Tensor out(av.shape);
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += av.data[base + j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double c = av.data[base + j] - mean;
      var += c * c;
    }
    var /= n;
    const double s = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = s;
    for (int j = 0; j < n; ++j) out.data[base + j] = (av.data[base + j] - mean) * s;
  }

  // dx = s * (g - mean(g) - y * mean(g.*y)), exact including eps since y
  // already carries the regularized scale.
  Tensor y = out;
  return OpBuilder::unary(a, std::move(out), [n, rows, inv_std, y](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (int64_t r = 0; r < rows; ++r) {
      const size_t base = static_cast<size_t>(r) * n;
      double gmean = 0.0, gymean = 0.0;
      for (int j = 0; j < n; ++j) {
        gmean += self.grad.data[base + j];
        gymean += self.grad.data[base + j] * y.data[base + j];
      }
      gmean /= n;
      gymean /= n;
      const double s = inv_std[static_cast<size_t>(r)];
      for (int j = 0; j < n; ++j) {
        pa.grad.data[base + j] += s * (self.grad.data[base + j] - gmean - y.data[base + j] * gymean);
      }
    }
  });
}

Var log_softmax(const Var& a) {
  require_defined(a, "log_softmax");
  const Tensor& av = a.value();
  const int n = av.shape.empty() ? 0 : av.shape.back();
  if (n <= 0) throw std::invalid_argument("log_softmax: bad shape " + shape_str(av.shape));
  const int64_t rows = av.numel() / n;

  Tensor out(av.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * n;
    double mx = av.data[base];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av.data[base + j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(av.data[base + j] - mx);
    const double lz = std::log(z) + mx;
    for (int j = 0; j < n; ++j) out.data[base + j] = av.data[base + j] - lz;
  }

  Tensor logp = out;
  return OpBuilder::unary(a, std::move(out), [n, rows, logp](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (int64_t r = 0; r < rows; ++r) {
      const size_t base = static_cast<size_t>(r) * n;
      double gsum = 0.0;
      for (int j = 0; j < n; ++j) gsum += self.grad.data[base + j];
      for (int j = 0; j < n; ++j) {
        pa.grad.data[base + j] += self.grad.data[base + j] - std::exp(logp.data[base + j]) * gsum;
      }
    }
  });
}

Var exp_elem(const Var& a) {
  require_defined(a, "exp_elem");
  Tensor out = a.value();
  for (double& x : out.data) x = std::exp(x);
  Tensor ev = out;
  return OpBuilder::unary(a, std::move(out), [ev](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i] * ev.data[i];
  });
}

Var scale(const Var& a, double c) {
  require_defined(a, "scale");
  Tensor out = a.value();
  for (double& x : out.data) x *= c;
  return OpBuilder::unary(a, std::move(out), [c](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += c * self.grad.data[i];
  });
}

Var masked_sum(const Var& a, const Tensor& weights) {
  require_defined(a, "masked_sum");
  const Tensor& av = a.value();
  if (!av.same_shape(weights)) op_shape_error("masked_sum", av, weights);
  double acc = 0.0;
  for (size_t i = 0; i < av.data.size(); ++i) acc += av.data[i] * weights.data[i];
  return OpBuilder::unary(a, Tensor::scalar(acc), [weights](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    const double g = self.grad.data[0];
    for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += g * weights.data[i];
  });
}

Var concat_rows(const Var& a, const Var& b) {
  require_defined(a, "concat_rows");
  require_defined(b, "concat_rows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[1] != bv.shape[1]) {
    op_shape_error("concat_rows", av, bv);
  }
  const int ra = av.shape[0], rb = bv.shape[0], c = av.shape[1];
  Tensor out({ra + rb, c});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.data.size());

  return OpBuilder::binary(a, b, std::move(out), [ra, rb, c](Node& self, Node& pa, Node& pb) {
    const size_t na = static_cast<size_t>(ra) * c;
    if (pa.requires_grad) {
      for (size_t i = 0; i < na; ++i) pa.grad.data[i] += self.grad.data[i];
    }
    if (pb.requires_grad) {
      for (size_t i = 0; i < static_cast<size_t>(rb) * c; ++i) pb.grad.data[i] += self.grad.data[na + i];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_defined(a, "concat_cols");
  require_defined(b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[0] != bv.shape[0]) {
    op_shape_error("concat_cols", av, bv);
  }
  const int r = av.shape[0], ca = av.shape[1], cb = bv.shape[1];
  Tensor out({r, ca + cb});
  for (int i = 0; i < r; ++i) {
    std::copy_n(av.data.begin() + static_cast<size_t>(i) * ca, ca,
                out.data.begin() + static_cast<size_t>(i) * (ca + cb));
    std::copy_n(bv.data.begin() + static_cast<size_t>(i) * cb, cb,
                out.data.begin() + static_cast<size_t>(i) * (ca + cb) + ca);
  }

  return OpBuilder::binary(a, b, std::move(out), [r, ca, cb](Node& self, Node& pa, Node& pb) {
    for (int i = 0; i < r; ++i) {
      const size_t srow = static_cast<size_t>(i) * (ca + cb);
      if (pa.requires_grad) {
        for (int j = 0; j < ca; ++j) pa.grad.data[static_cast<size_t>(i) * ca + j] += self.grad.data[srow + j];
      }
      if (pb.requires_grad) {
        for (int j = 0; j < cb; ++j) pb.grad.data[static_cast<size_t>(i) * cb + j] += self.grad.data[srow + ca + j];
      }
    }
  });
}

Var slice_rows(const Var& a, int start, int len) {
  require_defined(a, "slice_rows");
  const Tensor& av = a.value();
  if (av.shape.size() != 2) {
    throw std::invalid_argument("slice_rows: expected 2-D operand, got " + shape_str(av.shape));
  }
  if (start < 0 || len <= 0 || start + len > av.shape[0]) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of bounds for " + shape_str(av.shape));
  }
  const int c = av.shape[1];
  Tensor out({len, c});
  std::copy_n(av.data.begin() + static_cast<size_t>(start) * c, static_cast<size_t>(len) * c, out.data.begin());

  return OpBuilder::unary(a, std::move(out), [start, len, c](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    const size_t off = static_cast<size_t>(start) * c;
    for (size_t i = 0; i < static_cast<size_t>(len) * c; ++i) pa.grad.data[off + i] += self.grad.data[i];
  });
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Var& root) {
  require_defined(root, "backward");
  Node* rn = &OpBuilder::node(root);
  if (rn->value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " + shape_str(rn->value.shape));
  }
  if (!rn->requires_grad) return;  // constant graph, nothing to do

  // Iterative post-order DFS; constants have no parents so the walk stops
  // at leaves and detach boundaries on its own.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(rn, 0);
  visited.insert(rn);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  rn->grad.data[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (pass() ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err << " tol=" << tolerance
     << " coords=" << coords_checked;
  if (worst_param >= 0) {
    os << " worst=param" << worst_param << "[" << worst_coord << "] analytic=" << worst_analytic
       << " numeric=" << worst_numeric;
  }
  return os.str();
}

GradCheckReport grad_check(
    const std::function<Var(const std::vector<Var>&)>& loss_fn,
    const std::vector<Tensor>& params, double epsilon, double tolerance,
    int max_coords, uint64_t seed) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

  // Analytic pass.
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(Var::leaf(p));
  Var root = loss_fn(leaves);
  if (root.value().numel() != 1) {
    throw std::invalid_argument("grad_check: loss_fn must return a scalar, got " + shape_str(root.value().shape));
  }
  if (!std::isfinite(root.value().data[0])) throw NumericError("grad_check: loss is not finite at the base point");
  backward(root);

  // Coordinate sample across the concatenation of all parameters.
  int64_t total = 0;
  for (const Tensor& p : params) total += p.numel();
  std::vector<int64_t> coords;
  if (total <= max_coords) {
    for (int64_t i = 0; i < total; ++i) coords.push_back(i);
  } else {
    Rng rng(seed);
    std::unordered_set<int64_t> seen;
    while (static_cast<int>(coords.size()) < max_coords) {
      const int64_t c = static_cast<int64_t>(rng.below(static_cast<size_t>(total)));
      if (seen.insert(c).second) coords.push_back(c);
    }
  }

  std::vector<Tensor> work = params;
  auto eval_at = [&]() -> double {
    std::vector<Var> cs;
    cs.reserve(work.size());
    for (const Tensor& p : work) cs.push_back(Var::constant(p));
    return loss_fn(cs).value().data[0];
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (int64_t flat : coords) {
    int pi = 0;
    int64_t ci = flat;
    while (ci >= params[pi].numel()) ci -= params[pi++].numel();

    const double orig = work[pi].data[static_cast<size_t>(ci)];
    work[pi].data[static_cast<size_t>(ci)] = orig + epsilon;
    const double fp = eval_at();
    work[pi].data[static_cast<size_t>(ci)] = orig - epsilon;
    const double fm = eval_at();
    work[pi].data[static_cast<size_t>(ci)] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite loss at perturbed coordinate param" +
                               std::to_string(pi) + "[" + std::to_string(ci) + "]");
    }

    const double numeric = (fp - fm) / (2.0 * epsilon);
    const double analytic = leaves[pi].grad().data[static_cast<size_t>(ci)];
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    const double rel = std::fabs(analytic - numeric) / denom;
    ++report.coords_checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = pi;
      report.worst_coord = ci;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var(const Var&)>& loss_fn,
                           const Tensor& param, double epsilon,
                           double tolerance, int max_coords, uint64_t seed) {
  return grad_check(
      [&loss_fn](const std::vector<Var>& vs) { return loss_fn(vs[0]); },
      std::vector<Tensor>{param}, epsilon, tolerance, max_coords, seed);
}

}  // namespace xmodal
