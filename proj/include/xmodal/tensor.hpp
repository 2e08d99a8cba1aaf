#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace xmodal {

// Dense row-major tensor of 64-bit reals. Everything in this project runs in
// doubles: the test harness leans on finite-difference checks at tolerances
// that 32-bit arithmetic cannot sustain.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);  // zero-filled

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  int64_t numel() const;
  int rows() const;  // 2-D helpers
  int cols() const;

  double& at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

std::string shape_str(const std::vector<int>& shape);

namespace detail {
struct Node;
}

// Handle to a node in the reverse-mode differentiation graph. The graph is
// implicit: each node keeps shared ownership of its parents, and backward()
// walks it once in reverse topological order. Graphs are single-use; build a
// fresh one per loss evaluation.
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value);      // participates in gradients
  static Var constant(Tensor value);  // never receives a gradient

  const Tensor& value() const;
  const Tensor& grad() const;  // zeros until backward() reaches this node
  bool requires_grad() const;
  bool defined() const { return node_ != nullptr; }

  // Stop-gradient: same value, no path back to this node's parents.
  Var detach() const;

 private:
  friend class OpBuilder;
  friend void backward(const Var& root);
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Forward primitives. Each registers its backward rule; shapes are checked up
// front and mismatches throw std::invalid_argument naming the operation and
// both shapes. Broadcasting is limited to a trailing-axis vector or a scalar
// on the *second* operand of add/mul; everything else is explicit.
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var embed_rows(const Var& table, const std::vector<int>& ids);  // row gather
Var relu(const Var& a);
Var layer_norm(const Var& a, double eps = 1e-5);  // per row, pre-affine
Var log_softmax(const Var& a);                    // over last axis
Var exp_elem(const Var& a);
Var scale(const Var& a, double c);
Var masked_sum(const Var& a, const Tensor& weights);  // scalar sum of a.*w
Var concat_rows(const Var& a, const Var& b);
Var concat_cols(const Var& a, const Var& b);
Var slice_rows(const Var& a, int start, int len);

// Reverse pass from a scalar root. Each reachable node is visited exactly
// once; leaf grads accumulate additively across paths.
void backward(const Var& root);

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  int coords_checked = 0;
  // worst offender, for diagnostics
  int worst_param = -1;
  int64_t worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool pass() const { return max_rel_err <= tolerance; }
  std::string summary() const;
};

// loss_fn must build a scalar graph over the given leaves (one per parameter
// tensor) and be deterministic. Up to max_coords coordinates are sampled
// across the concatenation of all parameters; for each, the analytic gradient
// from backward() is compared with (f(p+eps e_i) - f(p-eps e_i)) / 2 eps.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
// A non-finite loss at a perturbed point throws, identifying the coordinate.
GradCheckReport grad_check(
    const std::function<Var(const std::vector<Var>&)>& loss_fn,
    const std::vector<Tensor>& params, double epsilon, double tolerance,
    int max_coords, uint64_t seed);

// Single-tensor convenience form.
GradCheckReport grad_check(const std::function<Var(const Var&)>& loss_fn,
                           const Tensor& param, double epsilon,
                           double tolerance, int max_coords, uint64_t seed);

}  // namespace xmodal
