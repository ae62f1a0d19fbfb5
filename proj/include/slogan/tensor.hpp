#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace slogan {

#ifdef SLOGAN_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> values;
  std::vector<real> grad;  // empty == not populated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense row-major array taking part in a reverse-mode differentiation graph.
///
/// A Tensor is a cheap handle: copies share the same storage, so a parameter
/// held by a model struct and by a ParamStore is the same object. Results of
/// operations record their parents only when at least one input requires a
/// gradient and gradient recording is enabled (see NoGradGuard).
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<real> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const real> values() const;
  // Direct mutation bypasses the graph; used by optimizers and gradient checks.
  std::span<real> mutable_values();
  real at(std::size_t r, std::size_t c) const;
  real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const real> grad() const;
  void clear_grad();

  // Same values, no history, no gradient requirement.
  Tensor detach() const;
  // Deep copy of values that keeps requires_grad.
  Tensor clone() const;

  // Reverse-mode accumulation from this scalar root into every ancestor that
  // requires a gradient. Repeated calls accumulate.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Constant sparse operator in CSR form, applied on the left of a dense
/// matrix. Never differentiated itself.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // rows + 1 entries
  std::vector<std::size_t> col_idx;
  std::vector<real> values;

  std::size_t nnz() const { return values.size(); }
  real coeff(std::size_t r, std::size_t c) const;
};

// ---- operations ------------------------------------------------------------
//
// Elementwise binary ops accept either identical shapes or a right operand
// whose shape equals the left shape with the leading dimension dropped or set
// to 1 (bias rows, per-sample broadcast over a leading batch dimension).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real factor);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
// Rejects non-positive entries; clamp probabilities first.
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, real lo, real hi);

// Rank-2 reductions. axis 0 -> shape (1, cols), axis 1 -> shape (rows, 1).
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);
// Reductions over all entries -> shape (1, 1).
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// log(mean(exp(a))) over all entries, max-shifted.
Tensor log_mean_exp(const Tensor& a);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
Tensor concat_rows(const Tensor& a, const Tensor& b);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
// (rows, 1): squared L2 distance between matching rows of a and b.
Tensor row_sq_dist(const Tensor& a, const Tensor& b);
// (rows, 1): -log softmax(logits)[r, labels[r]].
Tensor nll_log_softmax(const Tensor& logits, std::span<const int> labels);
// (rows, 1): a[r, cols[r]].
Tensor pick_cols(const Tensor& a, std::span<const int> cols);

// Sparse-dense product op * a for a constant operator.
Tensor spmm(std::shared_ptr<const CsrMatrix> op, const Tensor& a);
// (segments, cols): mean of the rows of `a` assigned to each segment.
Tensor segment_mean(const Tensor& a, std::span<const std::size_t> membership,
                    std::size_t segments);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(real s, const Tensor& a) { return scale(a, s); }

}  // namespace slogan
