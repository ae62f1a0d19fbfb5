#include "slogan/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "slogan/error.hpp"

namespace slogan {

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<real>& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.values.size(), real(0));
  return n.grad;
}

Tensor make_result(Shape shape, std::vector<real> values, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor operand");
}

void require_rank2(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

// Period of the right operand when broadcast against the left one.
std::size_t broadcast_period(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return a.numel();
  if (!sa.empty()) {
    Shape tail(sa.begin() + 1, sa.end());
    Shape unit_lead = sa;
    unit_lead[0] = 1;
    if (sb == tail || sb == unit_lead) return shape_numel(tail);
  }
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
}

std::size_t check_labels(std::span<const int> labels, std::size_t rows, std::size_t cols,
                         const char* op) {
  if (labels.size() != rows)
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(rows) + " rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cols)
      throw ShapeError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                       std::to_string(cols) + ")");
  }
  return rows;
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::from(Shape shape, std::vector<real> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0, requires_grad); }

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<real>(n, value), requires_grad);
}

Tensor Tensor::scalar(real value, bool requires_grad) { return from({1, 1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor of shape " + shape_str(shape()) + " is not rank 2");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor of shape " + shape_str(shape()) + " is not rank 2");
  return node_->shape[1];
}

std::span<const real> Tensor::values() const { return node_->values; }
std::span<real> Tensor::mutable_values() { return node_->values; }

real Tensor::at(std::size_t r, std::size_t c) const { return node_->values[r * cols() + c]; }

real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item(): tensor of shape " + shape_str(shape()) + " is not scalar");
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const real> Tensor::grad() const { return node_->grad; }
void Tensor::clear_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->values, false); }

Tensor Tensor::clone() const { return from(shape(), node_->values, requires_grad()); }

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1)
    throw ShapeError("backward: root must be scalar, got shape " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior nodes get fresh buffers per pass; leaves keep accumulating.
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->values.size(), real(0));
  }
  grad_buffer(*node_)[0] += real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  // Interior gradients are scratch space.
  for (Node* n : order) {
    if (n->backward) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

real CsrMatrix::coeff(std::size_t r, std::size_t c) const {
  for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
    if (col_idx[k] == c) return values[k];
  }
  return 0;
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<real> out(m * n);
  Eigen::Map<const RowMat> A(a.values().data(), m, k);
  Eigen::Map<const RowMat> B(b.values().data(), k, n);
  Eigen::Map<RowMat> C(out.data(), m, n);
  C.noalias() = A * B;
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Eigen::Map<const RowMat> G(self.grad.data(), m, n);
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Eigen::Map<RowMat> GA(grad_buffer(pa).data(), m, k);
      Eigen::Map<const RowMat> B(pb.values.data(), k, n);
      GA.noalias() += G * B.transpose();
    }
    if (pb.requires_grad) {
      Eigen::Map<RowMat> GB(grad_buffer(pb).data(), k, n);
      Eigen::Map<const RowMat> A(pa.values.data(), m, k);
      GB.noalias() += A.transpose() * G;
    }
  });
}

Tensor spmm(std::shared_ptr<const CsrMatrix> op, const Tensor& a) {
  require_rank2(a, "spmm");
  if (!op || op->cols != a.rows())
    throw ShapeError("spmm: operator with " + std::to_string(op ? op->cols : 0) +
                     " columns applied to " + shape_str(a.shape()));
  const std::size_t n = a.cols();
  std::vector<real> out(op->rows * n, real(0));
  const auto av = a.values();
  for (std::size_t r = 0; r < op->rows; ++r) {
    real* dst = out.data() + r * n;
    for (std::size_t k = op->row_ptr[r]; k < op->row_ptr[r + 1]; ++k) {
      const real w = op->values[k];
      const real* src = av.data() + op->col_idx[k] * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += w * src[j];
    }
  }
  return make_result({op->rows, n}, std::move(out), {a.node()}, [op, n](Node& self) {
    auto& ga = grad_buffer(*self.parents[0]);
    for (std::size_t r = 0; r < op->rows; ++r) {
      const real* g = self.grad.data() + r * n;
      for (std::size_t k = op->row_ptr[r]; k < op->row_ptr[r + 1]; ++k) {
        const real w = op->values[k];
        real* dst = ga.data() + op->col_idx[k] * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += w * g[j];
      }
    }
  });
}

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t period = broadcast_period(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % period];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [period](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t period = broadcast_period(a, b, "sub");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i % period];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [period](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t period = broadcast_period(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % period];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [period](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.values[i % period];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i] * pa.values[i];
    }
  });
}

Tensor scale(const Tensor& a, real factor) {
  require_defined(a, "scale");
  std::vector<real> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a.node()}, [factor](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  std::vector<real> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = v > 0 ? v : real(0);
  return make_result(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = grad_buffer(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (p.values[i] > 0) g[i] += self.grad[i];
    }
  });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  std::vector<real> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = std::exp(v);
  return make_result(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.values[i];
  });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  std::vector<real> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0))
      throw Error("log: non-positive input " + std::to_string(out[i]) + " at index " +
                  std::to_string(i) + "; clamp to [1e-12, 1] first");
    out[i] = std::log(out[i]);
  }
  return make_result(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = grad_buffer(p);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / p.values[i];
  });
}

Tensor clamp(const Tensor& a, real lo, real hi) {
  require_defined(a, "clamp");
  std::vector<real> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return make_result(a.shape(), std::move(out), {a.node()}, [lo, hi](Node& self) {
    Node& p = *self.parents[0];
    auto& g = grad_buffer(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (p.values[i] >= lo && p.values[i] <= hi) g[i] += self.grad[i];
    }
  });
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& a, int axis) {
  require_rank2(a, "sum");
  const std::size_t m = a.rows(), n = a.cols();
  const auto av = a.values();
  if (axis == 0) {
    std::vector<real> out(n, real(0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
    return make_result({1, n}, std::move(out), {a.node()}, [m, n](Node& self) {
      auto& g = grad_buffer(*self.parents[0]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j];
    });
  }
  if (axis == 1) {
    std::vector<real> out(m, real(0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
    return make_result({m, 1}, std::move(out), {a.node()}, [m, n](Node& self) {
      auto& g = grad_buffer(*self.parents[0]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
    });
  }
  throw ShapeError("sum: axis must be 0 or 1, got " + std::to_string(axis));
}

Tensor mean(const Tensor& a, int axis) {
  require_rank2(a, "mean");
  const std::size_t count = axis == 0 ? a.rows() : a.cols();
  if (count == 0) throw ShapeError("mean: empty axis in " + shape_str(a.shape()));
  return scale(sum(a, axis), real(1) / static_cast<real>(count));
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  real total = 0;
  for (real v : a.values()) total += v;
  return make_result({1, 1}, {total}, {a.node()}, [](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  require_defined(a, "mean_all");
  if (a.numel() == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), real(1) / static_cast<real>(a.numel()));
}

Tensor log_mean_exp(const Tensor& a) {
  require_defined(a, "log_mean_exp");
  const auto av = a.values();
  if (av.empty()) throw ShapeError("log_mean_exp: empty tensor");
  const real mx = *std::max_element(av.begin(), av.end());
  real acc = 0;
  for (real v : av) acc += std::exp(v - mx);
  const real n = static_cast<real>(av.size());
  const real out = mx + std::log(acc / n);
  return make_result({1, 1}, {out}, {a.node()}, [n](Node& self) {
    Node& p = *self.parents[0];
    auto& g = grad_buffer(p);
    const real lme = self.values[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * std::exp(p.values[i] - lme) / n;
  });
}

// ---- structural ----------------------------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.rows(), na = a.cols(), nb = b.cols(), n = na + nb;
  std::vector<real> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.values().data() + i * na, na, out.data() + i * n);
    std::copy_n(b.values().data() + i * nb, nb, out.data() + i * n + na);
  }
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, na, nb, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_buffer(pa);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) g[i * na + j] += self.grad[i * n + j];
    }
    if (pb.requires_grad) {
      auto& g = grad_buffer(pb);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) g[i * nb + j] += self.grad[i * n + na + j];
    }
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_rows");
  require_rank2(b, "concat_rows");
  if (a.cols() != b.cols())
    throw ShapeError("concat_rows: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<real> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t split = a.numel();
  return make_result({a.rows() + b.rows(), a.cols()}, std::move(out), {a.node(), b.node()},
                     [split](Node& self) {
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& g = grad_buffer(pa);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = grad_buffer(pb);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[split + i];
                       }
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<real> out(m * w);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(a.values().data() + i * n + begin, w, out.data() + i * w);
  return make_result({m, w}, std::move(out), {a.node()}, [m, n, w, begin](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank2(a, "gather_rows");
  const std::size_t n = a.cols();
  for (auto r : rows) {
    if (r >= a.rows())
      throw ShapeError("gather_rows: row " + std::to_string(r) + " outside " + shape_str(a.shape()));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t m = idx.size();
  std::vector<real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.values().data() + idx[i] * n, n, out.data() + i * n);
  return make_result({m, n}, std::move(out), {a.node()}, [idx = std::move(idx), n](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += self.grad[i * n + j];
  });
}

Tensor segment_mean(const Tensor& a, std::span<const std::size_t> membership, std::size_t segments) {
  require_rank2(a, "segment_mean");
  if (membership.size() != a.rows())
    throw ShapeError("segment_mean: " + std::to_string(membership.size()) + " memberships for " +
                     shape_str(a.shape()));
  const std::size_t n = a.cols();
  std::vector<real> counts(segments, real(0));
  for (auto s : membership) {
    if (s >= segments) throw ShapeError("segment_mean: segment " + std::to_string(s) + " out of range");
    counts[s] += 1;
  }
  for (std::size_t s = 0; s < segments; ++s) {
    if (counts[s] == 0) throw ShapeError("segment_mean: segment " + std::to_string(s) + " is empty");
  }
  std::vector<real> out(segments * n, real(0));
  const auto av = a.values();
  for (std::size_t i = 0; i < membership.size(); ++i) {
    real* dst = out.data() + membership[i] * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += av[i * n + j];
  }
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t j = 0; j < n; ++j) out[s * n + j] /= counts[s];
  std::vector<std::size_t> member(membership.begin(), membership.end());
  return make_result({segments, n}, std::move(out), {a.node()},
                     [member = std::move(member), counts = std::move(counts), n](Node& self) {
                       auto& g = grad_buffer(*self.parents[0]);
                       for (std::size_t i = 0; i < member.size(); ++i) {
                         const real* src = self.grad.data() + member[i] * n;
                         const real inv = real(1) / counts[member[i]];
                         for (std::size_t j = 0; j < n; ++j) g[i * n + j] += src[j] * inv;
                       }
                     });
}

// ---- softmax family ----------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  require_rank2(a, "softmax_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<real> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < m; ++i) {
    real* row = out.data() + i * n;
    const real mx = *std::max_element(row, row + n);
    real total = 0;
    for (std::size_t j = 0; j < n; ++j) total += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return make_result({m, n}, std::move(out), {a.node()}, [m, n](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const real* s = self.values.data() + i * n;
      const real* go = self.grad.data() + i * n;
      real dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += go[j] * s[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += s[j] * (go[j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  require_rank2(a, "log_softmax_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<real> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < m; ++i) {
    real* row = out.data() + i * n;
    const real mx = *std::max_element(row, row + n);
    real total = 0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(row[j] - mx);
    const real lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) row[j] -= lse;
  }
  return make_result({m, n}, std::move(out), {a.node()}, [m, n](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const real* ls = self.values.data() + i * n;
      const real* go = self.grad.data() + i * n;
      real total = 0;
      for (std::size_t j = 0; j < n; ++j) total += go[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += go[j] - std::exp(ls[j]) * total;
    }
  });
}

Tensor row_sq_dist(const Tensor& a, const Tensor& b) {
  require_rank2(a, "row_sq_dist");
  require_rank2(b, "row_sq_dist");
  if (a.shape() != b.shape())
    throw ShapeError("row_sq_dist: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<real> out(m, real(0));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const real d = av[i * n + j] - bv[i * n + j];
      out[i] += d * d;
    }
  return make_result({m, 1}, std::move(out), {a.node(), b.node()}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      const real go = self.grad[i];
      for (std::size_t j = 0; j < n; ++j) {
        const real d = 2 * go * (pa.values[i * n + j] - pb.values[i * n + j]);
        if (pa.requires_grad) grad_buffer(pa)[i * n + j] += d;
        if (pb.requires_grad) grad_buffer(pb)[i * n + j] -= d;
      }
    }
  });
}

Tensor nll_log_softmax(const Tensor& logits, std::span<const int> labels) {
  require_rank2(logits, "nll_log_softmax");
  const std::size_t m = logits.rows(), n = logits.cols();
  check_labels(labels, m, n, "nll_log_softmax");
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<real> probs(m * n);
  std::vector<real> out(m);
  const auto lv = logits.values();
  for (std::size_t i = 0; i < m; ++i) {
    const real* row = lv.data() + i * n;
    const real mx = *std::max_element(row, row + n);
    real total = 0;
    for (std::size_t j = 0; j < n; ++j) total += (probs[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= total;
    out[i] = mx + std::log(total) - row[y[i]];
  }
  return make_result({m, 1}, std::move(out), {logits.node()},
                     [m, n, y = std::move(y), probs = std::move(probs)](Node& self) {
                       auto& g = grad_buffer(*self.parents[0]);
                       for (std::size_t i = 0; i < m; ++i) {
                         const real go = self.grad[i];
                         for (std::size_t j = 0; j < n; ++j) g[i * n + j] += go * probs[i * n + j];
                         g[i * n + y[i]] -= go;
                       }
                     });
}

Tensor pick_cols(const Tensor& a, std::span<const int> cols) {
  require_rank2(a, "pick_cols");
  const std::size_t m = a.rows(), n = a.cols();
  check_labels(cols, m, n, "pick_cols");
  std::vector<int> c(cols.begin(), cols.end());
  std::vector<real> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = a.values()[i * n + c[i]];
  return make_result({m, 1}, std::move(out), {a.node()}, [n, c = std::move(c)](Node& self) {
    auto& g = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < c.size(); ++i) g[i * n + c[i]] += self.grad[i];
  });
}

}  // namespace slogan
