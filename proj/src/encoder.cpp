#include "slogan/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "slogan/error.hpp"

namespace slogan {

EncoderParams EncoderParams::init(std::size_t feature_dim, std::size_t hidden, Rng& rng) {
  EncoderParams p;
  p.layer1 = Linear::glorot(feature_dim, hidden, rng);
  p.layer2 = Linear::glorot(hidden, hidden, rng);
  return p;
}

void EncoderParams::register_in(ParamStore& store, const std::string& prefix) {
  layer1.register_in(store, prefix + ".layer1");
  layer2.register_in(store, prefix + ".layer2");
}

std::shared_ptr<const CsrMatrix> normalize_adjacency(const GraphBatch& batch) {
  const std::size_t n = batch.num_nodes();
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [u, v] : batch.edges) {
    if (u >= n || v >= n || u == v) throw DataError("normalize_adjacency: invalid batch edge");
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<real> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    adj[i].push_back(i);
    std::sort(adj[i].begin(), adj[i].end());
    inv_sqrt[i] = real(1) / std::sqrt(static_cast<real>(adj[i].size()));
  }
  auto op = std::make_shared<CsrMatrix>();
  op->rows = op->cols = n;
  op->row_ptr.reserve(n + 1);
  op->row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : adj[i]) {
      op->col_idx.push_back(j);
      op->values.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    op->row_ptr.push_back(op->col_idx.size());
  }
  return op;
}

GraphRepr encode(const GraphBatch& batch, const EncoderParams& params) {
  if (batch.feature_dim != params.feature_dim())
    throw ShapeError("encode: batch feature dim " + std::to_string(batch.feature_dim) + " but encoder expects " +
                     std::to_string(params.feature_dim()));
  auto a_hat = normalize_adjacency(batch);
  const Tensor x = batch.feature_tensor();
  // (Â X) W1 is cheaper than Â (X W1) because d <= h.
  Tensor h1 = relu(params.layer1.forward(spmm(a_hat, x)));
  Tensor h2 = relu(add(spmm(a_hat, matmul(h1, params.layer2.weight)), params.layer2.bias));
  return {segment_mean(h2, batch.membership, batch.num_graphs())};
}

Tensor head_logits(const Tensor& features, const Linear& head) {
  if (features.rank() != 2 || features.cols() != head.in_dim())
    throw ShapeError("classify: features " + shape_str(features.shape()) + " do not match head input " +
                     std::to_string(head.in_dim()));
  return head.forward(features);
}

Tensor classify(const Tensor& features, const Linear& head) { return softmax_rows(head_logits(features, head)); }

}  // namespace slogan
