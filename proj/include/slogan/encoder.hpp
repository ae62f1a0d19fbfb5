#pragma once

#include <memory>

#include "slogan/graph.hpp"
#include "slogan/linear.hpp"

namespace slogan {

inline constexpr std::size_t kHiddenDim = 128;

// Two GCN layers: H1 = ReLU(Â X W1 + b1), H2 = ReLU(Â H1 W2 + b2).
struct EncoderParams {
  Linear layer1;  // d -> h
  Linear layer2;  // h -> h

  static EncoderParams init(std::size_t feature_dim, std::size_t hidden, Rng& rng);
  std::size_t feature_dim() const { return layer1.in_dim(); }
  std::size_t hidden_dim() const { return layer2.out_dim(); }
  void register_in(ParamStore& store, const std::string& prefix = "encoder");
};

struct GraphRepr {
  Tensor z;  // graphs x hidden
};

/// D̃^{-1/2}(A + I)D̃^{-1/2} over the whole batch, block diagonal by construction.
std::shared_ptr<const CsrMatrix> normalize_adjacency(const GraphBatch& batch);

/// Node-level pass followed by a mean readout per graph.
GraphRepr encode(const GraphBatch& batch, const EncoderParams& params);

// Row-wise logits / probabilities of a linear head.
Tensor head_logits(const Tensor& features, const Linear& head);
Tensor classify(const Tensor& features, const Linear& head);

}  // namespace slogan
