#pragma once

#include "slogan/disentangler.hpp"
#include "slogan/encoder.hpp"
#include "slogan/intervenor.hpp"

namespace slogan {

/// All trainable pieces plus the optimizer state that goes with them.
///
/// Parameters are split across four stores because they are stepped under
/// different conditions: the backbone (encoder, causal head, classifier) on
/// every model step, the spurious head only when a term reaches it, the
/// generator only when the intervention term is active, and the critics by
/// their own fitting step.
struct SloganModel {
  EncoderParams encoder;
  ProjectionHeads heads;
  Linear classifier;  // causal features -> class logits
  GeneratorParams generator;
  CriticParams critic;
  DisentangleConfig dis_cfg;
  int num_classes = 0;

  ParamStore backbone;
  ParamStore spurious;
  ParamStore generator_store;
  ParamStore critic_store;

  static SloganModel init(std::size_t feature_dim, int num_classes, const DisentangleConfig& cfg, Rng& rng);

  // Deep copy: parameters and Adam state are duplicated, not shared.
  SloganModel clone() const;

  struct Output {
    DisentangledFeatures feats;
    Tensor logits;
  };
  Output forward(const GraphBatch& batch) const;

  // Concatenated parameter values of every store, in a fixed order.
  std::vector<real> flat_parameters() const;

 private:
  void rebind();
};

}  // namespace slogan
