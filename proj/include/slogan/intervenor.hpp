#pragma once

#include <utility>
#include <vector>

#include "slogan/disentangler.hpp"

namespace slogan {

// G(z^c, z^s): two-layer perceptron on the concatenated parts.
struct GeneratorParams {
  Linear hidden;  // (causal + spurious) -> h, followed by ReLU
  Linear output;  // h -> repr

  static GeneratorParams init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng);
  void register_in(ParamStore& store, const std::string& prefix = "generator");
};

struct SwapPlan {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;          // (source i, target k)
  std::vector<std::pair<std::size_t, std::size_t>> reverse_pairs;  // (target k, source i); symmetric mode only
};

struct InterventionOptions {
  // Adds the target-causal + source-spurious recombination term.
  bool symmetric = false;
  // Treats the consistency target z_i as a constant.
  bool stop_gradient_target = false;
};

Tensor generate(const Tensor& z_c, const Tensor& z_s, const GeneratorParams& g);

// mean_i ||z_i - G(z^c_i, z^s_i)||^2
Tensor reconstruction_loss(const DisentangledFeatures& feats, const GeneratorParams& g);

// Every source index paired with an independently uniform target index.
SwapPlan build_swap_plan(std::size_t n_source, std::size_t n_target, Rng& rng, bool symmetric = false);

struct InvarianceLoss {
  Tensor reconstruction;  // L_re on the union of both batches
  Tensor intervention;    // mean over pairs of ||G(z^c_i, z^s_k) - z_i||^2
  Tensor total;           // L_inv
};

InvarianceLoss invariance_loss(const DisentangledFeatures& source, const DisentangledFeatures& target,
                               const SwapPlan& plan, const GeneratorParams& g, InterventionOptions opts = {});

}  // namespace slogan
