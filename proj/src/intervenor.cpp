#include "slogan/intervenor.hpp"

#include "slogan/error.hpp"

namespace slogan {

GeneratorParams GeneratorParams::init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                                      Rng& rng) {
  return {Linear::glorot(input_dim, hidden_dim, rng), Linear::glorot(hidden_dim, output_dim, rng)};
}

void GeneratorParams::register_in(ParamStore& store, const std::string& prefix) {
  hidden.register_in(store, prefix + ".hidden");
  output.register_in(store, prefix + ".output");
}

Tensor generate(const Tensor& z_c, const Tensor& z_s, const GeneratorParams& g) {
  if (z_c.rank() != 2 || z_s.rank() != 2 || z_c.rows() != z_s.rows())
    throw ShapeError("generate: parts " + shape_str(z_c.shape()) + " and " + shape_str(z_s.shape()) +
                     " are not row-aligned");
  if (z_c.cols() + z_s.cols() != g.hidden.in_dim())
    throw ShapeError("generate: part widths " + std::to_string(z_c.cols()) + " + " + std::to_string(z_s.cols()) +
                     " do not match generator input " + std::to_string(g.hidden.in_dim()));
  return g.output.forward(relu(g.hidden.forward(concat_cols(z_c, z_s))));
}

Tensor reconstruction_loss(const DisentangledFeatures& feats, const GeneratorParams& g) {
  return mean_all(row_sq_dist(feats.z, generate(feats.z_c, feats.z_s, g)));
}

SwapPlan build_swap_plan(std::size_t n_source, std::size_t n_target, Rng& rng, bool symmetric) {
  if (n_source == 0 || n_target == 0)
    throw Error("build_swap_plan: empty batch (source " + std::to_string(n_source) + ", target " +
                std::to_string(n_target) + ")");
  SwapPlan plan;
  plan.pairs.reserve(n_source);
  for (std::size_t i = 0; i < n_source; ++i) plan.pairs.emplace_back(i, rng.below(n_target));
  if (symmetric) {
    for (std::size_t k = 0; k < n_target; ++k) plan.reverse_pairs.emplace_back(k, rng.below(n_source));
  }
  return plan;
}

namespace {

// mean over pairs (a, b) of ||G(z^c_a from `own`, z^s_b from `other`) - z_a||^2
Tensor swapped_term(const DisentangledFeatures& own, const DisentangledFeatures& other,
                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const GeneratorParams& g,
                    bool stop_gradient_target) {
  std::vector<std::size_t> own_idx, other_idx;
  for (auto [a, b] : pairs) {
    if (a >= own.size() || b >= other.size()) throw Error("invariance_loss: swap plan index outside batch");
    own_idx.push_back(a);
    other_idx.push_back(b);
  }
  const Tensor composite = generate(gather_rows(own.z_c, own_idx), gather_rows(other.z_s, other_idx), g);
  Tensor anchor = gather_rows(own.z, own_idx);
  if (stop_gradient_target) anchor = anchor.detach();
  return mean_all(row_sq_dist(composite, anchor));
}

}  // namespace

InvarianceLoss invariance_loss(const DisentangledFeatures& source, const DisentangledFeatures& target,
                               const SwapPlan& plan, const GeneratorParams& g, InterventionOptions opts) {
  if (plan.pairs.size() != source.size()) throw Error("invariance_loss: plan does not cover the source batch");
  const Tensor recon = reconstruction_loss(source.concat(target), g);
  Tensor intervention = swapped_term(source, target, plan.pairs, g, opts.stop_gradient_target);
  if (opts.symmetric) {
    if (plan.reverse_pairs.size() != target.size())
      throw Error("invariance_loss: symmetric mode needs a reverse plan covering the target batch");
    intervention = add(intervention, swapped_term(target, source, plan.reverse_pairs, g, opts.stop_gradient_target));
  }
  return {recon, intervention, add(recon, intervention)};
}

}  // namespace slogan
