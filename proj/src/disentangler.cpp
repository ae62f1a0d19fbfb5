#include "slogan/disentangler.hpp"

#include <cmath>
#include <vector>

#include "slogan/error.hpp"

namespace slogan {

namespace {

void require_pairs(const DisentangledFeatures& feats, std::span<const int> labels, const char* op) {
  if (feats.size() < 2) throw Error(std::string(op) + ": batch of " + std::to_string(feats.size()) +
                                    " has no negative pairs (need >= 2)");
  if (labels.size() != feats.size())
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(feats.size()));
}

std::vector<int> permute(std::span<const int> labels, const std::vector<std::size_t>& perm) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = labels[perm[i]];
  return out;
}

// DV-form bound mean(joint) - log mean exp(marginal) on scalar critic columns.
Tensor dv_bound(const Tensor& joint, const Tensor& marginal) { return sub(mean_all(joint), log_mean_exp(marginal)); }

Tensor causal_bound(const DisentangledFeatures& feats, std::span<const int> labels, const Tensor& w_causal,
                    Rng& rng) {
  const auto perm = rng.derangement(feats.size());
  const auto shuffled = permute(labels, perm);
  const Tensor scores = matmul(feats.z_c, w_causal);  // xi for every class
  return dv_bound(pick_cols(scores, labels), pick_cols(scores, shuffled));
}

Tensor repr_bound(const DisentangledFeatures& feats, const Tensor& w_psi, Rng& rng) {
  const auto perm = rng.derangement(feats.size());
  const Tensor projected = matmul(feats.z_s, w_psi);
  const Tensor joint = sum(mul(projected, feats.z), 1);
  const Tensor marginal = sum(mul(projected, gather_rows(feats.z, perm)), 1);
  return dv_bound(joint, marginal);
}

}  // namespace

ProjectionHeads ProjectionHeads::init(std::size_t repr_dim, const DisentangleConfig& cfg, Rng& rng) {
  if (cfg.causal_dim + cfg.spurious_dim > repr_dim)
    throw ConfigError("causal_dim + spurious_dim exceeds representation width " + std::to_string(repr_dim));
  return {Linear::glorot(repr_dim, cfg.causal_dim, rng), Linear::glorot(repr_dim, cfg.spurious_dim, rng)};
}

DisentangledFeatures DisentangledFeatures::rows(std::span<const std::size_t> idx) const {
  return {gather_rows(z, idx), gather_rows(z_c, idx), gather_rows(z_s, idx)};
}

DisentangledFeatures DisentangledFeatures::concat(const DisentangledFeatures& other) const {
  return {concat_rows(z, other.z), concat_rows(z_c, other.z_c), concat_rows(z_s, other.z_s)};
}

CriticParams CriticParams::init(const DisentangleConfig& cfg, std::size_t repr_dim, int num_classes, Rng&) {
  if (num_classes < 2) throw ConfigError("critic: need at least 2 classes, got " + std::to_string(num_classes));
  const auto c = static_cast<std::size_t>(num_classes);
  // Estimators start at the zero-information point: every bound is exactly 0
  // and q(y | z^s) is uniform until the first fit step.
  return {Tensor::zeros({cfg.causal_dim, c}), Tensor::zeros({cfg.spurious_dim, repr_dim}),
          Linear::zeros(cfg.spurious_dim, c)};
}

void CriticParams::register_in(ParamStore& store, const std::string& prefix) {
  w_causal = store.add(prefix + ".w_causal", w_causal);
  w_psi = store.add(prefix + ".w_psi", w_psi);
  variational.register_in(store, prefix + ".variational");
}

DisentangledFeatures split_features(const Tensor& z, const ProjectionHeads& heads) {
  if (z.rank() != 2 || z.cols() != heads.causal.in_dim() || z.cols() != heads.spurious.in_dim())
    throw ShapeError("split_features: representation " + shape_str(z.shape()) + " does not match head width " +
                     std::to_string(heads.causal.in_dim()));
  return {z, heads.causal.forward(z), heads.spurious.forward(z)};
}

Tensor infonce_causal_loss(const DisentangledFeatures& feats, std::span<const int> labels,
                           const CriticParams& critic, Rng& rng) {
  require_pairs(feats, labels, "infonce_causal_loss");
  return scale(causal_bound(feats, labels, critic.w_causal, rng), real(-1));
}

SpuriousTerms vib_spurious_terms(const DisentangledFeatures& feats, std::span<const int> labels,
                                 const CriticParams& critic, const DisentangleConfig& cfg, Rng& rng) {
  require_pairs(feats, labels, "vib_spurious_loss");
  const auto perm = rng.derangement(feats.size());
  const auto shuffled = permute(labels, perm);
  const Tensor log_q = log_softmax_rows(critic.variational.forward(feats.z_s));
  Tensor label_mi = sub(mean_all(pick_cols(log_q, labels)), mean_all(pick_cols(log_q, shuffled)));
  Tensor repr_mi = repr_bound(feats, critic.w_psi, rng);
  Tensor loss = sub(label_mi, scale(repr_mi, cfg.beta));
  return {label_mi, repr_mi, loss};
}

Tensor vib_spurious_loss(const DisentangledFeatures& feats, std::span<const int> labels,
                         const CriticParams& critic, const DisentangleConfig& cfg, Rng& rng) {
  return vib_spurious_terms(feats, labels, critic, cfg, rng).loss;
}

DisLoss dis_loss(const DisentangledFeatures& feats, std::span<const int> labels, const CriticParams& critic,
                 const DisentangleConfig& cfg, Rng& rng) {
  Tensor causal = infonce_causal_loss(feats, labels, critic, rng);
  Tensor spurious = vib_spurious_loss(feats, labels, critic, cfg, rng);
  return {causal, spurious, add(causal, spurious)};
}

CriticFitStats critic_fit_step(const DisentangledFeatures& feats, std::span<const int> labels, CriticParams& critic,
                               ParamStore& store, real lr, Rng& rng) {
  require_pairs(feats, labels, "critic_fit_step");
  const DisentangledFeatures fixed = feats.detached();
  const Tensor causal = causal_bound(fixed, labels, critic.w_causal, rng);
  const Tensor repr = repr_bound(fixed, critic.w_psi, rng);
  const Tensor ce = mean_all(nll_log_softmax(critic.variational.forward(fixed.z_s), labels));
  const Tensor objective = add(sub(ce, causal), scale(repr, real(-1)));
  objective.backward();
  store.adam_step(lr);
  return {causal.item(), repr.item(), ce.item()};
}

double covariance_diagnostic(const DisentangledFeatures& feats) {
  const std::size_t b = feats.size();
  if (b < 2) throw Error("covariance_diagnostic: batch of " + std::to_string(b) + " (need >= 2)");
  const std::size_t nc = feats.z_c.cols(), ns = feats.z_s.cols();
  const auto zc = feats.z_c.values();
  const auto zs = feats.z_s.values();
  std::vector<double> mc(nc, 0.0), ms(ns, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < nc; ++j) mc[j] += zc[i * nc + j];
    for (std::size_t k = 0; k < ns; ++k) ms[k] += zs[i * ns + k];
  }
  for (auto& v : mc) v /= static_cast<double>(b);
  for (auto& v : ms) v /= static_cast<double>(b);
  std::vector<double> cov(nc * ns, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      const double dc = zc[i * nc + j] - mc[j];
      for (std::size_t k = 0; k < ns; ++k) cov[j * ns + k] += dc * (zs[i * ns + k] - ms[k]);
    }
  double fro = 0.0;
  for (double c : cov) fro += (c / static_cast<double>(b)) * (c / static_cast<double>(b));
  return std::sqrt(fro);
}

}  // namespace slogan
