#pragma once

#include <span>

#include "slogan/linear.hpp"
#include "slogan/rng.hpp"

namespace slogan {

inline constexpr std::size_t kCausalDim = 64;
inline constexpr std::size_t kSpuriousDim = 64;

struct DisentangleConfig {
  real beta = 0.5;
  std::size_t causal_dim = kCausalDim;
  std::size_t spurious_dim = kSpuriousDim;
};

// Two independent affine projections of the pooled representation.
struct ProjectionHeads {
  Linear causal;
  Linear spurious;

  static ProjectionHeads init(std::size_t repr_dim, const DisentangleConfig& cfg, Rng& rng);
};

struct DisentangledFeatures {
  Tensor z;
  Tensor z_c;
  Tensor z_s;

  std::size_t size() const { return z.rows(); }
  DisentangledFeatures detached() const { return {z.detach(), z_c.detach(), z_s.detach()}; }
  DisentangledFeatures rows(std::span<const std::size_t> idx) const;
  DisentangledFeatures concat(const DisentangledFeatures& other) const;
};

/// Estimator parameters. `w_causal` scores (z^c, y) pairs as z^c' W y,
/// `w_psi` scores (z^s, z) pairs as z^s' W z, and `variational` is the
/// logit head of q(y | z^s).
struct CriticParams {
  Tensor w_causal;  // causal_dim x C
  Tensor w_psi;     // spurious_dim x repr_dim
  Linear variational;

  static CriticParams init(const DisentangleConfig& cfg, std::size_t repr_dim, int num_classes, Rng& rng);
  int num_classes() const { return static_cast<int>(w_causal.cols()); }
  void register_in(ParamStore& store, const std::string& prefix = "critic");
  CriticParams detached() const { return {w_causal.detach(), w_psi.detach(), variational.detached()}; }
};

DisentangledFeatures split_features(const Tensor& z, const ProjectionHeads& heads);

/// Negated Donsker-Varadhan bound on I(z^c; y):
///   -( mean_i xi(z^c_i, y_i) - log mean_i exp xi(z^c_i, y_pi(i)) )
/// with pi an in-batch derangement drawn from `rng`. Minimizing it raises the bound.
Tensor infonce_causal_loss(const DisentangledFeatures& feats, std::span<const int> labels,
                           const CriticParams& critic, Rng& rng);

struct SpuriousTerms {
  Tensor label_mi;  // variational estimate of I(z^s; y)
  Tensor repr_mi;   // DV-form estimate of I(z^s; z)
  Tensor loss;      // label_mi - beta * repr_mi
};

SpuriousTerms vib_spurious_terms(const DisentangledFeatures& feats, std::span<const int> labels,
                                 const CriticParams& critic, const DisentangleConfig& cfg, Rng& rng);
Tensor vib_spurious_loss(const DisentangledFeatures& feats, std::span<const int> labels,
                         const CriticParams& critic, const DisentangleConfig& cfg, Rng& rng);

struct DisLoss {
  Tensor causal;    // L^c_MI
  Tensor spurious;  // L^s_MI
  Tensor total;     // L_dis
};

DisLoss dis_loss(const DisentangledFeatures& feats, std::span<const int> labels, const CriticParams& critic,
                 const DisentangleConfig& cfg, Rng& rng);

struct CriticFitStats {
  real causal_bound = 0;  // DV bound on I(z^c; y) before the step
  real repr_bound = 0;    // DV bound on I(z^s; z) before the step
  real q_cross_entropy = 0;
};

/// One Adam step on the estimators with features held constant: raises both
/// DV bounds w.r.t. w_causal / w_psi and fits q(y | z^s) by cross-entropy.
/// `store` must hold exactly the critic's parameters.
CriticFitStats critic_fit_step(const DisentangledFeatures& feats, std::span<const int> labels, CriticParams& critic,
                               ParamStore& store, real lr, Rng& rng);

/// Frobenius norm of the (1/B-normalized) cross-covariance between the
/// columns of z^c and z^s.
double covariance_diagnostic(const DisentangledFeatures& feats);

}  // namespace slogan
