#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "slogan/calibrator.hpp"
#include "slogan/disentangler.hpp"
#include "slogan/graph.hpp"
#include "slogan/param_store.hpp"
#include "slogan/rng.hpp"
#include "slogan/tensor.hpp"

namespace slogan::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(rng.uniform(lo, hi));
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Uniform values with magnitude at least `margin`, random sign.
inline Tensor away_from_zero(Shape shape, Rng& rng, double margin, bool requires_grad = false) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>((rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(margin, 1.0));
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline Graph random_graph(std::size_t n, double p, std::size_t d, Rng& rng, std::int64_t id = 0) {
  Graph g;
  g.node_count = n;
  g.feature_dim = d;
  g.id = id;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) g.edges.emplace_back(u, v);
  g.features.resize(n * d);
  for (auto& x : g.features) x = static_cast<real>(rng.normal());
  g.label = rng.bernoulli(0.5) ? 1 : 0;
  return g;
}

// Relabels node v as perm[v].
inline Graph permute_graph(const Graph& g, const std::vector<std::size_t>& perm) {
  Graph out = g;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (auto [u, v] : g.edges) {
    const std::size_t a = perm[u], b = perm[v];
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  out.edges.assign(edges.begin(), edges.end());
  for (std::size_t v = 0; v < g.node_count; ++v)
    std::copy_n(g.features.begin() + static_cast<std::ptrdiff_t>(v * g.feature_dim), g.feature_dim,
                out.features.begin() + static_cast<std::ptrdiff_t>(perm[v] * g.feature_dim));
  return out;
}

inline Dataset random_dataset(std::size_t count, std::size_t d, Rng& rng, int min_nodes = 3, int max_nodes = 12) {
  Dataset ds;
  ds.num_classes = 2;
  ds.feature_dim = d;
  for (std::size_t i = 0; i < count; ++i)
    ds.graphs.push_back(
        random_graph(static_cast<std::size_t>(rng.between(min_nodes, max_nodes)), 0.3, d, rng, static_cast<std::int64_t>(i)));
  return ds;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a.values()[i]) - double(b.values()[i])));
  return m;
}

struct MiToy {
  DisentangledFeatures feats;
  std::vector<int> labels;
};

// Balanced binary labels; z^c is one-hot(y) in its first two columns, z^s is
// standard normal noise drawn independently of y, z stacks both.
inline MiToy planted_mi_toy(std::size_t batch, Rng& rng) {
  MiToy toy;
  std::vector<real> zc(batch * kCausalDim, 0), zs(batch * kSpuriousDim);
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = static_cast<int>(i % 2);
    toy.labels.push_back(y);
    zc[i * kCausalDim + static_cast<std::size_t>(y)] = 1;
  }
  for (auto& v : zs) v = static_cast<real>(rng.normal());
  const Tensor c = Tensor::from({batch, kCausalDim}, zc);
  const Tensor s = Tensor::from({batch, kSpuriousDim}, zs);
  toy.feats = {concat_cols(c, s), c, s};
  return toy;
}

inline constexpr double kToyCriticLr = 0.05;

struct MiEstimates {
  double causal = 0;
  double spurious = 0;
  double spurious_held_out = 0;  // same critic, fresh draw of the toy
};

// Fits fresh critics on the toy and returns the positive causal bound and
// the spurious-label estimate, in sample and on an independent draw.
inline MiEstimates fit_mi_toy(const MiToy& toy, int steps, Rng& rng) {
  DisentangleConfig cfg;
  CriticParams critic = CriticParams::init(cfg, toy.feats.z.cols(), 2, rng);
  ParamStore store;
  critic.register_in(store);
  for (int s = 0; s < steps; ++s) critic_fit_step(toy.feats, toy.labels, critic, store, real(kToyCriticLr), rng);
  MiEstimates out;
  out.causal = -double(infonce_causal_loss(toy.feats, toy.labels, critic, rng).item());
  out.spurious = double(vib_spurious_terms(toy.feats, toy.labels, critic, cfg, rng).label_mi.item());
  const MiToy fresh = planted_mi_toy(toy.labels.size(), rng);
  out.spurious_held_out = double(vib_spurious_terms(fresh.feats, fresh.labels, critic, cfg, rng).label_mi.item());
  return out;
}

// Two-class pool: class-0 confidences evenly spaced over [0.90, 1.00], class-1
// confidences the same values scaled by 0.8.
inline std::vector<PredictionRecord> skewed_pool(std::size_t per_class = 11) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    const double s = 0.9 + 0.1 * double(i) / double(per_class - 1);
    const auto a = static_cast<real>(s), b = static_cast<real>(0.8 * s);
    out.push_back(make_record(std::int64_t(2 * i), 2 * i, {a, 1 - a}));
    out.push_back(make_record(std::int64_t(2 * i + 1), 2 * i + 1, {1 - b, b}));
  }
  return out;
}

inline std::vector<PredictionRecord> threshold_example_pool() {
  return {make_record(0, 0, {real(0.8), real(0.2)}), make_record(1, 1, {real(0.6), real(0.4)}),
          make_record(2, 2, {real(0.1), real(0.9)})};
}

}  // namespace slogan::test
