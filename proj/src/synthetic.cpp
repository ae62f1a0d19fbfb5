#include "slogan/synthetic.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "slogan/error.hpp"

namespace slogan {

void SynthConfig::validate() const {
  if (n_per_domain < 1) throw ConfigError("n_per_domain: must be >= 1");
  if (min_nodes < 6 || max_nodes > 20 || min_nodes > max_nodes)
    throw ConfigError("node counts: need 6 <= min_nodes <= max_nodes <= 20, got [" + std::to_string(min_nodes) +
                      ", " + std::to_string(max_nodes) + "]");
  if (!(rho_s >= 0.5 && rho_s <= 1.0)) throw ConfigError("rho_s: must lie in [0.5, 1], got " + std::to_string(rho_s));
  if (!(label_balance > 0.0 && label_balance < 1.0))
    throw ConfigError("label_balance: must lie in (0, 1), got " + std::to_string(label_balance));
  if (!(membership_noise >= 0.0)) throw ConfigError("membership_noise: must be >= 0");
  for (double p : {source_edge_prob, target_edge_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("edge probability: must lie in [0, 1]");
  }
}

namespace {

Graph make_graph(const SynthConfig& cfg, Domain domain, std::int64_t id, Rng& rng) {
  Graph g;
  g.id = id;
  g.domain = domain;
  const int label = rng.bernoulli(cfg.label_balance) ? 1 : 0;
  g.label = label;
  g.node_count = static_cast<std::size_t>(rng.between(cfg.min_nodes, cfg.max_nodes));

  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto connect = [&](std::size_t u, std::size_t v) {
    if (u == v) return;
    edges.insert({std::min(u, v), std::max(u, v)});
  };
  if (label == 1) {
    for (std::size_t v = 0; v < kMotifSize; ++v) connect(v, (v + 1) % kMotifSize);
  } else {
    for (std::size_t v = 1; v < kMotifSize; ++v) connect(0, v);
  }
  for (std::size_t v = kMotifSize; v < g.node_count; ++v) connect(v, rng.below(v));
  const double p = domain == Domain::source ? cfg.source_edge_prob : cfg.target_edge_prob;
  for (std::size_t u = 0; u < g.node_count; ++u)
    for (std::size_t v = u + 1; v < g.node_count; ++v)
      if (rng.bernoulli(p)) connect(u, v);
  g.edges.assign(edges.begin(), edges.end());

  const bool agrees = rng.bernoulli(cfg.rho_s);
  const int spurious = domain == Domain::source ? (agrees ? label : 1 - label) : (agrees ? 1 - label : label);

  g.feature_dim = kSynthFeatureDim;
  g.features.assign(g.node_count * kSynthFeatureDim, real(0));
  const auto deg = g.degrees();
  for (std::size_t v = 0; v < g.node_count; ++v) {
    real* row = g.features.data() + v * kSynthFeatureDim;
    row[0] = static_cast<real>(std::min(1.0, static_cast<double>(deg[v]) / 10.0));
    row[1] = static_cast<real>((label == 1 && v < kMotifSize ? 1.0 : 0.0) + cfg.membership_noise * rng.normal());
    row[2] = static_cast<real>(spurious);
    row[3] = static_cast<real>(rng.normal());
  }
  return g;
}

}  // namespace

std::pair<Dataset, Dataset> gen_synthetic_biased(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  Dataset source, target;
  for (Dataset* ds : {&source, &target}) {
    ds->num_classes = 2;
    ds->feature_dim = kSynthFeatureDim;
  }
  for (std::size_t i = 0; i < cfg.n_per_domain; ++i)
    source.graphs.push_back(make_graph(cfg, Domain::source, static_cast<std::int64_t>(i), rng));
  for (std::size_t i = 0; i < cfg.n_per_domain; ++i)
    target.graphs.push_back(make_graph(cfg, Domain::target, static_cast<std::int64_t>(i), rng));
  return {std::move(source), std::move(target)};
}

Graph gen_scaling_graph(std::size_t nodes, double avg_degree, std::size_t feature_dim, Rng& rng) {
  Graph g;
  g.node_count = nodes;
  g.feature_dim = feature_dim;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 1; v < nodes; ++v) edges.insert({rng.below(v), v});
  const std::size_t max_edges = nodes * (nodes - 1) / 2;
  const auto target_edges =
      std::min(max_edges, static_cast<std::size_t>(avg_degree * static_cast<double>(nodes) / 2.0));
  while (nodes > 1 && edges.size() < target_edges) {
    std::size_t u = rng.below(nodes), v = rng.below(nodes);
    if (u == v) continue;
    edges.insert({std::min(u, v), std::max(u, v)});
  }
  g.edges.assign(edges.begin(), edges.end());
  g.features.resize(nodes * feature_dim);
  for (auto& f : g.features) f = static_cast<real>(rng.normal());
  g.label = 0;
  return g;
}

}  // namespace slogan
