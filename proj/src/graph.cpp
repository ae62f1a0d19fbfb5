#include "slogan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "slogan/error.hpp"

namespace slogan {

const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

double Graph::density() const {
  if (node_count < 2) return 0.0;
  const double v = static_cast<double>(node_count);
  return 2.0 * static_cast<double>(edges.size()) / (v * (v - 1.0));
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(node_count, 0);
  for (auto [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

void Graph::validate() const {
  const std::string who = "graph " + std::to_string(id);
  if (node_count == 0) throw DataError(who + ": no nodes");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto [u, v] : edges) {
    if (u >= node_count || v >= node_count)
      throw DataError(who + ": edge (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") outside node range");
    if (u == v) throw DataError(who + ": self-loop on node " + std::to_string(u));
    if (u > v) throw DataError(who + ": edge not stored as (low, high)");
    if (!seen.insert({u, v}).second) throw DataError(who + ": duplicate edge");
  }
  if (features.size() != node_count * feature_dim)
    throw DataError(who + ": feature matrix has " + std::to_string(features.size()) + " values, expected " +
                    std::to_string(node_count * feature_dim));
  for (real f : features) {
    if (!std::isfinite(static_cast<double>(f))) throw DataError(who + ": non-finite node feature");
  }
}

bool Dataset::labeled() const {
  return std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.label.has_value(); });
}

void Dataset::validate() const {
  for (const auto& g : graphs) {
    g.validate();
    if (g.feature_dim != feature_dim)
      throw DataError("graph " + std::to_string(g.id) + ": feature dim " + std::to_string(g.feature_dim) +
                      " differs from dataset dim " + std::to_string(feature_dim));
    if (g.label && (*g.label < 0 || *g.label >= num_classes))
      throw DataError("graph " + std::to_string(g.id) + ": label " + std::to_string(*g.label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
  }
}

Dataset Dataset::with_domain(Domain d) const {
  Dataset out = *this;
  for (auto& g : out.graphs) g.domain = d;
  return out;
}

Tensor GraphBatch::feature_tensor() const { return Tensor::from({num_nodes(), feature_dim}, features); }

std::vector<int> GraphBatch::require_labels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw DataError("graph " + std::to_string(ids[i]) + " has no label");
    out.push_back(*labels[i]);
  }
  return out;
}

namespace {

template <typename GetGraph>
GraphBatch build_batch(std::size_t count, GetGraph&& get) {
  if (count == 0) throw DataError("make_batch: empty graph list");
  GraphBatch b;
  b.feature_dim = get(0).feature_dim;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Graph& g = get(i);
    if (g.feature_dim != b.feature_dim)
      throw DataError("make_batch: graph " + std::to_string(g.id) + " has feature dim " +
                      std::to_string(g.feature_dim) + ", expected " + std::to_string(b.feature_dim));
    b.offsets.push_back(offset);
    b.graph_sizes.push_back(g.node_count);
    for (auto [u, v] : g.edges) b.edges.emplace_back(u + offset, v + offset);
    b.features.insert(b.features.end(), g.features.begin(), g.features.end());
    b.labels.push_back(g.label);
    b.domains.push_back(g.domain);
    b.ids.push_back(g.id);
    b.membership.insert(b.membership.end(), g.node_count, i);
    offset += g.node_count;
  }
  return b;
}

}  // namespace

GraphBatch make_batch(std::span<const Graph> graphs) {
  return build_batch(graphs.size(), [&](std::size_t i) -> const Graph& { return graphs[i]; });
}

GraphBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  for (auto i : indices) {
    if (i >= ds.size()) throw DataError("make_batch: index " + std::to_string(i) + " outside dataset");
  }
  return build_batch(indices.size(), [&](std::size_t i) -> const Graph& { return ds.graphs[indices[i]]; });
}

std::vector<Dataset> density_split(const Dataset& ds, int parts) {
  if (parts < 2) throw DataError("density_split: parts must be >= 2, got " + std::to_string(parts));
  if (static_cast<std::size_t>(parts) > ds.size())
    throw DataError("density_split: " + std::to_string(parts) + " parts for " + std::to_string(ds.size()) +
                    " graphs");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> density(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) density[i] = ds.graphs[i].density();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (density[a] != density[b]) return density[a] < density[b];
    return ds.graphs[a].id < ds.graphs[b].id;
  });
  const std::size_t k = static_cast<std::size_t>(parts);
  const std::size_t base = ds.size() / k;
  const std::size_t extra = ds.size() % k;
  std::vector<Dataset> out;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    Dataset chunk;
    chunk.num_classes = ds.num_classes;
    chunk.feature_dim = ds.feature_dim;
    const std::size_t len = base + (c < extra ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) chunk.graphs.push_back(ds.graphs[order[pos++]]);
    out.push_back(std::move(chunk));
  }
  return out;
}

}  // namespace slogan
