#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slogan/tensor.hpp"

namespace slogan {

enum class Domain { source, target };

const char* domain_name(Domain d);

/// Attributed undirected graph. Edges are stored once with u < v; self-loops
/// are never stored (the encoder adds them during normalization).
struct Graph {
  std::size_t node_count = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t feature_dim = 0;
  std::vector<real> features;  // node_count x feature_dim, row-major
  std::optional<int> label;
  Domain domain = Domain::source;
  std::int64_t id = 0;

  // 2|E| / (|V|(|V|-1)); 0 for single-node graphs.
  double density() const;
  std::vector<std::size_t> degrees() const;

  // Throws DataError on out-of-range endpoints, self-loops, duplicate edges,
  // feature size mismatch or non-finite features.
  void validate() const;

  bool operator==(const Graph&) const = default;
};

struct Dataset {
  std::vector<Graph> graphs;
  int num_classes = 0;
  std::size_t feature_dim = 0;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  bool labeled() const;
  void validate() const;
  Dataset with_domain(Domain d) const;

  bool operator==(const Dataset&) const = default;
};

/// Several graphs stacked into one block-diagonal graph.
struct GraphBatch {
  std::vector<std::size_t> offsets;      // first node of each graph
  std::vector<std::size_t> graph_sizes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // global node indices
  std::size_t feature_dim = 0;
  std::vector<real> features;            // total_nodes x feature_dim
  std::vector<std::optional<int>> labels;
  std::vector<Domain> domains;
  std::vector<std::int64_t> ids;
  std::vector<std::size_t> membership;   // node -> graph

  std::size_t num_graphs() const { return graph_sizes.size(); }
  std::size_t num_nodes() const { return membership.size(); }
  Tensor feature_tensor() const;
  // Labels as plain ints; throws DataError naming the first unlabeled graph.
  std::vector<int> require_labels() const;
};

GraphBatch make_batch(std::span<const Graph> graphs);
GraphBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

// Sorts by (density, id) and cuts into `parts` contiguous near-equal chunks,
// earlier chunks taking the remainder.
std::vector<Dataset> density_split(const Dataset& ds, int parts);

}  // namespace slogan
