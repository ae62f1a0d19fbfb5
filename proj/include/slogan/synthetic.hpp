#pragma once

#include <utility>

#include "slogan/graph.hpp"
#include "slogan/rng.hpp"

namespace slogan {

inline constexpr std::size_t kSynthFeatureDim = 4;
inline constexpr std::size_t kMotifSize = 5;

/// Two-domain graph classification task with a planted causal motif and a
/// spurious feature whose correlation with the label flips across domains.
///
/// Label 1 graphs contain a 5-cycle, label 0 graphs a 5-node star. The other
/// nodes are attached as a random tree plus random extra edges. Node features:
///   0  degree / 10, capped at 1
///   1  cycle-motif membership (1 on the nodes of a planted 5-cycle, else 0)
///      plus Gaussian noise
///   2  spurious bit shared by all nodes of the graph: equals the label with
///      probability rho_s in the source domain and 1 - label with probability
///      rho_s in the target domain
///   3  standard normal noise
struct SynthConfig {
  std::size_t n_per_domain = 500;
  int min_nodes = 6;
  int max_nodes = 20;
  double rho_s = 0.9;
  double label_balance = 0.5;
  double membership_noise = 0.65;
  // Probability of each extra edge beyond the spanning tree, per domain.
  double source_edge_prob = 0.05;
  double target_edge_prob = 0.05;

  void validate() const;
};

std::pair<Dataset, Dataset> gen_synthetic_biased(const SynthConfig& cfg, Rng& rng);

// Random connected graph with `nodes` nodes, about `avg_degree` mean degree
// and standard normal features; used for timing runs.
Graph gen_scaling_graph(std::size_t nodes, double avg_degree, std::size_t feature_dim, Rng& rng);

}  // namespace slogan
