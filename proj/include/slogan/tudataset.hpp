#pragma once

#include <filesystem>
#include <string>

#include "slogan/graph.hpp"

namespace slogan {

// Number of degree bins for the fallback features: degrees 0..9 and ">= 10".
inline constexpr std::size_t kDegreeBins = 11;

/// Reads a dataset in the TUDataset text layout:
///
///   <name>_A.txt                 "u, v" per line, 1-indexed global node ids
///   <name>_graph_indicator.txt   graph id (1-indexed) of each node
///   <name>_graph_labels.txt      one integer label per graph
///   <name>_node_labels.txt       optional, one integer per node
///   <name>_node_attributes.txt   optional, comma-separated reals per node
///
/// Files are looked up in `root` and then in `root/name`. Node features are
/// the attributes when present, else one-hot node labels (indexed by the raw
/// code when all codes are non-negative, by sorted rank otherwise), else
/// one-hot degree capped at 10. Graph labels are remapped to 0..C-1 in sorted order; edges
/// are symmetrized and deduplicated, self-loops dropped.
Dataset parse_tudataset(const std::filesystem::path& root, const std::string& name);

/// Writes `ds` in the same layout (always with node attributes, so features
/// round-trip exactly). Every graph must carry a label.
void write_tudataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name);

}  // namespace slogan
