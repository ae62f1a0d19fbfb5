#include "slogan/tudataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "slogan/error.hpp"

namespace fs = std::filesystem;

namespace slogan {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

long long parse_int(std::string_view token, const fs::path& file, std::size_t line) {
  token = trim(token);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw DataError(file.filename().string() + ":" + std::to_string(line) + ": expected an integer, got '" +
                    std::string(token) + "'");
  return v;
}

double parse_real(std::string_view token, const fs::path& file, std::size_t line) {
  const std::string s(trim(token));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw DataError(file.filename().string() + ":" + std::to_string(line) + ": expected a number, got '" + s +
                    "'");
  return v;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!trim(line).empty()) out.emplace_back(no, line);
  }
  return out;
}

fs::path locate_dir(const fs::path& root, const std::string& name) {
  if (fs::exists(root / (name + "_A.txt"))) return root;
  if (fs::exists(root / name / (name + "_A.txt"))) return root / name;
  return root;
}

fs::path mandatory(const fs::path& dir, const std::string& name, const std::string& suffix) {
  fs::path p = dir / (name + suffix);
  if (!fs::exists(p)) throw DataError("missing mandatory file " + p.string());
  return p;
}

}  // namespace

Dataset parse_tudataset(const fs::path& root, const std::string& name) {
  const fs::path dir = locate_dir(root, name);
  const fs::path a_file = mandatory(dir, name, "_A.txt");
  const fs::path ind_file = mandatory(dir, name, "_graph_indicator.txt");
  const fs::path lab_file = mandatory(dir, name, "_graph_labels.txt");
  const fs::path node_lab_file = dir / (name + "_node_labels.txt");
  const fs::path node_attr_file = dir / (name + "_node_attributes.txt");

  // Node -> graph.
  std::vector<std::size_t> node_graph;
  for (const auto& [no, line] : read_lines(ind_file)) {
    const long long g = parse_int(line, ind_file, no);
    if (g < 1) throw DataError(ind_file.filename().string() + ":" + std::to_string(no) + ": graph id must be >= 1");
    node_graph.push_back(static_cast<std::size_t>(g - 1));
  }
  if (node_graph.empty()) throw DataError(ind_file.string() + " lists no nodes");

  std::vector<long long> raw_labels;
  for (const auto& [no, line] : read_lines(lab_file)) raw_labels.push_back(parse_int(line, lab_file, no));
  const std::size_t n_graphs = raw_labels.size();

  // Graph node ranges; TUDataset lists nodes grouped by graph.
  std::vector<std::size_t> first(n_graphs, SIZE_MAX), count(n_graphs, 0);
  for (std::size_t v = 0; v < node_graph.size(); ++v) {
    const std::size_t g = node_graph[v];
    if (g >= n_graphs)
      throw DataError(ind_file.filename().string() + ":" + std::to_string(v + 1) + ": graph id " +
                      std::to_string(g + 1) + " exceeds label count " + std::to_string(n_graphs));
    if (first[g] == SIZE_MAX) first[g] = v;
    if (v != first[g] + count[g])
      throw DataError(ind_file.filename().string() + ":" + std::to_string(v + 1) + ": nodes of graph " +
                      std::to_string(g + 1) + " are not contiguous");
    ++count[g];
  }
  for (std::size_t g = 0; g < n_graphs; ++g) {
    if (count[g] == 0) throw DataError("graph " + std::to_string(g + 1) + " has no nodes in " + ind_file.string());
  }

  std::vector<std::set<std::pair<std::size_t, std::size_t>>> edge_sets(n_graphs);
  for (const auto& [no, line] : read_lines(a_file)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(a_file.filename().string() + ":" + std::to_string(no) + ": expected 'u, v'");
    const long long u = parse_int(std::string_view(line).substr(0, comma), a_file, no);
    const long long v = parse_int(std::string_view(line).substr(comma + 1), a_file, no);
    const auto n_nodes = static_cast<long long>(node_graph.size());
    if (u < 1 || v < 1 || u > n_nodes || v > n_nodes)
      throw DataError(a_file.filename().string() + ":" + std::to_string(no) + ": edge references unknown node " +
                      std::to_string(u < 1 || u > n_nodes ? u : v));
    const std::size_t gu = node_graph[static_cast<std::size_t>(u - 1)];
    const std::size_t gv = node_graph[static_cast<std::size_t>(v - 1)];
    if (gu != gv)
      throw DataError(a_file.filename().string() + ":" + std::to_string(no) + ": edge joins graphs " +
                      std::to_string(gu + 1) + " and " + std::to_string(gv + 1));
    if (u == v) continue;
    std::size_t lu = static_cast<std::size_t>(u - 1) - first[gu];
    std::size_t lv = static_cast<std::size_t>(v - 1) - first[gu];
    if (lu > lv) std::swap(lu, lv);
    edge_sets[gu].insert({lu, lv});
  }

  Dataset ds;
  std::map<long long, int> label_map;
  for (long long l : raw_labels) label_map.emplace(l, 0);
  int next = 0;
  for (auto& [k, v] : label_map) v = next++;
  ds.num_classes = next;

  ds.graphs.resize(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    Graph& gr = ds.graphs[g];
    gr.id = static_cast<std::int64_t>(g);
    gr.node_count = count[g];
    gr.edges.assign(edge_sets[g].begin(), edge_sets[g].end());
    gr.label = label_map.at(raw_labels[g]);
  }

  if (fs::exists(node_attr_file)) {
    std::size_t dim = 0;
    std::vector<std::vector<real>> rows;
    for (const auto& [no, line] : read_lines(node_attr_file)) {
      std::vector<real> row;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) row.push_back(static_cast<real>(parse_real(tok, node_attr_file, no)));
      if (rows.empty()) dim = row.size();
      if (row.size() != dim)
        throw DataError(node_attr_file.filename().string() + ":" + std::to_string(no) + ": expected " +
                        std::to_string(dim) + " attributes, got " + std::to_string(row.size()));
      rows.push_back(std::move(row));
    }
    if (rows.size() != node_graph.size())
      throw DataError(node_attr_file.string() + ": " + std::to_string(rows.size()) + " rows for " +
                      std::to_string(node_graph.size()) + " nodes");
    ds.feature_dim = dim;
    for (std::size_t g = 0; g < n_graphs; ++g) {
      Graph& gr = ds.graphs[g];
      gr.feature_dim = dim;
      for (std::size_t v = 0; v < gr.node_count; ++v) {
        const auto& row = rows[first[g] + v];
        gr.features.insert(gr.features.end(), row.begin(), row.end());
      }
    }
  } else if (fs::exists(node_lab_file)) {
    std::vector<long long> raw;
    for (const auto& [no, line] : read_lines(node_lab_file)) raw.push_back(parse_int(line, node_lab_file, no));
    if (raw.size() != node_graph.size())
      throw DataError(node_lab_file.string() + ": " + std::to_string(raw.size()) + " labels for " +
                      std::to_string(node_graph.size()) + " nodes");
    // Non-negative codes index the one-hot directly so that datasets sharing a
    // code book (e.g. the PTC family) line up column for column.
    std::map<long long, std::size_t> node_map;
    for (long long l : raw) node_map.emplace(l, 0);
    std::size_t k = 0;
    if (node_map.begin()->first >= 0) {
      for (auto& [key, idx] : node_map) idx = static_cast<std::size_t>(key);
      k = static_cast<std::size_t>(node_map.rbegin()->first) + 1;
    } else {
      for (auto& [key, idx] : node_map) idx = k++;
    }
    ds.feature_dim = k;
    for (std::size_t g = 0; g < n_graphs; ++g) {
      Graph& gr = ds.graphs[g];
      gr.feature_dim = k;
      gr.features.assign(gr.node_count * k, real(0));
      for (std::size_t v = 0; v < gr.node_count; ++v) gr.features[v * k + node_map.at(raw[first[g] + v])] = 1;
    }
  } else {
    ds.feature_dim = kDegreeBins;
    for (auto& gr : ds.graphs) {
      gr.feature_dim = kDegreeBins;
      gr.features.assign(gr.node_count * kDegreeBins, real(0));
      const auto deg = gr.degrees();
      for (std::size_t v = 0; v < gr.node_count; ++v)
        gr.features[v * kDegreeBins + std::min<std::size_t>(deg[v], kDegreeBins - 1)] = 1;
    }
  }
  ds.validate();
  return ds;
}

void write_tudataset(const Dataset& ds, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream a(dir / (name + "_A.txt"));
  std::ofstream ind(dir / (name + "_graph_indicator.txt"));
  std::ofstream lab(dir / (name + "_graph_labels.txt"));
  std::ofstream attr(dir / (name + "_node_attributes.txt"));
  if (!a || !ind || !lab || !attr) throw DataError("cannot write dataset files under " + dir.string());
  std::size_t offset = 0;
  char buf[64];
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& gr = ds.graphs[g];
    if (!gr.label) throw DataError("write_tudataset: graph " + std::to_string(gr.id) + " has no label");
    lab << *gr.label << '\n';
    for (std::size_t v = 0; v < gr.node_count; ++v) {
      ind << (g + 1) << '\n';
      for (std::size_t j = 0; j < gr.feature_dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(gr.features[v * gr.feature_dim + j]));
        attr << (j ? ", " : "") << buf;
      }
      attr << '\n';
    }
    for (auto [u, v] : gr.edges) {
      a << (offset + u + 1) << ", " << (offset + v + 1) << '\n';
      a << (offset + v + 1) << ", " << (offset + u + 1) << '\n';
    }
    offset += gr.node_count;
  }
}

}  // namespace slogan
