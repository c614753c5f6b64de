#pragma once

// On-disk dataset format.
//
//   <dir>/manifest.json
//     {
//       "n_nodes": 3025, "k_classes": 3,
//       "labels": "labels.txt",                          (optional)
//       "shared_attributes": true,                        (optional, default false)
//       "attributes": {"path": "features.txt", "format": "sparse", "n_cols": 1830},
//       "layers": [
//         {"edges": "psp.edges"},
//         {"edges": "pap.edges"}
//       ]
//     }
//
//   With "shared_attributes" false every layer carries its own "attributes"
//   entry, either a file ({"path", "format", optional "n_cols"}) or a derived
//   view ({"derived": "cosine", "from_layer": 0}).
//
//   edges:      whitespace-separated "src dst" per line, 0-indexed
//   dense:      one row per line, values separated by commas or whitespace
//   sparse:     "row col value" triplets, 0-indexed
//   labels:     one integer per line
//
// Lines that are empty or start with '#' are ignored everywhere.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgccn/errors.hpp"
#include "mgccn/graph.hpp"

namespace mgccn {

namespace fs = std::filesystem;

namespace detail {

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline bool skip_line(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  Index i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ',' ||
                               line[i] == '\r')) {
      ++i;
    }
    const Index start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != ',' &&
           line[i] != '\r') {
      ++i;
    }
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const fs::path& path, Index line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                    std::string(field) + "'");
  }
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Reads an undirected edge list; duplicates collapse and (i,j) implies (j,i).
// Self-loops in the file are dropped since normalization adds them.
inline CsrMatrix read_edge_list(const fs::path& path, Index n_nodes) {
  auto in = detail::open_input(path);
  std::vector<std::tuple<Index, Index, double>> triplets;
  std::string line;
  Index line_no = 0, self_loops = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() < 2) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'src dst'");
    }
    const auto src = detail::parse_number<Index>(fields[0], path, line_no);
    const auto dst = detail::parse_number<Index>(fields[1], path, line_no);
    if (src >= n_nodes || dst >= n_nodes) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": node index out of range (" +
                      std::to_string(std::max(src, dst)) + " >= " + std::to_string(n_nodes) + ")");
    }
    if (src == dst) {
      ++self_loops;
      continue;
    }
    triplets.emplace_back(src, dst, 1.0);
    triplets.emplace_back(dst, src, 1.0);
  }
  if (self_loops > 0) {
    warn(path.string() + ": dropped " + std::to_string(self_loops) + " self-loop edge(s)");
  }
  CsrMatrix summed = CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(triplets));
  return CsrMatrix(n_nodes, n_nodes, summed.row_ptr(), summed.col_idx(),
                   std::vector<double>(summed.nnz(), 1.0));
}

inline void write_edge_list(const fs::path& path, const CsrMatrix& adjacency) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Index i = 0; i < adjacency.rows(); ++i) {
    for (Index j : adjacency.row_cols(i)) {
      if (j > i) out << i << ' ' << j << '\n';
    }
  }
}

inline Matrix read_dense_matrix(const fs::path& path, std::optional<Index> expect_rows = {}) {
  auto in = detail::open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(detail::parse_number<double>(f, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": ragged row (" +
                      std::to_string(row.size()) + " values, expected " +
                      std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (expect_rows && rows.size() != *expect_rows) {
    throw DataError(path.string() + ": " + std::to_string(rows.size()) + " rows, expected " +
                    std::to_string(*expect_rows));
  }
  const Index cols = rows.empty() ? 0 : rows.front().size();
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (Index r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

inline Matrix read_sparse_triplets(const fs::path& path, Index n_rows, std::optional<Index> n_cols) {
  auto in = detail::open_input(path);
  std::vector<std::tuple<Index, Index, double>> entries;
  std::string line;
  Index line_no = 0, max_col = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() != 3) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'row col value'");
    }
    const auto r = detail::parse_number<Index>(fields[0], path, line_no);
    const auto c = detail::parse_number<Index>(fields[1], path, line_no);
    const auto v = detail::parse_number<double>(fields[2], path, line_no);
    if (r >= n_rows) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": row index out of range");
    }
    if (n_cols && c >= *n_cols) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": column index out of range");
    }
    max_col = std::max(max_col, c + 1);
    entries.emplace_back(r, c, v);
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n_rows),
                            static_cast<Eigen::Index>(n_cols.value_or(max_col)));
  for (const auto& [r, c, v] : entries) {
    out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
  }
  return out;
}

inline void write_dense_matrix(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << detail::format_double(m(r, c));
    }
    out << '\n';
  }
}

inline void write_sparse_triplets(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) out << r << ' ' << c << ' ' << detail::format_double(m(r, c)) << '\n';
    }
  }
}

inline std::vector<int> read_labels(const fs::path& path, Index n_nodes) {
  auto in = detail::open_input(path);
  std::vector<int> labels;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    labels.push_back(detail::parse_number<int>(fields.at(0), path, line_no));
  }
  if (labels.size() != n_nodes) {
    throw DataError(path.string() + ": " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n_nodes) + " nodes");
  }
  return labels;
}

namespace detail {

inline Matrix read_attribute_entry(const fs::path& dir, const nlohmann::json& entry, Index n_nodes) {
  const auto path = dir / entry.at("path").get<std::string>();
  const auto format = entry.value("format", std::string("dense"));
  std::optional<Index> n_cols;
  if (entry.contains("n_cols")) n_cols = entry.at("n_cols").get<Index>();
  if (format == "dense") {
    Matrix m = read_dense_matrix(path, n_nodes);
    if (n_cols && static_cast<Index>(m.cols()) != *n_cols) {
      throw DataError(path.string() + ": column count differs from manifest n_cols");
    }
    return m;
  }
  if (format == "sparse") return read_sparse_triplets(path, n_nodes, n_cols);
  throw DataError("unknown attribute format '" + format + "'");
}

}  // namespace detail

inline MultilayerGraph load_multilayer_graph(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  auto in = detail::open_input(manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  try {
    MultilayerGraph g;
    g.n_nodes = manifest.at("n_nodes").get<Index>();
    g.k_classes = manifest.at("k_classes").get<Index>();
    const auto& layer_entries = manifest.at("layers");
    if (!layer_entries.is_array() || layer_entries.empty()) {
      throw DataError(manifest_path.string() + ": 'layers' must be a non-empty array");
    }

    std::shared_ptr<const Matrix> shared;
    if (manifest.value("shared_attributes", false)) {
      shared = std::make_shared<const Matrix>(
          detail::read_attribute_entry(dir, manifest.at("attributes"), g.n_nodes));
    }

    std::map<fs::path, CsrMatrix> edge_cache;
    std::vector<nlohmann::json> derived(layer_entries.size());
    for (Index s = 0; s < layer_entries.size(); ++s) {
      const auto& entry = layer_entries[s];
      const auto edge_path = dir / entry.at("edges").get<std::string>();
      auto cached = edge_cache.find(edge_path);
      if (cached == edge_cache.end()) {
        cached = edge_cache.emplace(edge_path, read_edge_list(edge_path, g.n_nodes)).first;
      }
      GraphLayer layer{cached->second, nullptr};
      if (shared) {
        layer.attributes = shared;
      } else {
        const auto& attr = entry.at("attributes");
        if (attr.contains("derived")) {
          derived[s] = attr;
        } else {
          layer.attributes =
              std::make_shared<const Matrix>(detail::read_attribute_entry(dir, attr, g.n_nodes));
        }
      }
      g.layers.push_back(std::move(layer));
    }
    for (Index s = 0; s < derived.size(); ++s) {
      if (derived[s].is_null()) continue;
      const auto kind = derived[s].at("derived").get<std::string>();
      if (kind != "cosine") throw DataError("unknown derived attribute view '" + kind + "'");
      const auto from = derived[s].value("from_layer", Index{0});
      if (from >= g.layers.size() || !g.layers[from].attributes) {
        throw DataError("derived attribute view of layer " + std::to_string(s) +
                        " refers to a layer without file attributes");
      }
      g.layers[s].attributes =
          std::make_shared<const Matrix>(build_second_attribute_view(*g.layers[from].attributes));
    }

    if (manifest.contains("labels") && !manifest.at("labels").is_null()) {
      const auto label_path = dir / manifest.at("labels").get<std::string>();
      if (!fs::exists(label_path)) {
        warn(label_path.string() + " not found; continuing without labels");
      } else {
        g.labels = read_labels(label_path, g.n_nodes);
      }
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
}

// Writes g in the format read by load_multilayer_graph. Attribute values are
// printed in shortest round-trip form so a reload is bit-identical.
inline void save_multilayer_graph(const MultilayerGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["n_nodes"] = g.n_nodes;
  manifest["k_classes"] = g.k_classes;

  auto write_attributes = [&](const Matrix& x, const std::string& stem) {
    const double density =
        x.size() == 0 ? 1.0 : static_cast<double>((x.array() != 0.0).count()) / x.size();
    nlohmann::json entry;
    entry["n_cols"] = x.cols();
    if (density < 0.25) {
      entry["path"] = stem + ".triplets";
      entry["format"] = "sparse";
      write_sparse_triplets(dir / (stem + ".triplets"), x);
    } else {
      entry["path"] = stem + ".csv";
      entry["format"] = "dense";
      write_dense_matrix(dir / (stem + ".csv"), x);
    }
    return entry;
  };

  bool all_shared = !g.layers.empty();
  for (const auto& layer : g.layers) all_shared &= layer.attributes == g.layers.front().attributes;
  if (all_shared && g.layers.size() > 1) {
    manifest["shared_attributes"] = true;
    manifest["attributes"] = write_attributes(*g.layers.front().attributes, "attributes");
  }

  manifest["layers"] = nlohmann::json::array();
  for (Index s = 0; s < g.layers.size(); ++s) {
    const std::string edges = "layer" + std::to_string(s) + ".edges";
    write_edge_list(dir / edges, g.layers[s].adjacency);
    nlohmann::json entry{{"edges", edges}};
    if (!manifest.contains("shared_attributes")) {
      entry["attributes"] =
          write_attributes(*g.layers[s].attributes, "layer" + std::to_string(s) + "_attributes");
    }
    manifest["layers"].push_back(entry);
  }

  if (g.labels) {
    manifest["labels"] = "labels.txt";
    std::ofstream out(dir / "labels.txt");
    for (int y : *g.labels) out << y << '\n';
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

// Converts a Planetoid-style citation dataset (<name>.content with
// "id w_1 ... w_d class" rows and <name>.cites with "cited citing" pairs)
// into a two-view dataset: bag-of-words view plus derived cosine view over the
// same citation graph.
inline void convert_planetoid(const fs::path& content_path, const fs::path& cites_path,
                              const fs::path& out_dir) {
  auto in = detail::open_input(content_path);
  std::map<std::string, Index> node_of;
  std::map<std::string, int> class_of;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> class_names;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() < 3) {
      throw DataError(content_path.string() + ":" + std::to_string(line_no) + ": too few fields");
    }
    node_of.emplace(std::string(fields.front()), rows.size());
    std::vector<double> row;
    for (Index k = 1; k + 1 < fields.size(); ++k) {
      row.push_back(detail::parse_number<double>(fields[k], content_path, line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(content_path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
    class_names.emplace_back(fields.back());
    class_of.emplace(std::string(fields.back()), 0);
  }
  int next = 0;
  for (auto& [name, id] : class_of) id = next++;

  const Index n = rows.size();
  const Index d = n ? rows.front().size() : 0;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }

  fs::create_directories(out_dir);
  auto cites = detail::open_input(cites_path);
  std::ofstream edges(out_dir / "graph.edges");
  Index dangling = 0;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() < 2) continue;
    auto a = node_of.find(std::string(fields[0]));
    auto b = node_of.find(std::string(fields[1]));
    if (a == node_of.end() || b == node_of.end()) {
      ++dangling;
      continue;
    }
    edges << a->second << ' ' << b->second << '\n';
  }
  if (dangling) warn(cites_path.string() + ": skipped " + std::to_string(dangling) + " dangling citation(s)");

  write_sparse_triplets(out_dir / "features.triplets", x);
  std::ofstream labels(out_dir / "labels.txt");
  for (const auto& c : class_names) labels << class_of.at(c) << '\n';

  nlohmann::json manifest;
  manifest["n_nodes"] = n;
  manifest["k_classes"] = class_of.size();
  manifest["labels"] = "labels.txt";
  manifest["layers"] = nlohmann::json::array(
      {{{"edges", "graph.edges"},
        {"attributes", {{"path", "features.triplets"}, {"format", "sparse"}, {"n_cols", d}}}},
       {{"edges", "graph.edges"}, {"attributes", {{"derived", "cosine"}, {"from_layer", 0}}}}});
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
}

// Converts dense text exports (one N x N adjacency per layer, one shared
// N x d feature matrix, labels as integers or one-hot rows) into the manifest
// format with shared attributes.
inline void convert_dense(const std::vector<fs::path>& adjacency_paths, const fs::path& features_path,
                          const std::optional<fs::path>& labels_path, const fs::path& out_dir) {
  if (adjacency_paths.empty()) throw DataError("convert_dense: no adjacency matrices given");
  const Matrix x = read_dense_matrix(features_path);
  const Index n = static_cast<Index>(x.rows());

  MultilayerGraph g;
  g.n_nodes = n;
  auto attrs = std::make_shared<const Matrix>(x);
  for (const auto& path : adjacency_paths) {
    const Matrix a = read_dense_matrix(path, n);
    if (static_cast<Index>(a.cols()) != n) throw DataError(path.string() + ": adjacency is not square");
    std::vector<std::tuple<Index, Index, double>> triplets;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0 ||
            a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) != 0.0) {
          triplets.emplace_back(i, j, 1.0);
        }
      }
    }
    g.layers.push_back({CsrMatrix::from_triplets(n, n, std::move(triplets)), attrs});
  }
  if (labels_path) {
    const Matrix y = read_dense_matrix(*labels_path, n);
    std::vector<int> labels(n);
    for (Index i = 0; i < n; ++i) {
      if (y.cols() == 1) {
        labels[i] = static_cast<int>(y(static_cast<Eigen::Index>(i), 0));
      } else {
        Eigen::Index arg = 0;
        y.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        labels[i] = static_cast<int>(arg);
      }
    }
    g.k_classes = static_cast<Index>(*std::max_element(labels.begin(), labels.end())) + 1;
    g.labels = std::move(labels);
  } else {
    g.k_classes = 2;
  }
  g.validate();
  save_multilayer_graph(g, out_dir);
}

}  // namespace mgccn
