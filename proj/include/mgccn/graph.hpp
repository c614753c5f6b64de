#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgccn/errors.hpp"
#include "mgccn/sparse.hpp"

namespace mgccn {

// One layer of a multilayer graph: an undirected 0/1 adjacency without
// self-loops, plus the attribute view observed on that layer. Layers that
// share one attribute matrix hold the same pointer.
struct GraphLayer {
  CsrMatrix adjacency;
  std::shared_ptr<const Matrix> attributes;
};

struct MultilayerGraph {
  Index n_nodes = 0;
  Index k_classes = 0;
  std::vector<GraphLayer> layers;
  std::optional<std::vector<int>> labels;

  Index n_layers() const { return layers.size(); }

  // Throws DataError on any violated invariant.
  void validate() const {
    if (layers.empty()) throw DataError("multilayer graph has no layers");
    for (Index s = 0; s < layers.size(); ++s) {
      const auto& layer = layers[s];
      const std::string tag = "layer " + std::to_string(s) + ": ";
      if (layer.adjacency.rows() != n_nodes || layer.adjacency.cols() != n_nodes) {
        throw DataError(tag + "adjacency is not " + std::to_string(n_nodes) + "x" +
                        std::to_string(n_nodes));
      }
      if (!layer.adjacency.is_symmetric()) throw DataError(tag + "adjacency is not symmetric");
      for (Index i = 0; i < n_nodes; ++i) {
        if (layer.adjacency.at(i, i) != 0.0) throw DataError(tag + "adjacency has a self-loop");
      }
      if (!layer.attributes) throw DataError(tag + "missing attribute matrix");
      if (static_cast<Index>(layer.attributes->rows()) != n_nodes) {
        throw DataError(tag + "attribute row count differs from node count");
      }
    }
    if (labels) {
      if (labels->size() != n_nodes) throw DataError("label count differs from node count");
      for (int y : *labels) {
        if (y < 0 || static_cast<Index>(y) >= k_classes) {
          throw DataError("label " + std::to_string(y) + " outside [0, k_classes)");
        }
      }
    }
  }
};

// Self-looped, symmetrically normalized adjacency. Its sparsity pattern is
// the neighbor set of each node (self included, sorted).
struct NormalizedLayer {
  CsrMatrix a_hat;

  Index n_nodes() const { return a_hat.rows(); }
  std::span<const Index> neighbors(Index i) const { return a_hat.row_cols(i); }
};

// a_hat = D^{-1/2} (A + I) D^{-1/2}, with D the row sums of A + I.
inline NormalizedLayer normalize_layer(const CsrMatrix& adjacency) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("normalize_layer: adjacency is not square");

  std::vector<std::tuple<Index, Index, double>> triplets;
  triplets.reserve(adjacency.nnz() + n);
  for (Index i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, 1.0);
    auto cols = adjacency.row_cols(i);
    auto vals = adjacency.row_values(i);
    for (Index k = 0; k < cols.size(); ++k) {
      if (cols[k] != i) triplets.emplace_back(i, cols[k], vals[k]);
    }
  }
  CsrMatrix looped = CsrMatrix::from_triplets(n, n, std::move(triplets));

  std::vector<double> inv_sqrt_deg(n);
  for (Index i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : looped.row_values(i)) deg += v;
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<double> values(looped.values());
  for (Index i = 0; i < n; ++i) {
    for (Index k = looped.row_ptr()[i]; k < looped.row_ptr()[i + 1]; ++k) {
      // Same operand order for (i,j) and (j,i) keeps the result exactly symmetric.
      const Index j = looped.col_idx()[k];
      const double lo = inv_sqrt_deg[std::min(i, j)];
      const double hi = inv_sqrt_deg[std::max(i, j)];
      values[k] = values[k] * (lo * hi);
    }
  }
  return NormalizedLayer{CsrMatrix(n, n, looped.row_ptr(), looped.col_idx(), std::move(values))};
}

inline Matrix row_l2_normalized(const Matrix& x) {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

// Pairwise cosine similarity of attribute rows: the N-wide second attribute
// view for datasets that ship with a single attribute matrix. All-zero rows
// get similarity 0 to everything except themselves.
inline Matrix build_second_attribute_view(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix unit = x;
  std::vector<bool> zero_row(static_cast<Index>(n), false);
  Index n_zero = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm == 0.0) {
      zero_row[static_cast<Index>(i)] = true;
      ++n_zero;
    } else {
      unit.row(i) /= norm;
    }
  }
  if (n_zero > 0) {
    warn("build_second_attribute_view: " + std::to_string(n_zero) +
         " all-zero attribute row(s); their similarities are set to 0");
  }
  Matrix sim = unit * unit.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::clamp(sim(i, j), -1.0, 1.0);
      sim(i, j) = v;
      sim(j, i) = v;
    }
    sim(i, i) = 1.0;
  }
  return sim;
}

// Copy of g without layer `layer_index` (graph and its attribute view).
inline MultilayerGraph drop_layer(const MultilayerGraph& g, Index layer_index) {
  if (layer_index >= g.n_layers()) {
    throw ConfigError("drop_layer: index " + std::to_string(layer_index) + " out of range for " +
                      std::to_string(g.n_layers()) + " layer(s)");
  }
  if (g.n_layers() < 2) throw ConfigError("drop_layer: cannot remove the last layer");
  MultilayerGraph out = g;
  out.layers.erase(out.layers.begin() + static_cast<std::ptrdiff_t>(layer_index));
  return out;
}

}  // namespace mgccn
