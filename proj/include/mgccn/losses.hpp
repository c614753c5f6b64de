#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgccn/encoder.hpp"
#include "mgccn/errors.hpp"
#include "mgccn/tape.hpp"

namespace mgccn {

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

struct FusionWeights {
  std::vector<double> beta;

  FusionWeights() = default;
  explicit FusionWeights(std::vector<double> b) : beta(std::move(b)) { validate(); }

  void validate() const {
    bool any_positive = false;
    for (double b : beta) {
      if (b < 0.0) throw ConfigError("fusion weights must be non-negative");
      any_positive |= b > 0.0;
    }
    if (!any_positive) throw ConfigError("at least one fusion weight must be positive");
  }
};

// -sum_i sum_{j in N(i)} log sigmoid(z_i . z_j), neighbors including i itself.
inline Var structure_loss(Var z, const NormalizedLayer& layer) {
  Var dots = edge_dot(layer.a_hat, z);
  return scale(sum(log_clamped(sigmoid(dots), kLogFloor)), -1.0);
}

struct ReconstructionParts {
  Var attribute;  // sum_s ||X_s - X_hat_s||_F^2
  Var structure;  // sum_s structure_loss(Z_s)
  Var total;      // attribute + lambda1 * structure
};

inline ReconstructionParts reconstruction_loss(std::span<const Var> x_views, std::span<const Var> x_hat_views,
                                               std::span<const Var> z_views,
                                               std::span<const ViewInput> views, double lambda1) {
  if (x_views.empty() || x_views.size() != x_hat_views.size() || x_views.size() != z_views.size() ||
      x_views.size() != views.size()) {
    throw ShapeError("reconstruction_loss: view counts differ");
  }
  ReconstructionParts parts;
  for (Index s = 0; s < x_views.size(); ++s) {
    Var attr = frobenius_sq(sub(x_views[s], x_hat_views[s]));
    Var str = structure_loss(z_views[s], views[s].layer);
    parts.attribute = s == 0 ? attr : add(parts.attribute, attr);
    parts.structure = s == 0 ? str : add(parts.structure, str);
  }
  parts.total = add(parts.attribute, scale(parts.structure, lambda1));
  return parts;
}

// L(Z_a, Z_b) = (1 / 2N) sum_i [l(a_i, b_i) + l(b_i, a_i)] on row-normalized
// embeddings. Symmetric in its arguments bit for bit.
inline Var pair_contrastive_loss(Var unit_a, Var unit_b, double tau) {
  Var forward = info_nce_terms(unit_a, unit_b, tau);
  Var backward = info_nce_terms(unit_b, unit_a, tau);
  const double n = static_cast<double>(unit_a.rows());
  return scale(sum(add(forward, backward)), 1.0 / (2.0 * n));
}

// sum over ordered view pairs s != s' of L(Z_s, Z_s'). Requires m >= 2; a
// single view contributes 0 and emits a warning.
inline Var contrastive_loss(std::span<const Var> z_views, double tau) {
  if (z_views.empty()) throw ShapeError("contrastive_loss: no views");
  Tape& tape = *z_views.front().tape;
  if (z_views.size() < 2) {
    warn("contrastive_loss: fewer than two views, contrastive term is 0");
    return tape.constant(Matrix::Zero(1, 1));
  }
  std::vector<Var> unit;
  for (Var z : z_views) {
    if (z.rows() != z_views.front().rows() || z.cols() != z_views.front().cols()) {
      throw ShapeError("contrastive_loss: views differ in shape");
    }
    unit.push_back(row_l2_normalize(z, kNormFloor));
  }
  Var total{};
  bool first = true;
  for (Index s = 0; s < unit.size(); ++s) {
    for (Index t = s + 1; t < unit.size(); ++t) {
      // L(Z_s, Z_t) = L(Z_t, Z_s), so each unordered pair counts twice.
      Var pair = scale(pair_contrastive_loss(unit[s], unit[t], tau), 2.0);
      total = first ? pair : add(total, pair);
      first = false;
    }
  }
  return total;
}

inline Var fuse(std::span<const Var> z_views, const FusionWeights& weights) {
  if (z_views.empty() || z_views.size() != weights.beta.size()) {
    throw ShapeError("fuse: " + std::to_string(weights.beta.size()) + " weights for " +
                     std::to_string(z_views.size()) + " views");
  }
  Var out = scale(z_views[0], weights.beta[0]);
  for (Index s = 1; s < z_views.size(); ++s) out = add(out, scale(z_views[s], weights.beta[s]));
  return out;
}

// Tape-free Student's t soft assignment for evaluation.
inline Matrix soft_assignment_values(const Matrix& z, const Matrix& centroids) {
  if (z.cols() != centroids.cols()) throw ShapeError("soft_assignment: width mismatch");
  if (centroids.rows() < 2) throw ConfigError("soft_assignment: need at least 2 centroids");
  Matrix q(z.rows(), centroids.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
      q(i, j) = 1.0 / (1.0 + (z.row(i) - centroids.row(j)).squaredNorm());
    }
    q.row(i) /= q.row(i).sum();
  }
  return q;
}

// p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j'), f_j = sum_i q_ij.
inline Matrix target_distribution(const Matrix& q) {
  const Eigen::RowVectorXd freq = q.colwise().sum();
  Matrix p(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      p(i, j) = freq(j) > 0.0 ? q(i, j) * q(i, j) / freq(j) : 0.0;
    }
    const double total = p.row(i).sum();
    if (total > 0.0) p.row(i) /= total;
  }
  return p;
}

// ||Q - P||_F^2 with P held constant.
inline Var clustering_loss(Var q, const Matrix& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) throw ShapeError("clustering_loss: Q and P differ in shape");
  return frobenius_sq(sub(q, q.tape->constant(p)));
}

inline Var total_loss(Var reconstruction, Var contrastive, Var clustering, double lambda2, double lambda3) {
  return add(reconstruction, add(scale(contrastive, lambda2), scale(clustering, lambda3)));
}

}  // namespace mgccn
