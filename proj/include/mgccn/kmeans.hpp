#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mgccn/errors.hpp"
#include "mgccn/sparse.hpp"

namespace mgccn {

struct KMeansResult {
  Matrix centroids;
  std::vector<int> labels;
  double wcss = 0.0;
};

struct KMeansOptions {
  Index restarts = 10;
  Index max_iterations = 300;
  double tolerance = 1e-10;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// k-means++ seeding: first center uniform, each next one drawn with
// probability proportional to squared distance from the nearest chosen center.
inline Matrix kmeanspp_seed(const Matrix& x, Index k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(static_cast<Eigen::Index>(k), x.cols());
  std::vector<double> min_dist(static_cast<Index>(n), std::numeric_limits<double>::infinity());
  Eigen::Index pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  for (Index c = 0; c < k; ++c) {
    centers.row(static_cast<Eigen::Index>(c)) = x.row(pick);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (x.row(i) - x.row(pick)).squaredNorm();
      auto& md = min_dist[static_cast<Index>(i)];
      if (d < md) md = d;
      total += md;
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      // Every point coincides with a chosen center; any pick is as good.
      pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
      continue;
    }
    double target = uniform01(rng) * total;
    pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= min_dist[static_cast<Index>(i)];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& x, Matrix centers, const KMeansOptions& opt) {
  const Eigen::Index n = x.rows(), k = centers.rows();
  KMeansResult res;
  res.labels.assign(static_cast<Index>(n), 0);
  double prev = std::numeric_limits<double>::infinity();
  for (Index iter = 0; iter < opt.max_iterations; ++iter) {
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double d = (x.row(i) - centers.row(j)).squaredNorm();
        if (d < best) {
          best = d;
          arg = static_cast<int>(j);
        }
      }
      res.labels[static_cast<Index>(i)] = arg;
      wcss += best;
    }
    res.wcss = wcss;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<Index>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<Index>(i)]) += x.row(i);
      ++counts[static_cast<Index>(res.labels[static_cast<Index>(i)])];
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts[static_cast<Index>(j)] > 0) {
        centers.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<Index>(j)]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its center.
      double worst = -1.0;
      Eigen::Index far = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centers.row(res.labels[static_cast<Index>(i)])).squaredNorm();
        if (d > worst) {
          worst = d;
          far = i;
        }
      }
      centers.row(j) = x.row(far);
    }
    if (prev - wcss <= opt.tolerance * std::max(1.0, wcss)) break;
    prev = wcss;
  }
  // Final assignment against the final centers.
  res.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double d = (x.row(i) - centers.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    res.labels[static_cast<Index>(i)] = arg;
    res.wcss += best;
  }
  res.centroids = std::move(centers);
  return res;
}

}  // namespace detail

// Best of `restarts` k-means runs with k-means++ seeding, by within-cluster
// sum of squares. Deterministic for a given seed.
inline KMeansResult kmeans(const Matrix& x, Index k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (k == 0) throw ConfigError("kmeans: k must be positive");
  if (static_cast<Index>(x.rows()) < k) {
    throw ConfigError("kmeans: " + std::to_string(x.rows()) + " points for " + std::to_string(k) + " clusters");
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < std::max<Index>(1, opt.restarts); ++r) {
    auto res = detail::lloyd(x, detail::kmeanspp_seed(x, k, rng), opt);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  return best;
}

inline Matrix init_centroids(const Matrix& z, Index k, std::uint64_t seed) { return kmeans(z, k, seed).centroids; }

}  // namespace mgccn
