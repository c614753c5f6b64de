#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "mgccn/errors.hpp"
#include "mgccn/sparse.hpp"

namespace mgccn {

// counts(p, t) = number of nodes with predicted cluster p and true class t,
// after compacting both label sets to 0..k-1 in increasing label order.
struct ContingencyTable {
  std::vector<std::vector<Index>> counts;
  std::vector<int> pred_ids, true_ids;  // original label of each row / column
  Index total = 0;

  Index n_pred() const { return counts.size(); }
  Index n_true() const { return true_ids.size(); }
};

inline ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ShapeError("metrics: prediction and truth lengths differ");
  if (pred.empty()) throw ShapeError("metrics: empty input");
  auto compact = [](std::span<const int> labels, std::vector<int>& ids) {
    std::map<int, Index> index;
    for (int y : labels) index.emplace(y, 0);
    Index next = 0;
    for (auto& [label, idx] : index) {
      idx = next++;
      ids.push_back(label);
    }
    std::vector<Index> out;
    out.reserve(labels.size());
    for (int y : labels) out.push_back(index.at(y));
    return out;
  };
  ContingencyTable table;
  const auto p = compact(pred, table.pred_ids);
  const auto t = compact(truth, table.true_ids);
  table.counts.assign(table.pred_ids.size(), std::vector<Index>(table.true_ids.size(), 0));
  for (Index i = 0; i < p.size(); ++i) ++table.counts[p[i]][t[i]];
  table.total = pred.size();
  return table;
}

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
// potentials). Returns column assigned to each row.
inline std::vector<Index> hungarian(const std::vector<std::vector<double>>& cost) {
  const Index n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(n, 0);
  for (Index j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

// For every predicted cluster (row of `table`), the matched true class column,
// or -1 when the cluster is left unmatched (more clusters than classes).
// Maximizes matched counts; among tied matchings, the summed pair F1. The F1
// term totals less than 1, so it never overrides an integer count difference,
// and it makes the result independent of how clusters happen to be numbered.
inline std::vector<long> match_clusters(const ContingencyTable& table) {
  const Index size = std::max(table.n_pred(), table.n_true());
  std::vector<double> row(table.n_pred(), 0.0), col(table.n_true(), 0.0);
  for (Index r = 0; r < table.n_pred(); ++r) {
    for (Index c = 0; c < table.n_true(); ++c) {
      row[r] += static_cast<double>(table.counts[r][c]);
      col[c] += static_cast<double>(table.counts[r][c]);
    }
  }
  const double tie_scale = 1.0 / static_cast<double>(size + 1);
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, 0.0));
  for (Index r = 0; r < table.n_pred(); ++r) {
    for (Index c = 0; c < table.n_true(); ++c) {
      const double n_rc = static_cast<double>(table.counts[r][c]);
      cost[r][c] = -(n_rc + tie_scale * 2.0 * n_rc / (row[r] + col[c]));
    }
  }
  const auto assignment = hungarian(cost);
  std::vector<long> out(table.n_pred(), -1);
  for (Index r = 0; r < table.n_pred(); ++r) {
    if (assignment[r] < table.n_true()) out[r] = static_cast<long>(assignment[r]);
  }
  return out;
}

// Fraction of nodes whose cluster maps to their class under the best
// one-to-one cluster/class matching.
inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  const auto table = contingency(pred, truth);
  const auto match = match_clusters(table);
  Index hits = 0;
  for (Index r = 0; r < table.n_pred(); ++r) {
    if (match[r] >= 0) hits += table.counts[r][static_cast<Index>(match[r])];
  }
  return static_cast<double>(hits) / static_cast<double>(table.total);
}

// Mutual information normalized by the arithmetic mean of the two entropies.
// Returns 0 when both partitions are a single cluster.
inline double nmi(std::span<const int> pred, std::span<const int> truth) {
  const auto table = contingency(pred, truth);
  const double n = static_cast<double>(table.total);
  std::vector<double> row(table.n_pred(), 0.0), col(table.n_true(), 0.0);
  for (Index r = 0; r < table.n_pred(); ++r) {
    for (Index c = 0; c < table.n_true(); ++c) {
      row[r] += static_cast<double>(table.counts[r][c]);
      col[c] += static_cast<double>(table.counts[r][c]);
    }
  }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts) {
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  double mi = 0.0;
  for (Index r = 0; r < table.n_pred(); ++r) {
    for (Index c = 0; c < table.n_true(); ++c) {
      const double nij = static_cast<double>(table.counts[r][c]);
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (row[r] * col[c]));
    }
  }
  const double denom = 0.5 * (entropy(row) + entropy(col));
  if (denom <= 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

// Adjusted Rand index by pair counting.
inline double ari(std::span<const int> pred, std::span<const int> truth) {
  const auto table = contingency(pred, truth);
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  std::vector<double> row(table.n_pred(), 0.0), col(table.n_true(), 0.0);
  for (Index r = 0; r < table.n_pred(); ++r) {
    for (Index c = 0; c < table.n_true(); ++c) {
      const double nij = static_cast<double>(table.counts[r][c]);
      sum_ij += comb2(nij);
      row[r] += nij;
      col[c] += nij;
    }
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (double a : row) sum_a += comb2(a);
  for (double b : col) sum_b += comb2(b);
  const double total_pairs = comb2(static_cast<double>(table.total));
  if (total_pairs == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total_pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return sum_ij == expected ? 1.0 : 0.0;
  return (sum_ij - expected) / (max_index - expected);
}

// Per-class F1 after Hungarian matching of clusters to classes, averaged over
// the true classes. Clusters without a matched class count as wrong.
inline double macro_f1(std::span<const int> pred, std::span<const int> truth) {
  const auto table = contingency(pred, truth);
  const auto match = match_clusters(table);
  double total = 0.0;
  for (Index c = 0; c < table.n_true(); ++c) {
    Index true_count = 0;
    for (Index r = 0; r < table.n_pred(); ++r) true_count += table.counts[r][c];
    double f1 = 0.0;
    for (Index r = 0; r < table.n_pred(); ++r) {
      if (match[r] != static_cast<long>(c)) continue;
      Index pred_count = 0;
      for (Index cc = 0; cc < table.n_true(); ++cc) pred_count += table.counts[r][cc];
      const double tp = static_cast<double>(table.counts[r][c]);
      if (tp > 0.0) {
        const double precision = tp / static_cast<double>(pred_count);
        const double recall = tp / static_cast<double>(true_count);
        f1 = 2.0 * precision * recall / (precision + recall);
      }
    }
    total += f1;
  }
  return total / static_cast<double>(table.n_true());
}

struct ClusteringScores {
  double acc = 0.0, nmi = 0.0, ari = 0.0, f1 = 0.0;
};

inline ClusteringScores evaluate_clustering(std::span<const int> pred, std::span<const int> truth) {
  return {accuracy(pred, truth), nmi(pred, truth), ari(pred, truth), macro_f1(pred, truth)};
}

}  // namespace mgccn
