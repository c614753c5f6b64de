#pragma once

// Central finite-difference check of every objective term against tape
// gradients on a small seeded random instance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mgccn/trainer.hpp"

namespace mgccn {

struct GradcheckOptions {
  Index n_nodes = 12;
  Index n_features = 7;
  Index n_layers = 2;
  std::vector<Index> widths{5, 3};
  Index k = 3;
  double edge_probability = 0.3;
  double step = 1e-5;
  double rel_tolerance = 1e-4;
  double abs_floor = 1e-8;
  // Test hook: perturbs one analytic gradient entry so the check must fail.
  bool corrupt = false;
};

struct TermReport {
  std::string name;
  // An entry passes when |numeric - analytic| <= abs_floor + rel_tolerance * max(|numeric|, |analytic|).
  double max_rel_error = 0.0;  // over entries with rel_tolerance * scale > abs_floor
  double max_abs_error = 0.0;
  Index failures = 0;
  Index entries = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<TermReport> terms;
  bool passed = true;
};

// Random multilayer graph with independent Bernoulli edges per layer and
// uniform [0, 1) attributes shared by all layers.
inline MultilayerGraph random_multilayer_graph(Index n, Index d, Index m, Index k, double edge_p,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u01 = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  MultilayerGraph g;
  g.n_nodes = n;
  g.k_classes = k;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u01();
  auto attrs = std::make_shared<const Matrix>(x);
  for (Index s = 0; s < m; ++s) {
    std::vector<std::tuple<Index, Index, double>> triplets;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (u01() < edge_p) {
          triplets.emplace_back(i, j, 1.0);
          triplets.emplace_back(j, i, 1.0);
        }
      }
    }
    g.layers.push_back({CsrMatrix::from_triplets(n, n, std::move(triplets)), attrs});
  }
  return g;
}

inline GradcheckReport run_gradcheck(std::uint64_t seed, const GradcheckOptions& opt = {}) {
  const auto g = random_multilayer_graph(opt.n_nodes, opt.n_features, opt.n_layers, opt.k, opt.edge_probability, seed);
  const auto views = prepare_views(g);
  EncoderState state = init_encoder(view_widths(views), opt.widths, seed + 1);

  ObjectiveWeights w;
  w.lambda1 = 0.5;
  w.lambda2 = 10.0;
  w.lambda3 = 0.5;
  w.tau = 0.5;
  std::vector<double> beta(opt.n_layers, 1.0);
  beta.front() = 2.0;
  w.beta = FusionWeights(beta);

  Matrix z0 = fused_embedding(views, state, w.beta);
  std::mt19937_64 rng(seed + 2);
  Parameter centroids("centroids", Matrix(static_cast<Eigen::Index>(opt.k), z0.cols()));
  for (Eigen::Index j = 0; j < centroids.value.rows(); ++j) {
    // Start near a data point so Q is far from uniform.
    centroids.value.row(j) = z0.row(static_cast<Eigen::Index>(rng() % opt.n_nodes)) * 0.9;
  }
  Matrix target;
  {
    Tape tape;
    target = build_objective(tape, views, state, &centroids, nullptr, w).p;
  }

  using Selector = std::function<Var(const ObjectiveTerms&)>;
  const std::vector<std::pair<std::string, Selector>> selectors{
      {"attribute", [](const ObjectiveTerms& t) { return t.reconstruction.attribute; }},
      {"structure", [](const ObjectiveTerms& t) { return t.reconstruction.structure; }},
      {"reconstruction", [](const ObjectiveTerms& t) { return t.reconstruction.total; }},
      {"contrastive", [](const ObjectiveTerms& t) { return t.contrastive; }},
      {"clustering", [](const ObjectiveTerms& t) { return t.clustering; }},
      {"total", [](const ObjectiveTerms& t) { return t.total; }},
  };

  auto params = state.parameters();
  params.push_back(&centroids);

  // Analytic gradients per term.
  std::vector<std::vector<Matrix>> analytic(selectors.size());
  for (Index t = 0; t < selectors.size(); ++t) {
    for (auto* p : params) p->zero_grad();
    Tape tape;
    auto terms = build_objective(tape, views, state, &centroids, &target, w);
    tape.backward(selectors[t].second(terms));
    for (auto* p : params) analytic[t].push_back(p->grad);
  }
  if (opt.corrupt) {
    auto& total_grad = analytic.back().front();
    total_grad(0, 0) += 1e-3 * (1.0 + std::abs(total_grad(0, 0)));
  }

  auto evaluate = [&] {
    Tape tape;
    auto terms = build_objective(tape, views, state, &centroids, &target, w);
    std::vector<double> out;
    for (const auto& [name, select] : selectors) out.push_back(select(terms).scalar());
    return out;
  };

  GradcheckReport report;
  for (const auto& [name, _] : selectors) report.terms.push_back({name});
  for (Index pi = 0; pi < params.size(); ++pi) {
    Matrix& value = params[pi]->value;
    for (Eigen::Index e = 0; e < value.size(); ++e) {
      const double saved = value.data()[e];
      value.data()[e] = saved + opt.step;
      const auto plus = evaluate();
      value.data()[e] = saved - opt.step;
      const auto minus = evaluate();
      value.data()[e] = saved;
      for (Index t = 0; t < selectors.size(); ++t) {
        const double numeric = (plus[t] - minus[t]) / (2.0 * opt.step);
        const double exact = analytic[t][pi].data()[e];
        const double diff = std::abs(numeric - exact);
        auto& term = report.terms[t];
        ++term.entries;
        const double scale = std::max(std::abs(numeric), std::abs(exact));
        term.max_abs_error = std::max(term.max_abs_error, diff);
        if (diff > opt.abs_floor + opt.rel_tolerance * scale) ++term.failures;
        // Entries where the relative bound dominates the absolute floor.
        if (opt.rel_tolerance * scale > opt.abs_floor) {
          term.max_rel_error = std::max(term.max_rel_error, diff / scale);
        }
      }
    }
  }
  for (auto& term : report.terms) {
    term.passed = term.failures == 0;
    report.passed &= term.passed;
  }
  return report;
}

}  // namespace mgccn
