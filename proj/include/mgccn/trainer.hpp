#pragma once

// Training procedure:
//   1. pretrain the shared autoencoder on L_re + lambda2 L_con;
//   2. seed centroids by k-means++ / k-means on the fused embedding;
//   3. jointly minimize L_re + lambda2 L_con + lambda3 L_clu with Adam over
//      network weights and centroids, refreshing the target distribution P
//      every p_update_every epochs;
//   4. label each node by argmax_j q_ij.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgccn/adam.hpp"
#include "mgccn/config.hpp"
#include "mgccn/encoder.hpp"
#include "mgccn/graph.hpp"
#include "mgccn/kmeans.hpp"
#include "mgccn/losses.hpp"
#include "mgccn/metrics.hpp"

namespace mgccn {

struct ObjectiveWeights {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double tau = 0.5;
  FusionWeights beta;
};

struct ObjectiveTerms {
  std::vector<Var> x, z, x_hat;
  Var fused;
  ReconstructionParts reconstruction;
  Var contrastive;
  std::optional<Var> q;
  Matrix p;
  Var clustering;
  Var total;
};

// Records the full objective on `tape`. Without centroids the clustering term
// is the constant 0. With centroids and no `target`, P is computed from the
// current Q and held constant.
inline ObjectiveTerms build_objective(Tape& tape, const std::vector<ViewInput>& views, EncoderState& state,
                                      Parameter* centroids, const Matrix* target, const ObjectiveWeights& w) {
  ObjectiveTerms terms;
  BoundEncoder bound = bind(tape, state);
  terms.z = encode(tape, views, bound);
  for (Index s = 0; s < views.size(); ++s) {
    terms.x.push_back(tape.constant(*views[s].features));
    terms.x_hat.push_back(decode(terms.z[s], views[s].layer, bound, s));
  }
  terms.reconstruction = reconstruction_loss(terms.x, terms.x_hat, terms.z, views, w.lambda1);
  terms.contrastive = views.size() >= 2 ? contrastive_loss(terms.z, w.tau) : tape.constant(Matrix::Zero(1, 1));
  terms.fused = fuse(terms.z, w.beta);
  if (centroids) {
    Var mu = tape.parameter(*centroids);
    terms.q = soft_assignment(terms.fused, mu);
    terms.p = target ? *target : target_distribution(terms.q->value());
    terms.clustering = clustering_loss(*terms.q, terms.p);
  } else {
    terms.clustering = tape.constant(Matrix::Zero(1, 1));
  }
  terms.total = total_loss(terms.reconstruction.total, terms.contrastive, terms.clustering, w.lambda2, w.lambda3);
  return terms;
}

inline ObjectiveWeights objective_weights(const TrainConfig& c) {
  return {c.lambda1, c.effective_lambda2(), c.effective_lambda3(), c.tau, c.beta};
}

struct ClusterState {
  Matrix centroids;  // k x F
  Matrix q;          // N x k
  Matrix p;          // N x k
};

struct EpochRecord {
  Index epoch = 0;
  double reconstruction = 0.0;
  double contrastive = 0.0;
  double clustering = 0.0;
  double total = 0.0;
  std::optional<ClusteringScores> scores;
};

struct TrainedModel {
  EncoderState encoder;
  ClusterState clusters;
  Matrix fused_z;
  std::vector<int> labels;
  std::vector<EpochRecord> pretrain_history;
  std::vector<EpochRecord> history;
  bool converged = false;
};

using EpochCallback = std::function<void(const std::string& phase, const EpochRecord&)>;

// Ties resolve to the lowest cluster index.
inline std::vector<int> predict_labels(const Matrix& q) {
  std::vector<int> labels(static_cast<Index>(q.rows()));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j) {
      if (q(i, j) > q(i, best)) best = j;
    }
    labels[static_cast<Index>(i)] = static_cast<int>(best);
  }
  return labels;
}

// Fused embedding for the current parameters, without gradients.
inline Matrix fused_embedding(const std::vector<ViewInput>& views, EncoderState& state, const FusionWeights& beta) {
  Tape tape;
  BoundEncoder bound = bind(tape, state);
  auto z = encode(tape, views, bound);
  return fuse(z, beta).value();
}

namespace detail {

inline void check_views(const std::vector<ViewInput>& views, const TrainConfig& config) {
  if (views.empty()) throw DataError("graph has no layers");
  if (config.beta.beta.size() != views.size()) {
    throw ConfigError("config has " + std::to_string(config.beta.beta.size()) + " fusion weights for " +
                      std::to_string(views.size()) + " layer(s)");
  }
}

inline void require_finite(double value, const std::string& phase, Index epoch) {
  if (!std::isfinite(value)) {
    throw NumericalError(phase + " epoch " + std::to_string(epoch) + ": non-finite loss (" +
                         std::to_string(value) + ")");
  }
}

inline EpochRecord record_of(Index epoch, const ObjectiveTerms& terms) {
  return EpochRecord{epoch, terms.reconstruction.total.scalar(), terms.contrastive.scalar(),
                     terms.clustering.scalar(), terms.total.scalar(), std::nullopt};
}

}  // namespace detail

// Optimizes `state` on reconstruction + contrastive loss only.
inline std::vector<EpochRecord> pretrain(const std::vector<ViewInput>& views, EncoderState& state,
                                         const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  detail::check_views(views, config);
  ObjectiveWeights w = objective_weights(config);
  w.lambda3 = 0.0;
  Adam adam(state.parameters(), AdamOptions{config.lr});
  std::vector<EpochRecord> history;
  for (Index epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    Tape tape;
    adam.zero_grads();
    auto terms = build_objective(tape, views, state, nullptr, nullptr, w);
    detail::require_finite(terms.total.scalar(), "pretrain", epoch);
    history.push_back(detail::record_of(epoch, terms));
    if (on_epoch) on_epoch("pretrain", history.back());
    tape.backward(terms.total);
    adam.step();
  }
  return history;
}

inline EncoderState pretrain(const MultilayerGraph& g, const TrainConfig& config) {
  config.validate();
  const auto views = prepare_views(g);
  EncoderState state = init_encoder(view_widths(views), config.widths, config.seed);
  pretrain(views, state, config);
  return state;
}

inline TrainedModel train(const MultilayerGraph& g, const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  g.validate();
  if (g.k_classes < 2) throw ConfigError("need at least 2 clusters");
  if (g.n_nodes < g.k_classes) throw ConfigError("fewer nodes than clusters");
  const auto views = prepare_views(g);
  detail::check_views(views, config);
  if (views.size() < 2 && config.effective_lambda2() > 0.0) {
    warn("single-layer graph: contrastive term is 0");
  }

  TrainedModel model;
  model.encoder = init_encoder(view_widths(views), config.widths, config.seed);
  model.pretrain_history = pretrain(views, model.encoder, config, on_epoch);

  const ObjectiveWeights w = objective_weights(config);
  const bool train_centroids = w.lambda3 > 0.0;
  KMeansOptions km;
  km.restarts = config.kmeans_restarts;
  Parameter centroids("centroids", kmeans(fused_embedding(views, model.encoder, config.beta), g.k_classes,
                                          config.seed, km)
                                       .centroids);

  auto params = model.encoder.parameters();
  if (train_centroids) params.push_back(&centroids);
  Adam adam(params, AdamOptions{config.lr});

  Matrix target;
  Index stable_epochs = 0;
  Index starved_epochs = 0;
  bool starved_warned = false;
  for (Index epoch = 0; epoch < config.max_epochs; ++epoch) {
    Tape tape;
    adam.zero_grads();
    centroids.zero_grad();
    // P comes from the Q of the current parameters on refresh epochs.
    const bool refresh = epoch % config.p_update_every == 0;
    auto terms = build_objective(tape, views, model.encoder, &centroids, refresh ? nullptr : &target, w);
    if (refresh) target = terms.p;
    detail::require_finite(terms.total.scalar(), "train", epoch);

    EpochRecord rec = detail::record_of(epoch, terms);
    if (g.labels) rec.scores = evaluate_clustering(predict_labels(terms.q->value()), *g.labels);
    model.history.push_back(rec);
    if (on_epoch) on_epoch("train", rec);

    const Matrix& q = terms.q->value();
    bool starved = false;
    for (Eigen::Index j = 0; j < q.cols(); ++j) starved |= q.col(j).maxCoeff() < 1e-6;
    starved_epochs = starved ? starved_epochs + 1 : 0;
    if (starved_epochs >= 50 && !starved_warned) {
      warn("a cluster has received < 1e-6 soft assignment from every node for 50 epochs");
      starved_warned = true;
    }

    if (epoch > 0) {
      const double prev = model.history[epoch - 1].total;
      const double change = std::abs(rec.total - prev) / std::max(std::abs(prev), 1e-300);
      stable_epochs = change < config.convergence_tol ? stable_epochs + 1 : 0;
    }

    tape.backward(terms.total);
    adam.step();
    if (stable_epochs >= config.convergence_window) {
      model.converged = true;
      break;
    }
  }

  model.fused_z = fused_embedding(views, model.encoder, config.beta);
  if (config.ablation == Ablation::no_clu) {
    // Without the clustering term the centroids never moved; re-cluster the
    // final embedding instead.
    centroids.value = kmeans(model.fused_z, g.k_classes, config.seed, km).centroids;
  }
  model.clusters.centroids = centroids.value;
  model.clusters.q = soft_assignment_values(model.fused_z, centroids.value);
  model.clusters.p = target_distribution(model.clusters.q);
  model.labels = predict_labels(model.clusters.q);
  return model;
}

}  // namespace mgccn
