#pragma once

// Run directory layout written by `mgccn train`:
//   labels.csv            node_id,label
//   history.csv           joint-phase epochs: epoch,L_re,L_con,L_clu,total,acc,nmi,ari,f1
//   pretrain_history.csv  same columns for the pretraining phase
//   metrics.json          {acc, f1, nmi, ari}, null when the dataset has no labels
//   checkpoint.json/.bin

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgccn/checkpoint.hpp"
#include "mgccn/dataset_io.hpp"
#include "mgccn/trainer.hpp"

namespace mgccn {

namespace detail {

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline void write_labels_csv(const fs::path& path, std::span<const int> labels) {
  auto out = detail::open_output(path);
  out << "node_id,label\n";
  for (Index i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

inline void write_history_csv(const fs::path& path, std::span<const EpochRecord> history) {
  auto out = detail::open_output(path);
  out << "epoch,L_re,L_con,L_clu,total,acc,nmi,ari,f1\n";
  using detail::format_double;
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.reconstruction) << ',' << format_double(r.contrastive) << ','
        << format_double(r.clustering) << ',' << format_double(r.total);
    if (r.scores) {
      out << ',' << format_double(r.scores->acc) << ',' << format_double(r.scores->nmi) << ','
          << format_double(r.scores->ari) << ',' << format_double(r.scores->f1);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

inline nlohmann::json scores_json(const std::optional<ClusteringScores>& s) {
  if (!s) return {{"acc", nullptr}, {"f1", nullptr}, {"nmi", nullptr}, {"ari", nullptr}};
  return {{"acc", s->acc}, {"f1", s->f1}, {"nmi", s->nmi}, {"ari", s->ari}};
}

// {"mean": {...}, "per_seed": {"<seed>": {...}}}; the mean is null when any
// seed lacks scores.
inline nlohmann::json aggregate_scores(std::span<const std::uint64_t> seeds,
                                       std::span<const std::optional<ClusteringScores>> scores) {
  nlohmann::json per_seed = nlohmann::json::object();
  std::optional<ClusteringScores> mean = ClusteringScores{};
  for (Index i = 0; i < seeds.size(); ++i) {
    per_seed[std::to_string(seeds[i])] = scores_json(scores[i]);
    if (!scores[i]) {
      mean.reset();
    } else if (mean) {
      mean->acc += scores[i]->acc;
      mean->f1 += scores[i]->f1;
      mean->nmi += scores[i]->nmi;
      mean->ari += scores[i]->ari;
    }
  }
  if (mean && !seeds.empty()) {
    const double n = static_cast<double>(seeds.size());
    mean->acc /= n;
    mean->f1 /= n;
    mean->nmi /= n;
    mean->ari /= n;
  }
  if (seeds.empty()) mean.reset();
  return {{"mean", scores_json(mean)}, {"per_seed", per_seed}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

inline void write_embeddings_csv(const fs::path& path, const Matrix& z, const std::optional<std::vector<int>>& labels) {
  if (labels && labels->size() != static_cast<Index>(z.rows())) throw ShapeError("embeddings: label count mismatch");
  auto out = detail::open_output(path);
  for (Eigen::Index c = 0; c < z.cols(); ++c) out << (c ? "," : "") << 'z' << c;
  if (labels) out << ",label";
  out << '\n';
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) out << (c ? "," : "") << detail::format_double(z(r, c));
    if (labels) out << ',' << (*labels)[static_cast<Index>(r)];
    out << '\n';
  }
}

struct RunResult {
  TrainedModel model;
  std::optional<ClusteringScores> scores;
};

// Trains one seed and writes its run directory.
inline RunResult run_to_directory(const MultilayerGraph& g, const TrainConfig& config, const fs::path& dir,
                                  const EpochCallback& on_epoch = {}) {
  fs::create_directories(dir);
  RunResult result{train(g, config, on_epoch), std::nullopt};
  if (g.labels) result.scores = evaluate_clustering(result.model.labels, *g.labels);
  write_labels_csv(dir / "labels.csv", result.model.labels);
  write_history_csv(dir / "history.csv", result.model.history);
  write_history_csv(dir / "pretrain_history.csv", result.model.pretrain_history);
  write_json(dir / "metrics.json", scores_json(result.scores));
  save_checkpoint(dir / "checkpoint", config, result.model.encoder, result.model.clusters.centroids);
  return result;
}

}  // namespace mgccn
