#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgccn/errors.hpp"
#include "mgccn/losses.hpp"

namespace mgccn {

enum class Ablation { full, no_con, no_clu };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_con: return "no_con";
    case Ablation::no_clu: return "no_clu";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_con") return Ablation::no_con;
  if (s == "no_clu") return Ablation::no_clu;
  throw ConfigError("unknown ablation '" + s + "' (expected full, no_con or no_clu)");
}

struct TrainConfig {
  double lambda1 = 0.5;
  double lambda2 = 10.0;
  double lambda3 = 0.5;
  double tau = 0.5;
  FusionWeights beta{{1.0, 1.0}};
  std::vector<Index> widths{512, 512};
  double lr = 0.003;
  Index max_epochs = 1000;
  Index pretrain_epochs = 200;
  std::uint64_t seed = 0;
  Index p_update_every = 1;
  Ablation ablation = Ablation::full;
  // Stop once the relative change of the total loss stays below
  // convergence_tol for convergence_window consecutive epochs.
  double convergence_tol = 1e-6;
  Index convergence_window = 20;
  Index kmeans_restarts = 10;

  double effective_lambda2() const { return ablation == Ablation::no_con ? 0.0 : lambda2; }
  double effective_lambda3() const { return ablation == Ablation::no_clu ? 0.0 : lambda3; }

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) throw ConfigError("lambdas must be non-negative");
    if (widths.empty()) throw ConfigError("widths must list at least one encoder level");
    if (p_update_every < 1) throw ConfigError("p_update_every must be at least 1");
    beta.validate();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"lambda1", c.lambda1},
                        {"lambda2", c.lambda2},
                        {"lambda3", c.lambda3},
                        {"tau", c.tau},
                        {"beta", c.beta.beta},
                        {"widths", c.widths},
                        {"lr", c.lr},
                        {"max_epochs", c.max_epochs},
                        {"pretrain_epochs", c.pretrain_epochs},
                        {"seed", c.seed},
                        {"p_update_every", c.p_update_every},
                        {"ablation", to_string(c.ablation)},
                        {"convergence_tol", c.convergence_tol},
                        {"convergence_window", c.convergence_window},
                        {"kmeans_restarts", c.kmeans_restarts}};
}

// Fields absent from `j` keep their defaults; unknown fields are rejected so
// typos do not silently fall back to defaults.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "lambda1", "lambda2",         "lambda3",  "tau",         "beta",          "widths",
      "lr",      "max_epochs",      "pretrain_epochs", "seed", "p_update_every", "ablation",
      "convergence_tol", "convergence_window", "kmeans_restarts", "comment"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda3 = j.value("lambda3", c.lambda3);
    c.tau = j.value("tau", c.tau);
    c.beta = FusionWeights(j.value("beta", c.beta.beta));
    c.widths = j.value("widths", c.widths);
    c.lr = j.value("lr", c.lr);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.seed = j.value("seed", c.seed);
    c.p_update_every = j.value("p_update_every", c.p_update_every);
    c.ablation = parse_ablation(j.value("ablation", to_string(c.ablation)));
    c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
    c.convergence_window = j.value("convergence_window", c.convergence_window);
    c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mgccn
