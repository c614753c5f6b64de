// mgccn command-line driver.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgccn/mgccn.hpp"

namespace fs = std::filesystem;
using namespace mgccn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// "3", "0..4" or "0,2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto parse_one = [&](const std::string& s) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw ConfigError("bad seed '" + s + "'");
    return v;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = parse_one(text.substr(0, dots));
    const auto hi = parse_one(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    seeds.push_back(parse_one(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

struct RunOptions {
  std::string dataset;
  std::string config;
  std::string out;
  std::string seeds = "0";
  bool force = false;
  int log_every = 50;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--dataset", o.dataset, "dataset directory containing manifest.json")->required();
  cmd->add_option("--config", o.config, "training config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--seeds", o.seeds, "seed, list (0,3,5) or range (0..4)")->capture_default_str();
  cmd->add_flag("--force", o.force, "overwrite an existing non-empty output directory");
  cmd->add_option("--log-every", o.log_every, "progress line every N epochs, 0 for silent")->capture_default_str();
}

void prepare_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) throw ConfigError(out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out) && !force) {
    throw ConfigError(out.string() + " is not empty (use --force to overwrite)");
  }
  fs::create_directories(out);
}

EpochCallback progress(std::uint64_t seed, int every) {
  if (every <= 0) return {};
  return [seed, every](const std::string& phase, const EpochRecord& r) {
    if (r.epoch % static_cast<Index>(every) != 0) return;
    std::fprintf(stderr, "seed %llu %s epoch %zu: L_re %.6g L_con %.6g L_clu %.6g total %.6g",
                 static_cast<unsigned long long>(seed), phase.c_str(), r.epoch, r.reconstruction, r.contrastive,
                 r.clustering, r.total);
    if (r.scores) std::fprintf(stderr, " acc %.4f nmi %.4f", r.scores->acc, r.scores->nmi);
    std::fputc('\n', stderr);
  };
}

int run_seeds(const MultilayerGraph& g, const TrainConfig& base, const RunOptions& o) {
  const auto seeds = parse_seeds(o.seeds);
  const fs::path out = o.out;
  prepare_out_dir(out, o.force);
  std::vector<std::optional<ClusteringScores>> scores;
  for (auto seed : seeds) {
    TrainConfig config = base;
    config.seed = seed;
    const auto dir = out / ("seed_" + std::to_string(seed));
    auto result = run_to_directory(g, config, dir, progress(seed, o.log_every));
    scores.push_back(result.scores);
    std::cout << "seed " << seed << ": " << (result.model.converged ? "converged" : "max epochs") << " after "
              << result.model.history.size() << " epochs";
    if (result.scores) {
      std::cout << ", acc " << result.scores->acc << " nmi " << result.scores->nmi << " ari " << result.scores->ari
                << " f1 " << result.scores->f1;
    }
    std::cout << '\n';
  }
  write_json(out / "metrics.json", aggregate_scores(seeds, scores));
  return 0;
}

// Applies an ablation variant to the graph and config.
void apply_variant(const std::string& variant, MultilayerGraph& g, TrainConfig& config) {
  if (variant == "no_con" || variant == "no_clu") {
    config.ablation = parse_ablation(variant);
    return;
  }
  const auto colon = variant.find(':');
  const auto kind = variant.substr(0, colon);
  if (colon == std::string::npos || (kind != "drop_layer" && kind != "drop_view")) {
    throw ConfigError("unknown variant '" + variant + "' (expected no_con, no_clu, drop_layer:i or drop_view:i)");
  }
  Index index = 0;
  try {
    index = std::stoul(variant.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad layer index in '" + variant + "'");
  }
  if (index >= g.n_layers()) throw ConfigError("variant '" + variant + "': no such layer");
  if (kind == "drop_view") {
    // Removing an attribute view only makes sense when its graph survives in
    // another layer; otherwise the graph would be removed as well.
    bool graph_kept = false;
    for (Index s = 0; s < g.n_layers(); ++s) {
      graph_kept |= s != index && g.layers[s].adjacency == g.layers[index].adjacency;
    }
    if (!graph_kept) throw ConfigError("drop_view:" + std::to_string(index) + ": layer's graph is unique, use drop_layer");
  }
  g = drop_layer(g, index);
  auto beta = config.beta.beta;
  if (beta.size() > index) beta.erase(beta.begin() + static_cast<std::ptrdiff_t>(index));
  config.beta = FusionWeights(beta);
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
  GradcheckOptions opt;
  opt.corrupt = corrupt;
  const auto report = run_gradcheck(seed, opt);
  std::printf("%-16s %14s %14s %10s\n", "term", "max_rel_error", "max_abs_error", "status");
  for (const auto& t : report.terms) {
    std::printf("%-16s %14.3e %14.3e %10s\n", t.name.c_str(), t.max_rel_error, t.max_abs_error,
                t.passed ? "ok" : "FAILED");
  }
  std::printf("%s\n", report.passed ? "gradcheck passed" : "gradcheck FAILED");
  return report.passed ? 0 : kExitNumerical;
}

int cmd_export(const std::string& checkpoint, const std::string& dataset, const std::string& out) {
  const auto ck = load_checkpoint(checkpoint);
  const auto g = load_multilayer_graph(dataset);
  const auto views = prepare_views(g);
  if (view_widths(views) != ck.encoder.view_widths) {
    throw DataError("dataset views do not match the checkpoint's input widths");
  }
  auto encoder = ck.encoder;
  const Matrix z = fused_embedding(views, encoder, ck.config.beta);
  write_embeddings_csv(out, z, g.labels);
  std::cout << "wrote " << z.rows() << " x " << z.cols() << " embeddings to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilayer graph contrastive clustering"};
  app.require_subcommand(1);

  RunOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train on a dataset for one or more seeds");
  add_run_options(train_cmd, train_opts);

  RunOptions ablate_opts;
  std::string variant;
  auto* ablate_cmd = app.add_subcommand("ablate", "train an ablation variant");
  add_run_options(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--variant", variant, "no_con | no_clu | drop_layer:i | drop_view:i")->required();

  std::uint64_t gc_seed = 0;
  bool gc_corrupt = false;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  gc_cmd->add_option("--seed", gc_seed, "instance seed")->capture_default_str();
  gc_cmd->add_flag("--corrupt", gc_corrupt, "perturb one analytic gradient (negative control)")
      ->group("");

  std::string ex_checkpoint, ex_dataset, ex_out = "embeddings.csv";
  auto* export_cmd = app.add_subcommand("export", "write the fused embedding of a trained model");
  export_cmd->add_option("--checkpoint", ex_checkpoint, "checkpoint stem, e.g. run/seed_0/checkpoint")->required();
  export_cmd->add_option("--dataset", ex_dataset, "dataset directory")->required();
  export_cmd->add_option("--out", ex_out, "output CSV")->capture_default_str();

  auto* convert_cmd = app.add_subcommand("convert", "convert raw datasets to the manifest format");
  convert_cmd->require_subcommand(1);
  std::string pl_content, pl_cites, pl_out;
  auto* planetoid_cmd = convert_cmd->add_subcommand("planetoid", "<name>.content + <name>.cites");
  planetoid_cmd->add_option("--content", pl_content)->required()->check(CLI::ExistingFile);
  planetoid_cmd->add_option("--cites", pl_cites)->required()->check(CLI::ExistingFile);
  planetoid_cmd->add_option("--out", pl_out)->required();
  std::vector<std::string> dn_adjacency;
  std::string dn_features, dn_labels, dn_out;
  auto* dense_cmd = convert_cmd->add_subcommand("dense", "dense adjacency/feature/label text matrices");
  dense_cmd->add_option("--adjacency", dn_adjacency, "one file per layer (repeatable)")->required();
  dense_cmd->add_option("--features", dn_features)->required()->check(CLI::ExistingFile);
  dense_cmd->add_option("--labels", dn_labels, "integer column or one-hot rows");
  dense_cmd->add_option("--out", dn_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) {
      const auto g = load_multilayer_graph(train_opts.dataset);
      return run_seeds(g, load_config(train_opts.config), train_opts);
    }
    if (*ablate_cmd) {
      auto g = load_multilayer_graph(ablate_opts.dataset);
      auto config = load_config(ablate_opts.config);
      apply_variant(variant, g, config);
      return run_seeds(g, config, ablate_opts);
    }
    if (*gc_cmd) return cmd_gradcheck(gc_seed, gc_corrupt);
    if (*export_cmd) return cmd_export(ex_checkpoint, ex_dataset, ex_out);
    if (*planetoid_cmd) {
      convert_planetoid(pl_content, pl_cites, pl_out);
      return 0;
    }
    if (*dense_cmd) {
      std::vector<fs::path> adjacency(dn_adjacency.begin(), dn_adjacency.end());
      std::optional<fs::path> labels;
      if (!dn_labels.empty()) labels = dn_labels;
      convert_dense(adjacency, dn_features, labels, dn_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
