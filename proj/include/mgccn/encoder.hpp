#pragma once

// Attention-based graph autoencoder with one parameter set shared by every
// view. Each level transforms node features, scores every (i, j) neighbor
// pair, normalizes the scores over the neighborhood and aggregates:
//
//   g_j  = act(h_j W)
//   e_ij = sigmoid(g_i . c_self + g_j . c_neigh)
//   a_ij = softmax_{j in N(i)} e_ij
//   h'_i = sum_{j in N(i)} a_ij g_j
//
// act is the logistic sigmoid except on the last encoder level and the last
// decoder level, which are linear.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mgccn/graph.hpp"
#include "mgccn/tape.hpp"

namespace mgccn {

struct AttentionParams {
  Parameter weight;   // d_in x d_out
  Parameter c_self;   // d_out x 1
  Parameter c_neigh;  // d_out x 1
  bool linear = false;
};

struct EncoderState {
  std::vector<Index> view_widths;  // attribute width of each view
  std::vector<Index> widths;       // encoder level widths, last is the embedding width
  Index stack_input_width = 0;     // width entering the shared stack
  // Per-view untied linear maps, present only when view widths differ.
  std::vector<Parameter> input_proj;   // d_s x stack_input_width
  std::vector<Parameter> output_proj;  // stack_input_width x d_s
  std::vector<AttentionParams> encoder;
  std::vector<AttentionParams> decoder;  // decoder[0] maps widths.back() upward

  Index embedding_width() const { return widths.back(); }
  bool projected() const { return !input_proj.empty(); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& p : input_proj) out.push_back(&p);
    for (auto* stack : {&encoder, &decoder}) {
      for (auto& level : *stack) {
        out.push_back(&level.weight);
        out.push_back(&level.c_self);
        out.push_back(&level.c_neigh);
      }
    }
    for (auto& p : output_proj) out.push_back(&p);
    return out;
  }
};

namespace detail {

// Uniform in [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    // 53 random bits mapped to [0, 1); identical on every platform.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = (2.0 * u - 1.0) * limit;
  }
  return m;
}

inline AttentionParams make_level(const std::string& prefix, Index d_in, Index d_out, bool linear,
                                  std::mt19937_64& rng) {
  AttentionParams level;
  level.weight = Parameter(prefix + ".weight", glorot_uniform(d_in, d_out, rng));
  level.c_self = Parameter(prefix + ".c_self", glorot_uniform(d_out, 1, rng));
  level.c_neigh = Parameter(prefix + ".c_neigh", glorot_uniform(d_out, 1, rng));
  level.linear = linear;
  return level;
}

}  // namespace detail

inline EncoderState init_encoder(const std::vector<Index>& view_widths, const std::vector<Index>& widths,
                                 std::uint64_t seed) {
  if (view_widths.empty()) throw ConfigError("init_encoder: no views");
  if (widths.empty()) throw ConfigError("init_encoder: no encoder levels");
  for (Index w : widths) {
    if (w == 0) throw ConfigError("init_encoder: zero layer width");
  }
  std::mt19937_64 rng(seed);
  EncoderState state;
  state.view_widths = view_widths;
  state.widths = widths;

  bool uniform = true;
  for (Index d : view_widths) uniform &= d == view_widths.front();
  state.stack_input_width = uniform ? view_widths.front() : widths.front();
  if (!uniform) {
    for (Index s = 0; s < view_widths.size(); ++s) {
      state.input_proj.emplace_back("input_proj." + std::to_string(s),
                                    detail::glorot_uniform(view_widths[s], state.stack_input_width, rng));
    }
  }

  std::vector<Index> dims{state.stack_input_width};
  dims.insert(dims.end(), widths.begin(), widths.end());
  const Index levels = widths.size();
  for (Index l = 0; l < levels; ++l) {
    state.encoder.push_back(detail::make_level("encoder." + std::to_string(l), dims[l], dims[l + 1],
                                               l + 1 == levels, rng));
  }
  for (Index l = levels; l-- > 0;) {
    const Index idx = levels - 1 - l;
    state.decoder.push_back(detail::make_level("decoder." + std::to_string(idx), dims[l + 1], dims[l],
                                               l == 0, rng));
  }
  if (!uniform) {
    for (Index s = 0; s < view_widths.size(); ++s) {
      state.output_proj.emplace_back("output_proj." + std::to_string(s),
                                     detail::glorot_uniform(state.stack_input_width, view_widths[s], rng));
    }
  }
  return state;
}

// One view as consumed by the model: normalized layer plus row-normalized
// attributes (the reconstruction target).
struct ViewInput {
  NormalizedLayer layer;
  std::shared_ptr<const Matrix> features;
};

inline std::vector<ViewInput> prepare_views(const MultilayerGraph& g) {
  std::vector<ViewInput> views;
  std::map<const Matrix*, std::shared_ptr<const Matrix>> normalized;
  for (const auto& layer : g.layers) {
    auto& feats = normalized[layer.attributes.get()];
    if (!feats) feats = std::make_shared<const Matrix>(row_l2_normalized(*layer.attributes));
    views.push_back(ViewInput{normalize_layer(layer.adjacency), feats});
  }
  return views;
}

inline std::vector<Index> view_widths(const std::vector<ViewInput>& views) {
  std::vector<Index> out;
  for (const auto& v : views) out.push_back(static_cast<Index>(v.features->cols()));
  return out;
}

// Parameters of an EncoderState recorded on one tape. Built once per step so
// every view reads the same leaves.
struct BoundLevel {
  Var weight, c_self, c_neigh;
  bool linear = false;
};

struct BoundEncoder {
  std::vector<Var> input_proj, output_proj;
  std::vector<BoundLevel> encoder, decoder;
};

inline BoundEncoder bind(Tape& tape, EncoderState& state) {
  BoundEncoder b;
  for (auto& p : state.input_proj) b.input_proj.push_back(tape.parameter(p));
  for (auto& level : state.encoder) {
    b.encoder.push_back({tape.parameter(level.weight), tape.parameter(level.c_self),
                         tape.parameter(level.c_neigh), level.linear});
  }
  for (auto& level : state.decoder) {
    b.decoder.push_back({tape.parameter(level.weight), tape.parameter(level.c_self),
                         tape.parameter(level.c_neigh), level.linear});
  }
  for (auto& p : state.output_proj) b.output_proj.push_back(tape.parameter(p));
  return b;
}

struct AttentionTrace {
  Var transformed;   // act(H W), N x d_out
  Var scores;        // e_ij, nnz x 1
  Var coefficients;  // a_ij, nnz x 1
  Var output;        // N x d_out
};

namespace detail {

inline Var transform(Var h_prev, const BoundLevel& level) {
  if (h_prev.cols() != level.weight.rows()) {
    throw ShapeError("attention layer: input width " + std::to_string(h_prev.cols()) + " != weight rows " +
                     std::to_string(level.weight.rows()));
  }
  Var pre = matmul(h_prev, level.weight);
  return level.linear ? pre : sigmoid(pre);
}

inline Var scores_of(Var transformed, const NormalizedLayer& layer, const BoundLevel& level) {
  if (static_cast<Index>(transformed.rows()) != layer.n_nodes()) {
    throw ShapeError("attention_scores: node count differs from layer");
  }
  Var self_part = matmul(transformed, level.c_self);
  Var neigh_part = matmul(transformed, level.c_neigh);
  return sigmoid(edge_scores(layer.a_hat, self_part, neigh_part));
}

}  // namespace detail

// Relevance scores e_ij for every stored neighbor pair of `layer`, in CSR order.
inline Var attention_scores(Var h_prev, const NormalizedLayer& layer, const BoundLevel& level) {
  return detail::scores_of(detail::transform(h_prev, level), layer, level);
}

inline AttentionTrace attention_layer_trace(Var h_prev, const NormalizedLayer& layer, const BoundLevel& level) {
  AttentionTrace trace;
  trace.transformed = detail::transform(h_prev, level);
  trace.scores = detail::scores_of(trace.transformed, layer, level);
  trace.coefficients = neighborhood_softmax(layer.a_hat, trace.scores);
  trace.output = weighted_spmm(layer.a_hat, trace.coefficients, trace.transformed);
  return trace;
}

inline Var attention_layer_forward(Var h_prev, const NormalizedLayer& layer, const BoundLevel& level) {
  return attention_layer_trace(h_prev, layer, level).output;
}

// Final encoder output Z_s for each view.
inline std::vector<Var> encode(Tape& tape, const std::vector<ViewInput>& views, const BoundEncoder& params) {
  if (!params.input_proj.empty() && params.input_proj.size() != views.size()) {
    throw ShapeError("encode: input projection count differs from view count");
  }
  std::vector<Var> out;
  for (Index s = 0; s < views.size(); ++s) {
    Var h = tape.constant(*views[s].features);
    if (!params.input_proj.empty()) h = matmul(h, params.input_proj[s]);
    for (const auto& level : params.encoder) h = attention_layer_forward(h, views[s].layer, level);
    out.push_back(h);
  }
  return out;
}

// Reconstructed attributes X_hat_s from an embedding.
inline Var decode(Var z, const NormalizedLayer& layer, const BoundEncoder& params, Index view) {
  Var h = z;
  for (const auto& level : params.decoder) h = attention_layer_forward(h, layer, level);
  if (!params.output_proj.empty()) h = matmul(h, params.output_proj.at(view));
  return h;
}

}  // namespace mgccn
