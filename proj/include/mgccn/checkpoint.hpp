#pragma once

// Checkpoint = <stem>.json index + <stem>.bin payload.
//
// The payload is the concatenation of every tensor as row-major IEEE-754
// binary64 in little-endian byte order. The index records, per tensor, its
// name, shape and byte offset, together with the training config and the view
// widths needed to rebuild the encoder structure.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgccn/config.hpp"
#include "mgccn/encoder.hpp"

namespace mgccn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Checkpoint {
  TrainConfig config;
  EncoderState encoder;
  Matrix centroids;
};

inline void save_checkpoint(const std::filesystem::path& stem, const TrainConfig& config, EncoderState& encoder,
                            const Matrix& centroids) {
  nlohmann::json index;
  index["format"] = "mgccn-checkpoint-v1";
  index["config"] = to_json(config);
  index["view_widths"] = encoder.view_widths;
  index["tensors"] = nlohmann::json::array();

  auto bin_path = stem;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write " + bin_path.string());
  std::uint64_t offset = 0;
  auto put = [&](const std::string& name, const Matrix& m) {
    index["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
    bin.write(reinterpret_cast<const char*>(m.data()), bytes);
    offset += static_cast<std::uint64_t>(bytes);
  };
  for (auto* p : encoder.parameters()) put(p->name, p->value);
  put("centroids", centroids);
  if (!bin) throw DataError("write failed for " + bin_path.string());

  auto json_path = stem;
  json_path += ".json";
  std::ofstream js(json_path);
  if (!js) throw DataError("cannot write " + json_path.string());
  js << index.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  auto bin_path = stem;
  bin_path += ".bin";
  std::ifstream js(json_path);
  if (!js) throw DataError("cannot open " + json_path.string());
  nlohmann::json index;
  try {
    js >> index;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open " + bin_path.string());
  std::vector<char> payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  try {
    if (index.at("format") != "mgccn-checkpoint-v1") throw DataError("unsupported checkpoint format");
    Checkpoint ck;
    ck.config = config_from_json(index.at("config"));
    ck.encoder = init_encoder(index.at("view_widths").get<std::vector<Index>>(), ck.config.widths, 0);

    std::map<std::string, Matrix*> slots;
    for (auto* p : ck.encoder.parameters()) slots[p->name] = &p->value;
    slots["centroids"] = &ck.centroids;
    Index filled = 0;
    for (const auto& t : index.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      auto it = slots.find(name);
      if (it == slots.end()) throw DataError("checkpoint: unexpected tensor '" + name + "'");
      Matrix& dst = *it->second;
      if (name != "centroids" && (dst.rows() != rows || dst.cols() != cols)) {
        throw DataError("checkpoint: tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(dst.rows()) + "x" +
                        std::to_string(dst.cols()));
      }
      const std::uint64_t bytes = static_cast<std::uint64_t>(rows * cols) * sizeof(double);
      if (offset + bytes > payload.size()) throw DataError("checkpoint: payload truncated at '" + name + "'");
      dst.resize(rows, cols);
      std::memcpy(dst.data(), payload.data() + offset, bytes);
      ++filled;
    }
    if (filled != slots.size()) throw DataError("checkpoint: missing tensors");
    for (auto* p : ck.encoder.parameters()) p->zero_grad();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }
}

}  // namespace mgccn
