#pragma once

// Parameter checkpoints.
//
// Binary layout (all integers and floats little-endian):
//
//   offset 0   8 bytes   magic "EANNET01"
//              u32       number of networks N
//   N times:
//              u32       number of layers L
//              u64[L+1]  layer_dims
//              u8[L]     activations (0 relu, 1 sigmoid, 2 identity)
//              L times:  f64[rows*cols] weights, row-major; f64[rows] biases
//
// A JSON sidecar "<path>.json" carries the network names, shapes, an
// FNV-1a 64 digest of the binary file, and caller-supplied metadata.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ean/nn.hpp"

namespace ean {

struct NamedNet {
  std::string name;
  nn::MlpParams params;
};

std::vector<std::uint8_t> serialize_nets(std::span<const nn::MlpParams> nets);
std::vector<nn::MlpParams> deserialize_nets(std::span<const std::uint8_t> bytes);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string digest_hex(std::uint64_t digest);

/// Writes `path` and `path + ".json"`; returns the digest string.
std::string save_checkpoint(const std::filesystem::path& path, std::span<const NamedNet> nets,
                            const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
  std::vector<NamedNet> nets;
  nlohmann::json sidecar;
  std::string digest;
};

/// Reads both files and verifies the sidecar digest against the binary.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string file_digest(const std::filesystem::path& path);

// JSON forms used for resumable state. Doubles are written in shortest
// round-trip form, so a JSON round trip is bitwise exact.
nlohmann::json to_json(const nn::MlpParams& params);
nn::MlpParams mlp_from_json(const nlohmann::json& j);
nlohmann::json to_json(const nn::GradientBundle& grads);
nn::GradientBundle gradients_from_json(const nlohmann::json& j);
nlohmann::json to_json(const nn::OptimizerState& state);
nn::OptimizerState optimizer_from_json(const nlohmann::json& j);

}  // namespace ean
