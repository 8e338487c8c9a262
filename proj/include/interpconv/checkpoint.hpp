#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "interpconv/nn/network.hpp"

namespace interpconv {

/// Layout, all integers little-endian:
///   "ICNN" | u32 version | u32 length + config JSON
///   u32 tensor count | per tensor: u32 name length + name, u32 ndims, u64 dims[], f64 values[]
///   u32 interp layer count | per layer: u64 layer index, u32 filters, f64 lambda mean, u8 lambda init,
///     per filter: u8 initialized, i32 assigned (-1 none), f64 mean_px, f64 lambda,
///     f64 filter-lambda mean, u8 filter-lambda init, u32 template count, f64 z[]
inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json network_config_to_json(const nn::NetworkConfig& config);
nn::NetworkConfig network_config_from_json(const nlohmann::json& j);

/// `run_config` is echoed; its "network" member is replaced by the network's own config.
std::vector<std::uint8_t> serialize_checkpoint(nn::Network& network, const nlohmann::json& run_config);
void save_checkpoint(const std::filesystem::path& path, nn::Network& network, const nlohmann::json& run_config);

struct LoadedCheckpoint {
    nn::Network network;
    nlohmann::json run_config;
};

/// Throws DataError for a missing, foreign, truncated or inconsistent file.
LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace interpconv
