#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "interpconv/evaluation.hpp"
#include "interpconv/nn/network.hpp"
#include "interpconv/nn/trainer.hpp"

namespace interpconv {

/// Flat "section.key" -> raw value text. Strings keep their quotes stripped.
using KeyValues = std::map<std::string, std::string>;

/// TOML-style subset: `[section]` headers, `key = value` lines, `#` comments,
/// double-quoted strings, numbers and booleans.
KeyValues parse_key_values(std::string_view text);

/// "section.key=value" overrides applied on top of a file.
void apply_override(KeyValues& kv, std::string_view assignment);

enum class MaskMode { automatic, on, off };

struct DataConfig {
    std::filesystem::path path;
    int categories = 4;
    int train_per_category = 400;
    int test_per_category = 100;
    int image_size = 64;
    std::uint64_t seed = 0;  // defaults to the run seed
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output;
    DataConfig data;
    /// automatic: mask on exactly when the lambda coefficient is positive.
    MaskMode mask = MaskMode::automatic;
    nn::NetworkConfig network;
    nn::TrainConfig train;
    EvalConfig eval;
    std::filesystem::path checkpoint;  // empty: <output>/model.icnn

    std::filesystem::path checkpoint_path() const { return checkpoint.empty() ? output / "model.icnn" : checkpoint; }
    std::filesystem::path train_dir() const { return data.path / "train"; }
    std::filesystem::path test_dir() const { return data.path / "test"; }
};

/// Resolves and validates a run configuration. `seed` is mandatory; unknown
/// keys and malformed values raise ConfigError.
RunConfig resolve_run_config(const KeyValues& kv);
RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

/// Fully resolved configuration, as echoed in manifests.
nlohmann::json to_json(const RunConfig& config);

}  // namespace interpconv
