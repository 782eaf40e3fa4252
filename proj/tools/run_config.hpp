#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ems/eval.hpp"

namespace ems::cli {

/// Settings shared by every subcommand. Sources in increasing precedence:
/// built-in defaults, --config file, --set key=value, dedicated flags.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t k = 10;
    double fps = 25.0;
    std::vector<std::size_t> windows = kDefaultSweepWindows;
    bool window_overridden = false; // window size given explicitly rather than per state
    StateModelConfig model;

    /// Applies one key. Throws InvalidArgument for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void load_file(const std::filesystem::path& path);

    /// Model config for a state: the per-state default window unless overridden.
    StateModelConfig model_for(EmotionState s) const;
    EvalConfig eval_for(EmotionState s) const;

    nlohmann::json to_json() const;
};

/// Names accepted by RunConfig::set.
const std::vector<std::string>& config_keys();

} // namespace ems::cli
