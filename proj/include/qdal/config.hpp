#pragma once

// Experiment configuration: JSON schema, defaults, environment overrides.
//
// {
//   "dataset":     {"synthetic": {n_train, n_val, n_test, dim, level_proportions,
//                                 noise_sd, hardness_skew, seed}}
//                  | {"path": "file.jsonl[.gz]", "format": "jsonl"|"csv"},
//   "loop":        {initial_labeled, final_labeled, runs, base_seed, seeds, record_wall_time},
//   "acquisition": {batch_k, beta, mc_samples, pool_subset_m},
//   "regressor":   {preset, hidden_widths, dropout_rate, learning_rate, weight_decay, epochs,
//                   batch_size, warmup_ratio, beta1, beta2, adam_eps, mask_mode},
//   "strategies":  ["uniform", "topk_variance", "powervariance"],
//   "baselines":   ["random", "majority", "supervised"],
//   "output_dir":  "results",
//   "threads":     0,
//   "isa":         "scalar"|"avx2"
// }
//
// Every key is optional; unknown keys are rejected. QDAL_SEED overrides loop.base_seed and
// QDAL_OUT overrides output_dir. A run manifest is accepted wherever a config is.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdal/acquisition.hpp"
#include "qdal/data.hpp"
#include "qdal/kernels.hpp"
#include "qdal/loop.hpp"

namespace qdal {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetSource {
    std::optional<SyntheticConfig> synthetic;
    std::optional<std::filesystem::path> path;
    std::optional<DatasetFormat> format;
};

struct ExperimentConfig {
    DatasetSource dataset;
    LoopConfig loop;
    std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    std::vector<Baseline> baselines{Baseline::random, Baseline::majority, Baseline::supervised};
    std::vector<std::uint64_t> seeds;  // resolved: explicit list or base_seed + [0, runs)
    std::filesystem::path output_dir = "results";
    unsigned threads = 0;              // 0 = one per hardware thread
    std::optional<kernels::Isa> isa;
};

/// Desk-scale defaults with a synthetic dataset.
ExperimentConfig default_config();

/// `base_dir` resolves a relative dataset path.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Reads a config or manifest file and applies environment overrides.
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_env_overrides(ExperimentConfig& config);

/// Fully resolved config; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const ExperimentConfig& config);

Dataset materialize_dataset(const ExperimentConfig& config);

std::vector<std::string> split_comma_list(const std::string& text);
std::vector<Strategy> parse_strategy_list(const std::vector<std::string>& names);
std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& values);

}  // namespace qdal
