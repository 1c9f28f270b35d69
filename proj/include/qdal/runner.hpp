#pragma once

// `run` and `validate` subcommands plus the per-run result file formats.
//
// Results directory layout:
//   manifest.json                      resolved config, seeds, artifacts, timestamps
//   runs/<strategy>_seed<k>.csv        one learning curve per (strategy, seed)
//   acquisitions/<strategy>_seed<k>.jsonl
//   aggregate.csv                      per-strategy mean/se across seeds
//   baselines.csv
//   FAILED                             only present if some cell failed

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdal/config.hpp"

namespace qdal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeFailure = 2;

struct RunOptions {
    bool quiet = false;
    std::ostream* log = nullptr;  // defaults to std::cerr
};

struct RunSummary {
    int exit_code = kExitOk;
    std::filesystem::path results_dir;
    std::vector<std::string> errors;
};

RunSummary cmd_run(const ExperimentConfig& config, const RunOptions& options = {});

struct Diagnostics {
    std::vector<std::string> fatal;
    std::vector<std::string> notes;
    nlohmann::ordered_json resolved;

    [[nodiscard]] bool ok() const noexcept { return fatal.empty(); }
};

Diagnostics cmd_validate(const std::filesystem::path& config_path);
Diagnostics cmd_validate(const ExperimentConfig& config);

// Result files.
std::string run_file_stem(Strategy strategy, std::uint64_t seed);
std::string format_number(double v);
std::string run_csv_header();
std::string format_run_csv_row(const MetricsRow& row);
std::vector<MetricsRow> read_run_csv(const std::filesystem::path& path);
std::string aggregate_csv(Strategy strategy, const std::vector<AggregateRow>& rows, bool with_header);

/// Mean and standard error per round; unlike aggregate_runs, a single curve is accepted.
std::vector<AggregateRow> aggregate_curves(std::span<const LearningCurve> curves);

}  // namespace qdal
