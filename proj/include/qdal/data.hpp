#pragma once

// Synthetic datasets with an imbalanced, minority-hard level geometry, and JSONL/CSV
// dataset files (optionally gzip-compressed).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "qdal/core.hpp"

namespace qdal {

struct SyntheticConfig {
    std::size_t n_train = 8000;
    std::size_t n_val = 500;
    std::size_t n_test = 2000;
    std::size_t dim = 16;
    LevelArray level_proportions{0.25, 0.62, 0.13};
    double noise_sd = 0.3;
    double hardness_skew = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Generated examples also carry their continuous latent difficulty, for diagnostics.
struct SyntheticDataset {
    Dataset dataset;
    std::vector<double> train_latent;
};

SyntheticDataset gen_synthetic_with_latent(const SyntheticConfig& config);
Dataset gen_synthetic(const SyntheticConfig& config);

enum class DatasetFormat { jsonl, csv };

/// Infers the format from the extension, ignoring a trailing ".gz".
std::optional<DatasetFormat> format_from_path(const std::filesystem::path& path);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    /// 1-based line, or 0 for file-level problems.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

Dataset load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format = std::nullopt);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  std::optional<DatasetFormat> format = std::nullopt);

}  // namespace qdal
