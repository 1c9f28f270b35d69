#pragma once

// Domain types, discretization and discrete-level metrics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qdal {

inline constexpr int kNumLevels = 3;

/// A difficulty level in {0, 1, 2}: middle school, high school, university.
class DifficultyLevel {
public:
    /// Throws std::out_of_range if `value` is not 0, 1 or 2.
    explicit DifficultyLevel(int value);

    [[nodiscard]] constexpr int value() const noexcept { return value_; }
    [[nodiscard]] constexpr double as_target() const noexcept { return static_cast<double>(value_); }

    friend constexpr bool operator==(DifficultyLevel, DifficultyLevel) = default;

private:
    int value_;
};

using LevelArray = std::array<double, kNumLevels>;
using OptionalLevelArray = std::array<std::optional<double>, kNumLevels>;

struct Example {
    std::string id;
    std::vector<double> features;
    DifficultyLevel level;  // hidden until revealed through a LabelState
};

struct Dataset {
    std::vector<Example> train;
    std::vector<Example> val;
    std::vector<Example> test;
    std::size_t dim = 0;
    LevelArray level_distribution{};  // computed from train

    /// Recomputes level_distribution from train and checks the dataset invariants:
    /// non-empty splits, constant finite feature dimension, distinct ids.
    void finalize();
};

/// Counts of each level in a list of examples.
std::array<std::size_t, kNumLevels> level_counts(std::span<const Example> examples);

/// Partition of train indices into labeled and unlabeled pool. Labels only become
/// visible through reveal(), which consults the dataset's gold levels.
class LabelState {
public:
    explicit LabelState(std::size_t train_size);

    /// Moves `indices` from the pool to the labeled set and records their gold levels.
    /// Throws if any index is not currently in the pool or is repeated.
    void reveal(std::span<const std::size_t> indices, const Dataset& dataset);

    [[nodiscard]] const std::vector<std::size_t>& labeled() const noexcept { return labeled_; }
    /// Pool indices in ascending order.
    [[nodiscard]] std::vector<std::size_t> pool() const;
    [[nodiscard]] std::size_t pool_size() const noexcept { return train_size_ - labeled_.size(); }
    [[nodiscard]] std::size_t train_size() const noexcept { return train_size_; }
    [[nodiscard]] bool is_labeled(std::size_t index) const;
    /// The revealed level of `index`; std::nullopt for pool indices.
    [[nodiscard]] std::optional<DifficultyLevel> revealed_label(std::size_t index) const;

    /// Throws std::logic_error if the partition invariant is broken.
    void check_invariants() const;

private:
    std::size_t train_size_;
    std::vector<std::size_t> labeled_;
    std::vector<std::int8_t> revealed_;  // -1 for pool
};

struct MetricsRow {
    int round = 0;
    std::size_t labeled_size = 0;
    double discrete_rmse = 0.0;
    OptionalLevelArray per_level_rmse{};
    LevelArray labeled_level_dist{};
    double wall_time_s = 0.0;
};

/// Nearest level with half-open thresholds at 0.5 and 1.5 (ties go up).
DifficultyLevel discretize(double y);

std::vector<DifficultyLevel> discretize_all(std::span<const double> ys);

double discrete_rmse(std::span<const DifficultyLevel> preds, std::span<const DifficultyLevel> golds);

/// Entry k is the discrete RMSE over examples whose gold level is k, or nullopt if none.
OptionalLevelArray per_level_rmse(std::span<const DifficultyLevel> preds,
                                  std::span<const DifficultyLevel> golds);

LevelArray level_distribution(const LabelState& state);

std::vector<DifficultyLevel> gold_levels(std::span<const Example> examples);

}  // namespace qdal
