#pragma once

// The pool-based active-learning experiment: stratified initial labeling, then rounds of
// acquire -> reveal -> re-initialise -> retrain -> evaluate. Plus baselines and the
// post-processing used for reporting.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qdal/acquisition.hpp"
#include "qdal/core.hpp"
#include "qdal/model.hpp"
#include "qdal/rng.hpp"

namespace qdal {

/// Picked by lowest validation MSE of plain training at 200 and 1000 labels on the
/// default synthetic data (10 epochs, batch 64).
inline constexpr double kDeskLearningRate = 3e-2;

struct LoopConfig {
    std::size_t initial_labeled = 500;
    std::size_t final_labeled = 10000;
    AcquisitionConfig acquisition;
    RegressorConfig regressor;
    int runs = 5;
    std::uint64_t base_seed = 0;
    /// When false, MetricsRow::wall_time_s is 0 so that outputs are byte-reproducible.
    bool record_wall_time = false;

    /// Structural checks; with a dataset also checks sizes and stratification feasibility.
    void validate(const Dataset* dataset = nullptr) const;
    [[nodiscard]] int rounds() const;  // acquisition rounds after round 0

    /// Train 8000 / initial 200 / K=50 / final 1000 / subset 2500 geometry, kDeskLearningRate.
    static LoopConfig desk_scale(std::size_t input_dim);
};

struct LearningCurve {
    Strategy strategy = Strategy::uniform;
    std::uint64_t run_seed = 0;
    std::vector<MetricsRow> rows;
    std::vector<AcquisitionRecord> acquisitions;      // one per round >= 1
    std::vector<std::vector<int>> test_predictions;   // discrete test predictions per row
};

/// Largest-remainder apportionment of n over the given proportions (ties to the lower level).
std::array<std::size_t, kNumLevels> apportion(std::size_t n, const LevelArray& proportions);

/// Stratified random initial labeled set following the train level distribution.
LabelState init_labeled_set(const Dataset& dataset, std::size_t n, Rng& rng);

struct EvalResult {
    double discrete_rmse = 0.0;
    OptionalLevelArray per_level_rmse{};
    std::vector<int> predictions;
};

/// Deterministic (dropout off) evaluation on a split.
EvalResult evaluate(const Regressor& model, std::span<const Example> examples);

/// Called after every round with the row and, for rounds >= 1, the acquisition record.
using RoundObserver = std::function<void(const MetricsRow&, const AcquisitionRecord*)>;

LearningCurve run_al(const Dataset& dataset, const LoopConfig& config, std::uint64_t run_seed,
                     const RoundObserver& observer = {});

enum class Baseline { random, majority, supervised };

std::string_view baseline_name(Baseline b);
std::optional<Baseline> parse_baseline(std::string_view name);

MetricsRow run_baseline(const Dataset& dataset, Baseline which, const LoopConfig& config, std::uint64_t seed);

/// uniform_rmse - strategy_rmse per round; positive means the strategy is ahead.
std::vector<double> active_gain(const LearningCurve& curve, const LearningCurve& uniform_curve);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;  // sample standard deviation / sqrt(n)
};

MeanSe mean_se(std::span<const double> values);

struct AggregateRow {
    int round = 0;
    std::size_t labeled_size = 0;
    std::size_t runs = 0;
    MeanSe discrete_rmse;
    std::array<std::optional<MeanSe>, kNumLevels> per_level_rmse{};
    std::array<MeanSe, kNumLevels> labeled_level_dist{};
};

std::vector<AggregateRow> aggregate_runs(std::span<const LearningCurve> curves);

}  // namespace qdal
