#pragma once

// Batch acquisition: Uniform, top-K Variance and PowerVariance.
//
// PowerVariance perturbs log-variance scores with Gumbel(0, 1/beta) noise and keeps the
// top K, which is the same as drawing K candidates without replacement with
// probability proportional to variance^beta.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdal/core.hpp"
#include "qdal/model.hpp"
#include "qdal/rng.hpp"

namespace qdal {

enum class Strategy { uniform, topk_variance, powervariance };

inline constexpr std::array<Strategy, 3> kAllStrategies{Strategy::uniform, Strategy::topk_variance,
                                                        Strategy::powervariance};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
/// "uniform, topk_variance, powervariance"
std::string valid_strategy_names();

struct AcquisitionConfig {
    Strategy strategy = Strategy::powervariance;
    std::size_t batch_k = 100;
    double beta = 1.0;
    int mc_samples = 10;
    std::size_t pool_subset_m = 5000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ScoredCandidates {
    std::vector<std::size_t> indices;  // train indices, ascending
    std::vector<double> s_var;
    std::vector<double> s_power;       // empty unless powervariance
};

/// Population variance across passes for every candidate. Requires at least 2 passes.
std::vector<double> variance_score(const SampleMatrix& samples);

/// Gumbel(0, 1/beta) draw from a given uniform u in (0, 1).
double gumbel_from_uniform(double u, double beta);
double sample_gumbel(Rng& rng, double beta);

/// log(s_var[i]) + noise[i]; zero scores map to -inf.
std::vector<double> power_perturb_with_noise(std::span<const double> s_var, std::span<const double> noise);
std::vector<double> power_perturb(std::span<const double> s_var, double beta, Rng& rng);

/// Positions of the K largest scores, highest first, ties to the lower position.
std::vector<std::size_t> select_topk(std::span<const double> scores, std::size_t k);

/// Strategy selection on precomputed scores; returns positions into `s_var`.
/// Uniform ignores the scores. PowerVariance with beta == 0 samples uniformly.
/// Zero-variance candidates are only taken by PowerVariance when the batch cannot
/// otherwise be filled, and then uniformly at random.
std::vector<std::size_t> select_by_strategy(std::span<const double> s_var, Strategy strategy, std::size_t k,
                                            double beta, Rng& rng);

struct AcquisitionResult {
    std::vector<std::size_t> indices;          // train indices, selection order
    std::optional<std::vector<double>> s_var;  // of the chosen indices; absent for uniform
    std::size_t subset_size = 0;
};

/// Draws a pool subset, scores it and selects `config.batch_k` train indices.
AcquisitionResult acquire(const Regressor& model, const LabelState& state, const Dataset& dataset,
                          const AcquisitionConfig& config, Rng& rng);

/// One line of the per-round acquisition log.
struct AcquisitionRecord {
    int round = 0;
    Strategy strategy = Strategy::uniform;
    std::vector<std::size_t> indices;
    std::optional<std::vector<double>> s_var;
    std::vector<int> levels;
    std::array<std::size_t, kNumLevels> pool_level_counts{};  // pool composition before acquisition

    [[nodiscard]] std::string to_json_line() const;
    static AcquisitionRecord from_json_line(std::string_view line);
};

}  // namespace qdal
