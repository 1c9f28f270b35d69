#include "qdal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "qdal/kernels.hpp"

namespace qdal {

namespace {

/// k distinct positions from [0, n), uniformly, in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_positions(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + uniform_index(rng, n - i);
        std::swap(pos[i], pos[j]);
    }
    pos.resize(k);
    return pos;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::uniform:
            return "uniform";
        case Strategy::topk_variance:
            return "topk_variance";
        case Strategy::powervariance:
            return "powervariance";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    for (const auto s : kAllStrategies) {
        if (strategy_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

std::string valid_strategy_names() {
    std::string out;
    for (const auto s : kAllStrategies) {
        if (!out.empty()) {
            out += ", ";
        }
        out += strategy_name(s);
    }
    return out;
}

void AcquisitionConfig::validate() const {
    if (batch_k < 1) {
        throw std::invalid_argument("acquisition: batch_k must be at least 1");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("acquisition: beta must be a finite non-negative number");
    }
    if (pool_subset_m < batch_k) {
        throw std::invalid_argument("acquisition: pool_subset_m (" + std::to_string(pool_subset_m) +
                                    ") must be at least batch_k (" + std::to_string(batch_k) + ")");
    }
    if (strategy != Strategy::uniform && mc_samples < 2) {
        throw std::invalid_argument("acquisition: variance strategies need mc_samples >= 2");
    }
}

std::vector<double> variance_score(const SampleMatrix& samples) {
    if (samples.passes < 2) {
        throw std::invalid_argument("variance_score: at least 2 passes are required");
    }
    if (samples.values.size() != samples.passes * samples.candidates) {
        throw std::invalid_argument("variance_score: malformed sample matrix");
    }
    std::vector<double> var(samples.candidates);
    kernels::active().column_variance(samples.values.data(), samples.passes, samples.candidates, var.data());
    return var;
}

double gumbel_from_uniform(double u, double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("sample_gumbel: beta must be positive");
    }
    if (!(u > 0.0 && u < 1.0)) {
        throw std::invalid_argument("sample_gumbel: u must lie in (0, 1)");
    }
    return -std::log(-std::log(u)) / beta;
}

double sample_gumbel(Rng& rng, double beta) { return gumbel_from_uniform(uniform_open01(rng), beta); }

std::vector<double> power_perturb_with_noise(std::span<const double> s_var, std::span<const double> noise) {
    if (s_var.size() != noise.size()) {
        throw std::invalid_argument("power_perturb: noise length mismatch");
    }
    std::vector<double> out(s_var.size());
    for (std::size_t i = 0; i < s_var.size(); ++i) {
        if (!(s_var[i] >= 0.0) || !std::isfinite(s_var[i])) {
            throw std::invalid_argument("power_perturb: scores must be finite and non-negative");
        }
        out[i] = s_var[i] == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(s_var[i]) + noise[i];
    }
    return out;
}

std::vector<double> power_perturb(std::span<const double> s_var, double beta, Rng& rng) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("power_perturb: beta must be positive");
    }
    std::vector<double> noise(s_var.size());
    for (auto& e : noise) {
        e = sample_gumbel(rng, beta);
    }
    return power_perturb_with_noise(s_var, noise);
}

std::vector<std::size_t> select_topk(std::span<const double> scores, std::size_t k) {
    if (k > scores.size()) {
        throw std::invalid_argument("select_topk: K=" + std::to_string(k) + " exceeds " +
                                    std::to_string(scores.size()) + " candidates");
    }
    if (std::any_of(scores.begin(), scores.end(), [](double s) { return std::isnan(s); })) {
        throw std::invalid_argument("select_topk: NaN score");
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) {
                              return scores[a] > scores[b];
                          }
                          return a < b;
                      });
    idx.resize(k);
    return idx;
}

std::vector<std::size_t> select_by_strategy(std::span<const double> s_var, Strategy strategy, std::size_t k,
                                            double beta, Rng& rng) {
    const std::size_t n = s_var.size();
    if (k > n) {
        throw std::invalid_argument("acquire: batch of " + std::to_string(k) + " exceeds " + std::to_string(n) +
                                    " candidates");
    }
    switch (strategy) {
        case Strategy::uniform:
            return sample_positions(n, k, rng);
        case Strategy::topk_variance:
            return select_topk(s_var, k);
        case Strategy::powervariance:
            break;
    }
    if (beta == 0.0) {
        return sample_positions(n, k, rng);
    }

    // p ∝ s^beta; raising to beta is folded into the log: beta*log s + Gumbel(0,1)
    // ranks identically to log s + Gumbel(0, 1/beta).
    const auto perturbed = power_perturb(s_var, beta, rng);
    const auto finite = static_cast<std::size_t>(
        std::count_if(perturbed.begin(), perturbed.end(), [](double v) { return std::isfinite(v); }));
    if (finite >= k) {
        return select_topk(perturbed, k);
    }
    auto chosen = select_topk(perturbed, finite);
    std::vector<std::size_t> zeros;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(perturbed[i])) {
            zeros.push_back(i);
        }
    }
    for (const auto p : sample_positions(zeros.size(), k - finite, rng)) {
        chosen.push_back(zeros[p]);
    }
    return chosen;
}

AcquisitionResult acquire(const Regressor& model, const LabelState& state, const Dataset& dataset,
                          const AcquisitionConfig& config, Rng& rng) {
    config.validate();
    const auto pool = state.pool();
    if (pool.size() < config.batch_k) {
        throw std::invalid_argument("acquire: pool of " + std::to_string(pool.size()) + " is smaller than K=" +
                                    std::to_string(config.batch_k));
    }
    if (config.strategy != Strategy::uniform && !model.is_trained()) {
        throw std::logic_error("acquire: variance strategies need a trained model");
    }

    const std::size_t m = std::min(config.pool_subset_m, pool.size());
    auto positions = sample_positions(pool.size(), m, rng);
    std::sort(positions.begin(), positions.end());
    std::vector<std::size_t> subset;
    subset.reserve(m);
    for (const auto p : positions) {
        subset.push_back(pool[p]);
    }

    AcquisitionResult result;
    result.subset_size = m;
    if (config.strategy == Strategy::uniform) {
        for (const auto p : sample_positions(m, config.batch_k, rng)) {
            result.indices.push_back(subset[p]);
        }
        return result;
    }

    std::vector<const Example*> candidates;
    candidates.reserve(m);
    for (const auto idx : subset) {
        candidates.push_back(&dataset.train[idx]);
    }
    Rng mc_rng(rng());
    const auto samples = model.mc_predict(candidates, config.mc_samples, mc_rng);
    const auto s_var = variance_score(samples);
    const auto chosen = select_by_strategy(s_var, config.strategy, config.batch_k, config.beta, rng);

    std::vector<double> chosen_var;
    chosen_var.reserve(chosen.size());
    for (const auto p : chosen) {
        result.indices.push_back(subset[p]);
        chosen_var.push_back(s_var[p]);
    }
    result.s_var = std::move(chosen_var);
    return result;
}

std::string AcquisitionRecord::to_json_line() const {
    nlohmann::ordered_json j;
    j["round"] = round;
    j["strategy"] = std::string(strategy_name(strategy));
    j["indices"] = indices;
    j["s_var"] = s_var ? nlohmann::ordered_json(*s_var) : nlohmann::ordered_json(nullptr);
    j["levels"] = levels;
    j["pool_level_counts"] = pool_level_counts;
    return j.dump();
}

AcquisitionRecord AcquisitionRecord::from_json_line(std::string_view line) {
    const auto j = nlohmann::json::parse(line);
    AcquisitionRecord r;
    r.round = j.at("round").get<int>();
    const auto name = j.at("strategy").get<std::string>();
    const auto s = parse_strategy(name);
    if (!s) {
        throw std::invalid_argument("acquisition log: unknown strategy '" + name + "'");
    }
    r.strategy = *s;
    r.indices = j.at("indices").get<std::vector<std::size_t>>();
    if (!j.at("s_var").is_null()) {
        r.s_var = j.at("s_var").get<std::vector<double>>();
    }
    r.levels = j.at("levels").get<std::vector<int>>();
    r.pool_level_counts = j.at("pool_level_counts").get<std::array<std::size_t, kNumLevels>>();
    return r;
}

}  // namespace qdal
