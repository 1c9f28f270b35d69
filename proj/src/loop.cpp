#include "qdal/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qdal {

void LoopConfig::validate(const Dataset* dataset) const {
    acquisition.validate();
    if (initial_labeled < static_cast<std::size_t>(kNumLevels)) {
        throw std::invalid_argument("loop: initial_labeled must be at least 3");
    }
    if (final_labeled < initial_labeled) {
        throw std::invalid_argument("loop: final_labeled must not be below initial_labeled");
    }
    if ((final_labeled - initial_labeled) % acquisition.batch_k != 0) {
        throw std::invalid_argument("loop: final_labeled - initial_labeled (" +
                                    std::to_string(final_labeled - initial_labeled) +
                                    ") is not divisible by batch_k (" + std::to_string(acquisition.batch_k) + ")");
    }
    if (runs < 1) {
        throw std::invalid_argument("loop: runs must be positive");
    }
    if (dataset == nullptr) {
        return;
    }
    if (final_labeled > dataset->train.size()) {
        throw std::invalid_argument("loop: final_labeled (" + std::to_string(final_labeled) +
                                    ") exceeds the training split (" + std::to_string(dataset->train.size()) + ")");
    }
    const auto quota = apportion(initial_labeled, dataset->level_distribution);
    const auto counts = level_counts(dataset->train);
    for (int k = 0; k < kNumLevels; ++k) {
        if (quota[k] == 0) {
            throw std::invalid_argument("loop: initial set of " + std::to_string(initial_labeled) +
                                        " leaves level " + std::to_string(k) + " unrepresented");
        }
        if (quota[k] > counts[k]) {
            throw std::invalid_argument("loop: level " + std::to_string(k) + " needs " + std::to_string(quota[k]) +
                                        " initial examples but train has " + std::to_string(counts[k]));
        }
    }
}

int LoopConfig::rounds() const {
    return static_cast<int>((final_labeled - initial_labeled) / acquisition.batch_k);
}

LoopConfig LoopConfig::desk_scale(std::size_t input_dim) {
    LoopConfig c;
    c.initial_labeled = 200;
    c.final_labeled = 1000;
    c.acquisition.batch_k = 50;
    c.acquisition.pool_subset_m = 2500;
    c.regressor.input_dim = input_dim;
    c.regressor.learning_rate = kDeskLearningRate;
    return c;
}

std::array<std::size_t, kNumLevels> apportion(std::size_t n, const LevelArray& proportions) {
    std::array<std::size_t, kNumLevels> counts{};
    std::array<double, kNumLevels> remainder{};
    std::size_t assigned = 0;
    for (int k = 0; k < kNumLevels; ++k) {
        const double exact = static_cast<double>(n) * proportions[k];
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    std::array<int, kNumLevels> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
        ++counts[order[i % kNumLevels]];
    }
    return counts;
}

LabelState init_labeled_set(const Dataset& dataset, std::size_t n, Rng& rng) {
    if (n > dataset.train.size()) {
        throw std::invalid_argument("init_labeled_set: n exceeds the training split");
    }
    const auto quota = apportion(n, dataset.level_distribution);
    std::array<std::vector<std::size_t>, kNumLevels> by_level;
    for (std::size_t i = 0; i < dataset.train.size(); ++i) {
        by_level[dataset.train[i].level.value()].push_back(i);
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (int k = 0; k < kNumLevels; ++k) {
        auto& idx = by_level[k];
        if (quota[k] > idx.size()) {
            throw std::invalid_argument("init_labeled_set: level " + std::to_string(k) + " has " +
                                        std::to_string(idx.size()) + " examples, quota is " +
                                        std::to_string(quota[k]));
        }
        for (std::size_t i = 0; i < quota[k]; ++i) {
            std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
        }
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[k]));
    }
    std::sort(chosen.begin(), chosen.end());
    LabelState state(dataset.train.size());
    state.reveal(chosen, dataset);
    return state;
}

EvalResult evaluate(const Regressor& model, std::span<const Example> examples) {
    const auto raw = model.predict(examples);
    const auto preds = discretize_all(raw);
    const auto golds = gold_levels(examples);
    EvalResult out;
    out.discrete_rmse = discrete_rmse(preds, golds);
    out.per_level_rmse = per_level_rmse(preds, golds);
    out.predictions.reserve(preds.size());
    for (const auto p : preds) {
        out.predictions.push_back(p.value());
    }
    return out;
}

namespace {

std::vector<const Example*> labeled_examples(const Dataset& dataset, const LabelState& state) {
    std::vector<const Example*> out;
    out.reserve(state.labeled().size());
    for (const auto idx : state.labeled()) {
        out.push_back(&dataset.train[idx]);
    }
    return out;
}

std::array<std::size_t, kNumLevels> pool_level_counts(const Dataset& dataset, const LabelState& state) {
    std::array<std::size_t, kNumLevels> counts{};
    for (const auto idx : state.pool()) {
        ++counts[dataset.train[idx].level.value()];
    }
    return counts;
}

}  // namespace

LearningCurve run_al(const Dataset& dataset, const LoopConfig& config, std::uint64_t run_seed,
                     const RoundObserver& observer) {
    config.validate(&dataset);
    using Clock = std::chrono::steady_clock;

    LearningCurve curve;
    curve.strategy = config.acquisition.strategy;
    curve.run_seed = run_seed;

    RegressorConfig rc = config.regressor;
    rc.input_dim = dataset.dim;
    rc.seed = derive_seed(run_seed, {stream::kModelInit});
    Regressor model(rc);

    Rng init_rng = make_rng(run_seed, {stream::kInitialSet});
    LabelState state = init_labeled_set(dataset, config.initial_labeled, init_rng);
    const auto val = as_pointers(dataset.val);

    auto train_and_record = [&](int round, Clock::time_point started, const AcquisitionRecord* record) {
        state.check_invariants();
        model.reinitialize();
        model.train(labeled_examples(dataset, state), val);
        const auto eval = evaluate(model, dataset.test);

        MetricsRow row;
        row.round = round;
        row.labeled_size = state.labeled().size();
        row.discrete_rmse = eval.discrete_rmse;
        row.per_level_rmse = eval.per_level_rmse;
        row.labeled_level_dist = level_distribution(state);
        if (config.record_wall_time) {
            row.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
        }
        curve.rows.push_back(row);
        curve.test_predictions.push_back(eval.predictions);
        if (observer) {
            observer(row, record);
        }
    };

    train_and_record(0, Clock::now(), nullptr);

    const int rounds = config.rounds();
    for (int round = 1; round <= rounds; ++round) {
        const auto started = Clock::now();
        AcquisitionConfig ac = config.acquisition;
        ac.seed = derive_seed(run_seed, {stream::kAcquisition, static_cast<std::uint64_t>(round)});
        Rng rng(ac.seed);

        AcquisitionRecord record;
        record.round = round;
        record.strategy = ac.strategy;
        record.pool_level_counts = pool_level_counts(dataset, state);

        auto result = acquire(model, state, dataset, ac, rng);
        state.reveal(result.indices, dataset);
        for (const auto idx : result.indices) {
            record.levels.push_back(state.revealed_label(idx)->value());
        }
        record.indices = std::move(result.indices);
        record.s_var = std::move(result.s_var);
        curve.acquisitions.push_back(record);

        train_and_record(round, started, &curve.acquisitions.back());
    }
    return curve;
}

std::string_view baseline_name(Baseline b) {
    switch (b) {
        case Baseline::random:
            return "random";
        case Baseline::majority:
            return "majority";
        case Baseline::supervised:
            return "supervised";
    }
    return "unknown";
}

std::optional<Baseline> parse_baseline(std::string_view name) {
    for (const auto b : {Baseline::random, Baseline::majority, Baseline::supervised}) {
        if (baseline_name(b) == name) {
            return b;
        }
    }
    return std::nullopt;
}

MetricsRow run_baseline(const Dataset& dataset, Baseline which, const LoopConfig& config, std::uint64_t seed) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    const auto golds = gold_levels(dataset.test);
    std::vector<DifficultyLevel> preds;
    preds.reserve(golds.size());

    MetricsRow row;
    switch (which) {
        case Baseline::random: {
            Rng rng = make_rng(seed, {stream::kBaseline});
            for (std::size_t i = 0; i < golds.size(); ++i) {
                preds.emplace_back(static_cast<int>(uniform_index(rng, kNumLevels)));
            }
            break;
        }
        case Baseline::majority:
            preds.assign(golds.size(), DifficultyLevel(1));
            break;
        case Baseline::supervised: {
            RegressorConfig rc = config.regressor;
            rc.input_dim = dataset.dim;
            rc.seed = derive_seed(seed, {stream::kModelInit});
            Regressor model(rc);
            model.train(as_pointers(dataset.train), as_pointers(dataset.val));
            preds = discretize_all(model.predict(dataset.test));
            row.labeled_size = dataset.train.size();
            row.labeled_level_dist = dataset.level_distribution;
            break;
        }
    }
    row.discrete_rmse = discrete_rmse(preds, golds);
    row.per_level_rmse = per_level_rmse(preds, golds);
    if (config.record_wall_time) {
        row.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
    }
    return row;
}

std::vector<double> active_gain(const LearningCurve& curve, const LearningCurve& uniform_curve) {
    if (curve.rows.size() != uniform_curve.rows.size()) {
        throw std::invalid_argument("active_gain: curves have different numbers of rounds");
    }
    std::vector<double> gain;
    gain.reserve(curve.rows.size());
    for (std::size_t i = 0; i < curve.rows.size(); ++i) {
        if (curve.rows[i].labeled_size != uniform_curve.rows[i].labeled_size) {
            throw std::invalid_argument("active_gain: labeled sizes differ at round " + std::to_string(i));
        }
        gain.push_back(uniform_curve.rows[i].discrete_rmse - curve.rows[i].discrete_rmse);
    }
    return gain;
}

MeanSe mean_se(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("mean_se: no values");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::vector<AggregateRow> aggregate_runs(std::span<const LearningCurve> curves) {
    if (curves.size() < 2) {
        throw std::invalid_argument("aggregate_runs: at least two curves are required");
    }
    const auto& ref = curves.front().rows;
    for (const auto& c : curves) {
        if (c.rows.size() != ref.size()) {
            throw std::invalid_argument("aggregate_runs: curves have different numbers of rounds");
        }
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (c.rows[i].labeled_size != ref[i].labeled_size) {
                throw std::invalid_argument("aggregate_runs: labeled-size grids differ");
            }
        }
    }
    std::vector<AggregateRow> out;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        AggregateRow row;
        row.round = ref[i].round;
        row.labeled_size = ref[i].labeled_size;
        row.runs = curves.size();
        std::vector<double> vals;
        for (const auto& c : curves) {
            vals.push_back(c.rows[i].discrete_rmse);
        }
        row.discrete_rmse = mean_se(vals);
        for (int k = 0; k < kNumLevels; ++k) {
            vals.clear();
            for (const auto& c : curves) {
                if (c.rows[i].per_level_rmse[k]) {
                    vals.push_back(*c.rows[i].per_level_rmse[k]);
                }
            }
            if (!vals.empty()) {
                row.per_level_rmse[k] = mean_se(vals);
            }
            vals.clear();
            for (const auto& c : curves) {
                vals.push_back(c.rows[i].labeled_level_dist[k]);
            }
            row.labeled_level_dist[k] = mean_se(vals);
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace qdal
