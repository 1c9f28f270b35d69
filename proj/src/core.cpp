#include "qdal/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace qdal {

DifficultyLevel::DifficultyLevel(int value) : value_(value) {
    if (value < 0 || value >= kNumLevels) {
        throw std::out_of_range("difficulty level must be 0, 1 or 2, got " + std::to_string(value));
    }
}

std::array<std::size_t, kNumLevels> level_counts(std::span<const Example> examples) {
    std::array<std::size_t, kNumLevels> counts{};
    for (const auto& ex : examples) {
        ++counts[static_cast<std::size_t>(ex.level.value())];
    }
    return counts;
}

void Dataset::finalize() {
    if (train.empty() || val.empty() || test.empty()) {
        throw std::invalid_argument("dataset: every split must be non-empty");
    }
    dim = train.front().features.size();
    if (dim == 0) {
        throw std::invalid_argument("dataset: feature dimension must be positive");
    }
    std::unordered_set<std::string> ids;
    for (const auto* split : {&train, &val, &test}) {
        for (const auto& ex : *split) {
            if (ex.features.size() != dim) {
                throw std::invalid_argument("dataset: example '" + ex.id + "' has " +
                                            std::to_string(ex.features.size()) + " features, expected " +
                                            std::to_string(dim));
            }
            if (!std::all_of(ex.features.begin(), ex.features.end(), [](double v) { return std::isfinite(v); })) {
                throw std::invalid_argument("dataset: example '" + ex.id + "' has non-finite features");
            }
            if (!ex.id.empty() && !ids.insert(ex.id).second) {
                throw std::invalid_argument("dataset: duplicate example id '" + ex.id + "'");
            }
        }
    }
    const auto counts = level_counts(train);
    for (int k = 0; k < kNumLevels; ++k) {
        level_distribution[k] = static_cast<double>(counts[k]) / static_cast<double>(train.size());
    }
}

LabelState::LabelState(std::size_t train_size) : train_size_(train_size), revealed_(train_size, -1) {}

void LabelState::reveal(std::span<const std::size_t> indices, const Dataset& dataset) {
    if (dataset.train.size() != train_size_) {
        throw std::invalid_argument("reveal: dataset does not match label state");
    }
    // Validate everything first so a rejected batch leaves the state unchanged.
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto idx = sorted[i];
        if (idx >= train_size_) {
            throw std::out_of_range("reveal: index " + std::to_string(idx) + " out of range");
        }
        if (revealed_[idx] >= 0) {
            throw std::logic_error("reveal: index " + std::to_string(idx) + " is not in the pool");
        }
        if (i > 0 && sorted[i - 1] == idx) {
            throw std::logic_error("reveal: index " + std::to_string(idx) + " is repeated");
        }
    }
    for (const auto idx : indices) {
        revealed_[idx] = static_cast<std::int8_t>(dataset.train[idx].level.value());
        labeled_.push_back(idx);
    }
}

std::vector<std::size_t> LabelState::pool() const {
    std::vector<std::size_t> out;
    out.reserve(pool_size());
    for (std::size_t i = 0; i < train_size_; ++i) {
        if (revealed_[i] < 0) {
            out.push_back(i);
        }
    }
    return out;
}

bool LabelState::is_labeled(std::size_t index) const {
    return index < train_size_ && revealed_[index] >= 0;
}

std::optional<DifficultyLevel> LabelState::revealed_label(std::size_t index) const {
    if (!is_labeled(index)) {
        return std::nullopt;
    }
    return DifficultyLevel(revealed_[index]);
}

void LabelState::check_invariants() const {
    std::vector<char> seen(train_size_, 0);
    for (const auto idx : labeled_) {
        if (idx >= train_size_ || seen[idx]) {
            throw std::logic_error("label state: labeled set has an invalid or repeated index");
        }
        if (revealed_[idx] < 0) {
            throw std::logic_error("label state: labeled index without a revealed label");
        }
        seen[idx] = 1;
    }
    for (std::size_t i = 0; i < train_size_; ++i) {
        if (!seen[i] && revealed_[i] >= 0) {
            throw std::logic_error("label state: pool index carries a revealed label");
        }
    }
}

DifficultyLevel discretize(double y) {
    if (!std::isfinite(y)) {
        throw std::invalid_argument("discretize: non-finite prediction");
    }
    if (y < 0.5) {
        return DifficultyLevel(0);
    }
    if (y < 1.5) {
        return DifficultyLevel(1);
    }
    return DifficultyLevel(2);
}

std::vector<DifficultyLevel> discretize_all(std::span<const double> ys) {
    std::vector<DifficultyLevel> out;
    out.reserve(ys.size());
    for (const double y : ys) {
        out.push_back(discretize(y));
    }
    return out;
}

double discrete_rmse(std::span<const DifficultyLevel> preds, std::span<const DifficultyLevel> golds) {
    if (preds.size() != golds.size()) {
        throw std::invalid_argument("discrete_rmse: length mismatch");
    }
    if (preds.empty()) {
        throw std::invalid_argument("discrete_rmse: empty input");
    }
    // Integer accumulation keeps the result exact up to the final sqrt.
    std::int64_t sq = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int d = preds[i].value() - golds[i].value();
        sq += d * d;
    }
    return std::sqrt(static_cast<double>(sq) / static_cast<double>(preds.size()));
}

OptionalLevelArray per_level_rmse(std::span<const DifficultyLevel> preds,
                                  std::span<const DifficultyLevel> golds) {
    if (preds.size() != golds.size()) {
        throw std::invalid_argument("per_level_rmse: length mismatch");
    }
    if (preds.empty()) {
        throw std::invalid_argument("per_level_rmse: empty input");
    }
    std::array<std::int64_t, kNumLevels> sq{};
    std::array<std::int64_t, kNumLevels> n{};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int g = golds[i].value();
        const int d = preds[i].value() - g;
        sq[g] += d * d;
        ++n[g];
    }
    OptionalLevelArray out{};
    for (int k = 0; k < kNumLevels; ++k) {
        if (n[k] > 0) {
            out[k] = std::sqrt(static_cast<double>(sq[k]) / static_cast<double>(n[k]));
        }
    }
    return out;
}

LevelArray level_distribution(const LabelState& state) {
    if (state.labeled().empty()) {
        throw std::invalid_argument("level_distribution: labeled set is empty");
    }
    std::array<std::size_t, kNumLevels> counts{};
    for (const auto idx : state.labeled()) {
        ++counts[static_cast<std::size_t>(state.revealed_label(idx)->value())];
    }
    LevelArray dist{};
    for (int k = 0; k < kNumLevels; ++k) {
        dist[k] = static_cast<double>(counts[k]) / static_cast<double>(state.labeled().size());
    }
    return dist;
}

std::vector<DifficultyLevel> gold_levels(std::span<const Example> examples) {
    std::vector<DifficultyLevel> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        out.push_back(ex.level);
    }
    return out;
}

}  // namespace qdal
