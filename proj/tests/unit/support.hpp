#pragma once

// Independent oracles and fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "qdal/core.hpp"

namespace qdal::testing {

/// Exact per-item inclusion probabilities of drawing k items without replacement,
/// one at a time, each draw proportional to weight^beta among the items left.
inline std::vector<double> sequential_inclusion(std::span<const double> weights, double beta, std::size_t k) {
    const std::size_t n = weights.size();
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::pow(weights[i], beta);
    }
    std::vector<double> incl(n, 0.0);
    std::vector<bool> taken(n, false);
    auto recurse = [&](auto&& self, std::size_t depth, double prob, double remaining) -> void {
        if (depth == k) {
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) {
                continue;
            }
            const double p = prob * w[i] / remaining;
            incl[i] += p;
            taken[i] = true;
            self(self, depth + 1, p, remaining - w[i]);
            taken[i] = false;
        }
    };
    recurse(recurse, 0, 1.0, std::accumulate(w.begin(), w.end(), 0.0));
    return incl;
}

/// Monte Carlo version of the same process, drawing with std::discrete_distribution.
inline std::vector<double> sequential_inclusion_mc(std::span<const double> weights, double beta, std::size_t k,
                                                   std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> freq(weights.size(), 0.0);
    std::vector<double> w(weights.size());
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = std::pow(weights[i], beta);
        }
        for (std::size_t j = 0; j < k; ++j) {
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            const auto i = pick(rng);
            freq[i] += 1.0;
            w[i] = 0.0;
        }
    }
    for (auto& f : freq) {
        f /= static_cast<double>(trials);
    }
    return freq;
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return 0.5 * s;
}

/// Pearson chi-square goodness-of-fit p-value.
inline double chi_square_p(std::span<const double> observed, std::span<const double> expected) {
    double stat = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] > 0.0) {
            stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
            ++cells;
        }
    }
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

inline std::vector<DifficultyLevel> levels(std::initializer_list<int> values) {
    std::vector<DifficultyLevel> out;
    for (const int v : values) {
        out.emplace_back(v);
    }
    return out;
}

/// A test split with exactly the given level counts; features are irrelevant.
inline std::vector<Example> split_with_counts(const std::string& prefix, std::size_t n0, std::size_t n1,
                                              std::size_t n2, std::size_t dim = 2) {
    std::vector<Example> out;
    const std::size_t counts[] = {n0, n1, n2};
    for (int k = 0; k < kNumLevels; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i) {
            out.push_back(Example{prefix + "-" + std::to_string(out.size()), std::vector<double>(dim, 0.1 * k),
                                  DifficultyLevel(k)});
        }
    }
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("qdal-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace qdal::testing
