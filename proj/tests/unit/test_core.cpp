#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "qdal/core.hpp"
#include "unit/support.hpp"

using namespace qdal;
using qdal::testing::levels;

TEST_CASE("DifficultyLevel accepts only 0, 1, 2") {
    CHECK(DifficultyLevel(0).value() == 0);
    CHECK(DifficultyLevel(2).as_target() == 2.0);
    CHECK_THROWS_AS(DifficultyLevel(3), std::out_of_range);
    CHECK_THROWS_AS(DifficultyLevel(-1), std::out_of_range);
}

TEST_CASE("discretize uses midpoint thresholds with ties going up") {
    CHECK(discretize(0.74).value() == 1);
    CHECK(discretize(-0.3).value() == 0);
    CHECK(discretize(1.5).value() == 2);
    CHECK(discretize(0.5).value() == 1);
    CHECK(discretize(std::nextafter(0.5, 0.0)).value() == 0);
    CHECK(discretize(std::nextafter(1.5, 0.0)).value() == 1);
    CHECK(discretize(1e9).value() == 2);
    CHECK_THROWS(discretize(std::numeric_limits<double>::quiet_NaN()));
    CHECK_THROWS(discretize(std::numeric_limits<double>::infinity()));
}

TEST_CASE("discretize is monotone") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 5.0);
    for (int i = 0; i < 10000; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) {
            std::swap(a, b);
        }
        CHECK(discretize(a).value() <= discretize(b).value());
    }
}

TEST_CASE("discrete_rmse examples") {
    CHECK(discrete_rmse(levels({0, 1, 2}), levels({0, 1, 2})) == 0.0);
    CHECK(discrete_rmse(levels({1, 1}), levels({0, 2})) == 1.0);
    CHECK_THROWS(discrete_rmse(levels({1}), levels({0, 2})));
    CHECK_THROWS(discrete_rmse(levels({}), levels({})));
}

TEST_CASE("all-ones against an exact 25/62/13 split gives sqrt(0.38)") {
    const auto golds = gold_levels(qdal::testing::split_with_counts("t", 25, 62, 13));
    const std::vector<DifficultyLevel> preds(golds.size(), DifficultyLevel(1));
    CHECK(discrete_rmse(preds, golds) == doctest::Approx(std::sqrt(0.38)).epsilon(1e-12));
}

TEST_CASE("discrete_rmse is symmetric, zero iff equal, and decomposes over gold levels") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> lv(0, 2);
    std::uniform_int_distribution<int> len(1, 40);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = len(rng);
        std::vector<DifficultyLevel> p, g;
        for (int i = 0; i < n; ++i) {
            p.emplace_back(lv(rng));
            g.emplace_back(lv(rng));
        }
        const double r = discrete_rmse(p, g);
        CHECK(r == discrete_rmse(g, p));
        CHECK((r == 0.0) == (p == g));
        CHECK(discrete_rmse(g, g) == 0.0);

        // Overall squared error is the gold-level-weighted mean of per-level squared errors.
        const auto per = per_level_rmse(p, g);
        double weighted = 0.0;
        for (int k = 0; k < kNumLevels; ++k) {
            const auto count = std::count_if(g.begin(), g.end(), [k](auto l) { return l.value() == k; });
            CHECK(per[k].has_value() == (count > 0));
            if (per[k]) {
                weighted += static_cast<double>(count) * (*per[k]) * (*per[k]);
            }
        }
        CHECK(weighted / n == doctest::Approx(r * r).epsilon(1e-12));
    }
}

TEST_CASE("per_level_rmse examples") {
    const auto same = per_level_rmse(levels({0, 1, 2, 2}), levels({0, 1, 2, 2}));
    for (const auto& v : same) {
        REQUIRE(v.has_value());
        CHECK(*v == 0.0);
    }
    const auto thirds = per_level_rmse(levels({1, 1, 1, 1, 1, 1}), levels({0, 0, 1, 1, 2, 2}));
    CHECK(*thirds[0] == 1.0);
    CHECK(*thirds[1] == 0.0);
    CHECK(*thirds[2] == 1.0);
    const auto only0 = per_level_rmse(levels({2, 2}), levels({0, 0}));
    CHECK(*only0[0] == 2.0);
    CHECK_FALSE(only0[1].has_value());
    CHECK_FALSE(only0[2].has_value());
}

namespace {

Dataset dataset_with_train_levels(std::initializer_list<int> train_levels) {
    Dataset d;
    for (const int l : train_levels) {
        d.train.push_back(Example{"tr" + std::to_string(d.train.size()), {0.0}, DifficultyLevel(l)});
    }
    d.val.push_back(Example{"v0", {0.0}, DifficultyLevel(1)});
    d.test.push_back(Example{"te0", {0.0}, DifficultyLevel(1)});
    d.finalize();
    return d;
}

}  // namespace

TEST_CASE("level_distribution examples") {
    const auto d = dataset_with_train_levels({0, 1, 1, 2, 0});
    LabelState s(d.train.size());
    CHECK_THROWS(level_distribution(s));
    const std::vector<std::size_t> pick{0, 1, 2, 3};
    s.reveal(pick, d);
    const auto dist = level_distribution(s);
    CHECK(dist[0] == 0.25);
    CHECK(dist[1] == 0.5);
    CHECK(dist[2] == 0.25);

    LabelState ones(d.train.size());
    const std::vector<std::size_t> just_ones{1, 2};
    ones.reveal(just_ones, d);
    const auto all1 = level_distribution(ones);
    CHECK(all1[0] == 0.0);
    CHECK(all1[1] == 1.0);
    CHECK(all1[2] == 0.0);
}

TEST_CASE("LabelState keeps the labeled/pool partition") {
    const auto d = dataset_with_train_levels({0, 1, 2, 1, 1, 0, 2, 1});
    LabelState s(d.train.size());
    CHECK(s.pool_size() == 8);
    CHECK_FALSE(s.revealed_label(3).has_value());

    const std::vector<std::size_t> first{6, 2};
    s.reveal(first, d);
    s.check_invariants();
    CHECK(s.labeled() == first);
    CHECK(s.pool() == std::vector<std::size_t>{0, 1, 3, 4, 5, 7});
    CHECK(s.revealed_label(6)->value() == 2);
    CHECK(s.is_labeled(2));

    const std::vector<std::size_t> again{3, 2};
    CHECK_THROWS(s.reveal(again, d));
    const std::vector<std::size_t> repeated{4, 4};
    CHECK_THROWS(s.reveal(repeated, d));
    const std::vector<std::size_t> outside{8};
    CHECK_THROWS(s.reveal(outside, d));
    CHECK(s.labeled().size() == 2);  // failed reveals leave the state untouched
    s.check_invariants();
}

TEST_CASE("revealed labels equal the gold labels") {
    const auto d = dataset_with_train_levels({2, 0, 1, 1, 2, 0});
    LabelState s(d.train.size());
    const std::vector<std::size_t> all{5, 4, 3, 2, 1, 0};
    s.reveal(all, d);
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        CHECK(*s.revealed_label(i) == d.train[i].level);
    }
    CHECK(s.pool().empty());
}

TEST_CASE("Dataset::finalize validates and computes the distribution") {
    auto d = dataset_with_train_levels({0, 1, 1, 2});
    CHECK(d.dim == 1);
    CHECK(d.level_distribution[1] == 0.5);

    Dataset dup = d;
    dup.test.push_back(Example{"tr0", {0.0}, DifficultyLevel(0)});
    CHECK_THROWS(dup.finalize());

    Dataset ragged = d;
    ragged.val.push_back(Example{"v9", {0.0, 1.0}, DifficultyLevel(0)});
    CHECK_THROWS(ragged.finalize());

    Dataset empty = d;
    empty.test.clear();
    CHECK_THROWS(empty.finalize());

    Dataset nonfinite = d;
    nonfinite.train[0].features[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(nonfinite.finalize());
}
