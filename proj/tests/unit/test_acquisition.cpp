#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "qdal/acquisition.hpp"
#include "qdal/data.hpp"
#include "unit/support.hpp"

using namespace qdal;
using qdal::testing::sequential_inclusion;
using qdal::testing::total_variation;

namespace {

SampleMatrix columns(std::size_t passes, std::initializer_list<std::vector<double>> cols) {
    SampleMatrix s;
    s.passes = passes;
    s.candidates = cols.size();
    s.values.resize(passes * s.candidates);
    std::size_t c = 0;
    for (const auto& col : cols) {
        for (std::size_t p = 0; p < passes; ++p) {
            s.values[p * s.candidates + c] = col[p];
        }
        ++c;
    }
    return s;
}

std::vector<double> inclusion_frequencies(std::span<const double> s_var, Strategy strategy, std::size_t k,
                                          double beta, std::size_t trials, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> freq(s_var.size(), 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        for (const auto i : select_by_strategy(s_var, strategy, k, beta, rng)) {
            freq[i] += 1.0;
        }
    }
    for (auto& f : freq) {
        f /= static_cast<double>(trials);
    }
    return freq;
}

}  // namespace

TEST_CASE("strategy names") {
    for (const auto s : kAllStrategies) {
        CHECK(parse_strategy(strategy_name(s)) == s);
    }
    CHECK_FALSE(parse_strategy("bald").has_value());
    CHECK(valid_strategy_names() == "uniform, topk_variance, powervariance");
}

TEST_CASE("variance_score examples") {
    const auto v = variance_score(columns(3, {{2.0, 2.0, 2.0}, {0.0, 1.0, 2.0}}));
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(variance_score(columns(2, {{0.0, 2.0}}))[0] == 1.0);
    CHECK_THROWS(variance_score(columns(1, {{1.0}})));
}

TEST_CASE("variance_score is permutation-equivariant and pass-order invariant") {
    Rng rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    SampleMatrix s;
    s.passes = 10;
    s.candidates = 25;
    for (std::size_t i = 0; i < s.passes * s.candidates; ++i) {
        s.values.push_back(g(rng));
    }
    const auto base = variance_score(s);

    // Direct two-pass formula as the oracle.
    for (std::size_t c = 0; c < s.candidates; ++c) {
        double mean = 0.0;
        for (std::size_t p = 0; p < s.passes; ++p) {
            mean += s.at(p, c);
        }
        mean /= 10.0;
        double ss = 0.0;
        for (std::size_t p = 0; p < s.passes; ++p) {
            ss += (s.at(p, c) - mean) * (s.at(p, c) - mean);
        }
        CHECK(base[c] == doctest::Approx(ss / 10.0).epsilon(1e-12));
    }

    std::vector<std::size_t> perm(s.candidates);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SampleMatrix cols = s;
    for (std::size_t p = 0; p < s.passes; ++p) {
        for (std::size_t c = 0; c < s.candidates; ++c) {
            cols.values[p * s.candidates + c] = s.at(p, perm[c]);
        }
    }
    const auto permuted = variance_score(cols);
    for (std::size_t c = 0; c < s.candidates; ++c) {
        CHECK(permuted[c] == doctest::Approx(base[perm[c]]).epsilon(1e-12));
    }

    SampleMatrix rows = s;
    std::vector<std::size_t> pass_perm(s.passes);
    std::iota(pass_perm.begin(), pass_perm.end(), 0);
    std::shuffle(pass_perm.begin(), pass_perm.end(), rng);
    for (std::size_t p = 0; p < s.passes; ++p) {
        for (std::size_t c = 0; c < s.candidates; ++c) {
            rows.values[p * s.candidates + c] = s.at(pass_perm[p], c);
        }
    }
    const auto reordered = variance_score(rows);
    for (std::size_t c = 0; c < s.candidates; ++c) {
        CHECK(reordered[c] == doctest::Approx(base[c]).epsilon(1e-12));
    }
}

TEST_CASE("Gumbel noise") {
    CHECK(gumbel_from_uniform(std::exp(-1.0), 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    Rng rng(1);
    CHECK_THROWS(sample_gumbel(rng, 0.0));
    CHECK_THROWS(sample_gumbel(rng, -1.0));

    const int n = 1'000'000;
    auto moments = [&](double beta) {
        Rng r(99);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_gumbel(r, beta);
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / n;
        return std::pair{mean, std::sqrt(sum2 / n - mean * mean)};
    };
    const auto [m1, sd1] = moments(1.0);
    const auto [m2, sd2] = moments(2.0);
    CHECK(std::abs(m1 - 0.5772156649) < 0.01);
    CHECK(std::abs(sd1 - M_PI / std::sqrt(6.0)) < 0.01);
    CHECK(std::abs(sd2 / sd1 - 0.5) < 0.02);
}

TEST_CASE("power_perturb examples") {
    const std::vector<double> s{1.0, std::exp(1.0)};
    const std::vector<double> zero{0.0, 0.0};
    const auto p = power_perturb_with_noise(s, zero);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(4);
    const std::vector<double> with_zero{0.0, 5.0};
    for (int i = 0; i < 100; ++i) {
        const auto q = power_perturb(with_zero, 1.0, rng);
        CHECK(q[0] == -std::numeric_limits<double>::infinity());
        CHECK(select_topk(q, 1) == std::vector<std::size_t>{1});
    }
    const std::vector<double> negative{1.0, -0.1};
    CHECK_THROWS(power_perturb(negative, 1.0, rng));
    const std::vector<double> nan{1.0, std::nan("")};
    CHECK_THROWS(power_perturb(nan, 1.0, rng));
}

TEST_CASE("scaling scores shifts perturbed scores by log c and keeps the top-K") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(12), scaled(12), noise(12);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = u(rng);
            scaled[i] = 10.0 * s[i];
            noise[i] = sample_gumbel(rng, 1.0);
        }
        const auto a = power_perturb_with_noise(s, noise);
        const auto b = power_perturb_with_noise(scaled, noise);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(b[i] - a[i] == doctest::Approx(std::log(10.0)).epsilon(1e-9));
        }
        CHECK(select_topk(a, 4) == select_topk(b, 4));
        CHECK(select_topk(s, 4) == select_topk(scaled, 4));
    }
}

TEST_CASE("select_topk examples") {
    const std::vector<double> a{0.1, 0.9, 0.5};
    CHECK(select_topk(a, 2) == std::vector<std::size_t>{1, 2});
    const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
    CHECK(select_topk(flat, 2) == std::vector<std::size_t>{0, 1});
    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<double> with_ninf{0.2, ninf, 0.7, 0.1};
    const auto top = select_topk(with_ninf, 3);
    CHECK(std::find(top.begin(), top.end(), 1) == top.end());
    CHECK(top == std::vector<std::size_t>{2, 0, 3});
    CHECK_THROWS(select_topk(a, 4));
    const std::vector<double> nan{0.2, std::nan("")};
    CHECK_THROWS(select_topk(nan, 1));
}

TEST_CASE("PowerVariance matches sequential sampling without replacement") {
    const std::vector<double> scores{0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0, 1.5, 2.5, 4.0};
    SUBCASE("beta = 1") {
        const auto oracle = sequential_inclusion(scores, 1.0, 3);
        CHECK(std::accumulate(oracle.begin(), oracle.end(), 0.0) == doctest::Approx(3.0));
        const auto freq = inclusion_frequencies(scores, Strategy::powervariance, 3, 1.0, 100000, 21);
        CHECK(total_variation(freq, oracle) < 0.02);
        // The Monte Carlo form of the oracle agrees with its exact form.
        const auto mc = qdal::testing::sequential_inclusion_mc(scores, 1.0, 3, 100000, 22);
        CHECK(total_variation(mc, oracle) < 0.02);
    }
    SUBCASE("beta = 2.5") {
        const auto oracle = sequential_inclusion(scores, 2.5, 4);
        const auto freq = inclusion_frequencies(scores, Strategy::powervariance, 4, 2.5, 50000, 23);
        CHECK(total_variation(freq, oracle) < 0.02);
    }
}

TEST_CASE("beta limits") {
    const std::vector<double> scores{1.0, 2.0, 4.0, 8.0};
    Rng rng(31);
    int top = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto sel = select_by_strategy(scores, Strategy::powervariance, 2, 100.0, rng);
        const std::set<std::size_t> s(sel.begin(), sel.end());
        top += s == std::set<std::size_t>{2, 3};
    }
    CHECK(top >= 9900);

    const auto freq = inclusion_frequencies(scores, Strategy::powervariance, 2, 0.0, 10000, 32);
    std::vector<double> observed, expected(4, 10000.0 * 2.0 / 4.0);
    for (const double f : freq) {
        observed.push_back(f * 10000.0);
    }
    CHECK(qdal::testing::chi_square_p(observed, expected) > 0.01);
}

TEST_CASE("PowerVariance selection distribution is scale invariant") {
    const std::vector<double> scores{0.3, 0.6, 1.1, 0.2, 2.0, 0.9, 0.05, 1.4};
    std::vector<double> scaled;
    for (const double s : scores) {
        scaled.push_back(1000.0 * s);
    }
    const auto a = inclusion_frequencies(scores, Strategy::powervariance, 3, 1.0, 100000, 41);
    const auto b = inclusion_frequencies(scaled, Strategy::powervariance, 3, 1.0, 100000, 42);
    CHECK(total_variation(a, b) < 0.02);
}

TEST_CASE("raising one score never lowers its inclusion probability") {
    std::vector<double> scores{0.5, 1.0, 1.5, 2.0, 2.5};
    double previous = 0.0;
    for (const double s0 : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        scores[0] = s0;
        const auto oracle = sequential_inclusion(scores, 1.0, 2);
        const auto freq = inclusion_frequencies(scores, Strategy::powervariance, 2, 1.0, 40000, 50);
        CHECK(std::abs(freq[0] - oracle[0]) < 0.01);
        CHECK(freq[0] >= previous - 0.005);
        CHECK(oracle[0] >= previous - 1e-12);
        previous = std::max(previous, oracle[0]);
    }
}

TEST_CASE("selections are distinct and exactly K for every strategy") {
    Rng rng(60);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> scores(30);
        for (auto& s : scores) {
            s = trial % 3 == 0 && u(rng) < 1.0 ? 0.0 : u(rng);
        }
        for (const auto strategy : kAllStrategies) {
            const std::size_t k = 1 + trial % 30;
            const auto sel = select_by_strategy(scores, strategy, k, 1.0, rng);
            CHECK(sel.size() == k);
            CHECK(std::set<std::size_t>(sel.begin(), sel.end()).size() == k);
            CHECK(*std::max_element(sel.begin(), sel.end()) < scores.size());
        }
    }
}

TEST_CASE("zero-variance candidates fill only when unavoidable") {
    const std::vector<double> one_positive{0.0, 0.0, 3.0, 0.0};
    Rng rng(70);
    for (int t = 0; t < 200; ++t) {
        CHECK(select_by_strategy(one_positive, Strategy::powervariance, 1, 1.0, rng) ==
              std::vector<std::size_t>{2});
        const auto three = select_by_strategy(one_positive, Strategy::powervariance, 3, 1.0, rng);
        CHECK(three.front() == 2);
    }
    const auto freq = inclusion_frequencies(one_positive, Strategy::powervariance, 2, 1.0, 30000, 71);
    CHECK(freq[2] == 1.0);
    for (const std::size_t i : {0, 1, 3}) {
        CHECK(std::abs(freq[i] - 1.0 / 3.0) < 0.02);
    }
}

TEST_CASE("acquire on a real pool") {
    SyntheticConfig sc;
    sc.n_train = 400;
    sc.n_val = 50;
    sc.n_test = 50;
    sc.dim = 6;
    sc.seed = 2;
    const auto ds = gen_synthetic(sc);
    RegressorConfig rc;
    rc.input_dim = 6;
    rc.hidden_widths = {16};
    rc.epochs = 3;
    Regressor model(rc);

    LabelState state(ds.train.size());
    std::vector<std::size_t> first(50);
    std::iota(first.begin(), first.end(), 0);
    state.reveal(first, ds);

    AcquisitionConfig ac;
    ac.batch_k = 20;
    ac.pool_subset_m = 100;
    ac.strategy = Strategy::topk_variance;
    Rng rng(1);
    CHECK_THROWS_AS(acquire(model, state, ds, ac, rng), std::logic_error);

    std::vector<const Example*> labeled;
    for (const auto i : state.labeled()) {
        labeled.push_back(&ds.train[i]);
    }
    model.train(labeled, as_pointers(ds.val));

    for (const auto strategy : kAllStrategies) {
        ac.strategy = strategy;
        Rng r1(5), r2(5);
        const auto a = acquire(model, state, ds, ac, r1);
        const auto b = acquire(model, state, ds, ac, r2);
        CHECK(a.indices == b.indices);
        CHECK(a.indices.size() == 20);
        CHECK(a.subset_size == 100);
        CHECK(std::set<std::size_t>(a.indices.begin(), a.indices.end()).size() == 20);
        for (const auto i : a.indices) {
            CHECK_FALSE(state.is_labeled(i));
        }
        CHECK(a.s_var.has_value() == (strategy != Strategy::uniform));
        if (strategy == Strategy::topk_variance) {
            CHECK(std::is_sorted(a.s_var->rbegin(), a.s_var->rend()));
        }
    }

    ac.batch_k = 400;
    ac.pool_subset_m = 400;
    CHECK_THROWS(acquire(model, state, ds, ac, rng));
    ac.batch_k = 20;
    ac.pool_subset_m = 10;
    CHECK_THROWS(acquire(model, state, ds, ac, rng));
}

TEST_CASE("acquisition record JSON round trip") {
    AcquisitionRecord r;
    r.round = 3;
    r.strategy = Strategy::powervariance;
    r.indices = {5, 1, 9};
    r.s_var = std::vector<double>{0.25, 0.125, 1.0 / 3.0};
    r.levels = {2, 0, 1};
    r.pool_level_counts = {10, 20, 5};
    const auto line = r.to_json_line();
    CHECK(line.find('\n') == std::string::npos);
    const auto back = AcquisitionRecord::from_json_line(line);
    CHECK(back.round == 3);
    CHECK(back.strategy == Strategy::powervariance);
    CHECK(back.indices == r.indices);
    CHECK(*back.s_var == *r.s_var);
    CHECK(back.levels == r.levels);
    CHECK(back.pool_level_counts == r.pool_level_counts);

    r.strategy = Strategy::uniform;
    r.s_var.reset();
    const auto uni = r.to_json_line();
    CHECK(uni.find("\"s_var\":null") != std::string::npos);
    CHECK_FALSE(AcquisitionRecord::from_json_line(uni).s_var.has_value());
}
