#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "qdal/kernels.hpp"

using namespace qdal::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = g(rng);
    }
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
            return false;
        }
    }
    return true;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
    }
}

// Sizes straddling the 4-wide vector width and its remainders.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 63, 64, 65, 130};

}  // namespace

TEST_CASE("scalar kernels against naive loops") {
    const auto& s = scalar_table();
    std::mt19937_64 rng(1);
    const std::size_t rows = 5, cols = 7;
    const auto w = random_vector(rows * cols, rng);
    const auto x = random_vector(cols, rng);
    const auto b = random_vector(rows, rng);
    std::vector<double> y(rows);
    s.gemv(w.data(), x.data(), b.data(), y.data(), rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        for (std::size_t c = 0; c < cols; ++c) {
            acc += w[r * cols + c] * x[c];
        }
        CHECK(y[r] == doctest::Approx(acc).epsilon(1e-12));
    }

    const auto dy = random_vector(rows, rng);
    std::vector<double> dx(cols, 0.5);
    s.gemv_t_acc(w.data(), dy.data(), dx.data(), rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.5;
        for (std::size_t r = 0; r < rows; ++r) {
            acc += w[r * cols + c] * dy[r];
        }
        CHECK(dx[c] == doctest::Approx(acc).epsilon(1e-12));
    }

    std::vector<double> gw(rows * cols, 1.0);
    s.outer_acc(dy.data(), x.data(), gw.data(), rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            CHECK(gw[r * cols + c] == doctest::Approx(1.0 + dy[r] * x[c]).epsilon(1e-12));
        }
    }

    const double m[] = {2, 0, 0, 2, 1, 2, 2, 0, 2};  // 3 passes x 3 columns
    double var[3];
    s.column_variance(m, 3, 3, var);
    CHECK(var[0] == 0.0);
    CHECK(var[1] == doctest::Approx(2.0 / 9.0));
    CHECK(var[2] == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("adamw_step matches a hand-computed update") {
    const auto& s = scalar_table();
    double p = 1.0, g = 0.5, m = 0.0, v = 0.0;
    AdamWParams hp;
    hp.lr = 0.1;
    hp.weight_decay = 0.01;
    hp.bias_correction1 = 1.0 - 0.9;
    hp.bias_correction2 = 1.0 - 0.999;
    s.adamw_step(&p, &g, &m, &v, 1, hp);
    const double p_decayed = 1.0 * (1.0 - 0.1 * 0.01);
    const double m1 = 0.1 * 0.5, v1 = 0.001 * 0.25;
    const double expected = p_decayed - 0.1 * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
    CHECK(m == doctest::Approx(m1));
    CHECK(v == doctest::Approx(v1));
    CHECK(p == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ISA selection") {
    CHECK(isa_supported(Isa::scalar));
    CHECK(parse_isa("scalar") == Isa::scalar);
    CHECK(parse_isa("avx2") == Isa::avx2);
    CHECK_FALSE(parse_isa("sse9").has_value());
    CHECK(isa_name(Isa::avx2) == "avx2");
    const Isa before = active_isa();
    set_active_isa(Isa::scalar);
    CHECK(active().isa == Isa::scalar);
    set_active_isa(before);
    if (!isa_supported(Isa::avx2)) {
        CHECK_THROWS(set_active_isa(Isa::avx2));
    }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
    const KernelTable* v = avx2_table();
    if (v == nullptr || !isa_supported(Isa::avx2)) {
        MESSAGE("AVX2 variant unavailable on this host; equivalence not exercised");
        return;
    }
    const auto& s = scalar_table();
    std::mt19937_64 rng(42);
    for (const std::size_t n : kSizes) {
        CAPTURE(n);
        const auto a = random_vector(n, rng);
        const auto b = random_vector(n, rng);
        CHECK(v->dot(a.data(), b.data(), n) == doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-12));

        auto ys = b, yv = b;
        s.axpy(0.37, a.data(), ys.data(), n);
        v->axpy(0.37, a.data(), yv.data(), n);
        check_close(ys, yv, 1e-14);

        for (const std::size_t rows : {std::size_t{1}, std::size_t{3}, std::size_t{8}}) {
            const auto w = random_vector(rows * n, rng);
            const auto bias = random_vector(rows, rng);
            std::vector<double> o1(rows), o2(rows);
            s.gemv(w.data(), a.data(), bias.data(), o1.data(), rows, n);
            v->gemv(w.data(), a.data(), bias.data(), o2.data(), rows, n);
            check_close(o1, o2, 1e-12);

            const auto dy = random_vector(rows, rng);
            std::vector<double> dx1(n, 0.25), dx2(n, 0.25);
            s.gemv_t_acc(w.data(), dy.data(), dx1.data(), rows, n);
            v->gemv_t_acc(w.data(), dy.data(), dx2.data(), rows, n);
            check_close(dx1, dx2, 1e-12);

            std::vector<double> g1(rows * n, -0.5), g2(rows * n, -0.5);
            s.outer_acc(dy.data(), a.data(), g1.data(), rows, n);
            v->outer_acc(dy.data(), a.data(), g2.data(), rows, n);
            check_close(g1, g2, 1e-14);
        }
    }
}

TEST_CASE("column_variance and adamw_step are bit-identical across ISAs") {
    const KernelTable* v = avx2_table();
    if (v == nullptr || !isa_supported(Isa::avx2)) {
        MESSAGE("AVX2 variant unavailable on this host; equivalence not exercised");
        return;
    }
    const auto& s = scalar_table();
    std::mt19937_64 rng(7);
    for (const std::size_t cols : kSizes) {
        for (const std::size_t rows : {std::size_t{2}, std::size_t{10}, std::size_t{33}}) {
            const auto m = random_vector(rows * cols, rng, 3.0);
            std::vector<double> v1(cols), v2(cols);
            s.column_variance(m.data(), rows, cols, v1.data());
            v->column_variance(m.data(), rows, cols, v2.data());
            CHECK(bit_equal(v1, v2));
        }

        auto p1 = random_vector(cols, rng), p2 = p1;
        const auto g = random_vector(cols, rng);
        auto m1 = random_vector(cols, rng, 0.1), m2 = m1;
        auto q1 = random_vector(cols, rng, 0.1), q2 = q1;
        for (auto& x : q1) {
            x = x * x;
        }
        q2 = q1;
        AdamWParams hp;
        hp.lr = 3e-3;
        hp.weight_decay = 0.05;
        hp.bias_correction1 = 1.0 - std::pow(0.9, 7.0);
        hp.bias_correction2 = 1.0 - std::pow(0.999, 7.0);
        s.adamw_step(p1.data(), g.data(), m1.data(), q1.data(), cols, hp);
        v->adamw_step(p2.data(), g.data(), m2.data(), q2.data(), cols, hp);
        CHECK(bit_equal(p1, p2));
        CHECK(bit_equal(m1, m2));
        CHECK(bit_equal(q1, q2));
    }
}
