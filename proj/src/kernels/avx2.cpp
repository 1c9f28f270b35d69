// AVX2/FMA variants. This file is compiled with -mavx2 -mfma -ffp-contract=off and
// only ever called after a runtime CPU check.
#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace qdal::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot(w + r * cols, x, cols) + bias[r];
    }
}

void gemv_t_acc(const double* w, const double* dy, double* dx, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy(dy[r], w + r * cols, dx, cols);
    }
}

void outer_acc(const double* dy, const double* x, double* gw, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy(dy[r], x, gw + r * cols, cols);
    }
}

void column_variance(const double* m, std::size_t rows, std::size_t cols, double* var) {
    // Same operation order as the scalar reference, four columns per lane group.
    const double inv = 1.0 / static_cast<double>(rows);
    const __m256d vinv = _mm256_set1_pd(inv);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
        const __m256d shift = _mm256_loadu_pd(m + c);
        __m256d sum = _mm256_setzero_pd();
        for (std::size_t r = 0; r < rows; ++r) {
            sum = _mm256_add_pd(sum, _mm256_sub_pd(_mm256_loadu_pd(m + r * cols + c), shift));
        }
        const __m256d mean = _mm256_mul_pd(sum, vinv);
        __m256d sq = _mm256_setzero_pd();
        for (std::size_t r = 0; r < rows; ++r) {
            const __m256d d = _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(m + r * cols + c), shift), mean);
            sq = _mm256_add_pd(sq, _mm256_mul_pd(d, d));
        }
        _mm256_storeu_pd(var + c, _mm256_mul_pd(sq, vinv));
    }
    for (; c < cols; ++c) {
        const double shift = m[c];
        double sum = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            sum += m[r * cols + c] - shift;
        }
        const double mean = sum * inv;
        double sq = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = (m[r * cols + c] - shift) - mean;
            sq += d * d;
        }
        var[c] = sq * inv;
    }
}

void adamw_step(double* p, const double* g, double* m, double* v, std::size_t n, const AdamWParams& hp) {
    const double decay = 1.0 - hp.lr * hp.weight_decay;
    const double step = hp.lr / hp.bias_correction1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(hp.bias_correction2);
    const double one_m_b1 = 1.0 - hp.beta1;
    const double one_m_b2 = 1.0 - hp.beta2;

    const __m256d vdecay = _mm256_set1_pd(decay);
    const __m256d vstep = _mm256_set1_pd(step);
    const __m256d vinv = _mm256_set1_pd(inv_sqrt_bc2);
    const __m256d veps = _mm256_set1_pd(hp.eps);
    const __m256d vb1 = _mm256_set1_pd(hp.beta1);
    const __m256d vb2 = _mm256_set1_pd(hp.beta2);
    const __m256d v1b1 = _mm256_set1_pd(one_m_b1);
    const __m256d v1b2 = _mm256_set1_pd(one_m_b2);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d pi = _mm256_mul_pd(_mm256_loadu_pd(p + i), vdecay);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(v1b1, gi));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(_mm256_mul_pd(v1b2, gi), gi));
        const __m256d denom = _mm256_add_pd(_mm256_mul_pd(_mm256_sqrt_pd(vi), vinv), veps);
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(pi, _mm256_div_pd(_mm256_mul_pd(vstep, mi), denom)));
    }
    for (; i < n; ++i) {
        p[i] *= decay;
        m[i] = hp.beta1 * m[i] + one_m_b1 * g[i];
        v[i] = hp.beta2 * v[i] + one_m_b2 * g[i] * g[i];
        const double denom = std::sqrt(v[i]) * inv_sqrt_bc2 + hp.eps;
        p[i] -= step * m[i] / denom;
    }
}

}  // namespace qdal::kernels::avx2
