#include "kernels_impl.hpp"

#include <cmath>

namespace qdal::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
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
    const double inv = 1.0 / static_cast<double>(rows);
    // Shifting by the first row makes a constant column exactly zero.
    for (std::size_t c = 0; c < cols; ++c) {
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
    for (std::size_t i = 0; i < n; ++i) {
        p[i] *= decay;
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
        const double denom = std::sqrt(v[i]) * inv_sqrt_bc2 + hp.eps;
        p[i] -= step * m[i] / denom;
    }
}

}  // namespace qdal::kernels::scalar
