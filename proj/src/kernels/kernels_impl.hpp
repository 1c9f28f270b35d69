#pragma once

#include "qdal/kernels.hpp"

namespace qdal::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows, std::size_t cols);
void gemv_t_acc(const double* w, const double* dy, double* dx, std::size_t rows, std::size_t cols);
void outer_acc(const double* dy, const double* x, double* gw, std::size_t rows, std::size_t cols);
void column_variance(const double* m, std::size_t rows, std::size_t cols, double* var);
void adamw_step(double* p, const double* g, double* m, double* v, std::size_t n, const AdamWParams& hp);
}  // namespace scalar

#if defined(QDAL_HAVE_AVX2_KERNELS)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows, std::size_t cols);
void gemv_t_acc(const double* w, const double* dy, double* dx, std::size_t rows, std::size_t cols);
void outer_acc(const double* dy, const double* x, double* gw, std::size_t rows, std::size_t cols);
void column_variance(const double* m, std::size_t rows, std::size_t cols, double* var);
void adamw_step(double* p, const double* g, double* m, double* v, std::size_t n, const AdamWParams& hp);
}  // namespace avx2
#endif

}  // namespace qdal::kernels
