#pragma once

// Arithmetic inner loops used by the regressor and the acquisition scores.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2/FMA
// variant. The variant is chosen once at runtime from CPU capabilities and can be
// overridden with QDAL_ISA=scalar|avx2 or set_active_isa(). Scalar and AVX2 results
// agree to rounding; column_variance is bit-identical across variants.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace qdal::kernels {

enum class Isa { scalar, avx2 };

struct AdamWParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double bias_correction1 = 1.0;  // 1 - beta1^t
    double bias_correction2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// y = W x + bias, W row-major rows x cols
    void (*gemv)(const double* w, const double* x, const double* bias, double* y, std::size_t rows,
                 std::size_t cols);
    /// dx += W^T dy
    void (*gemv_t_acc)(const double* w, const double* dy, double* dx, std::size_t rows, std::size_t cols);
    /// gw += dy x^T
    void (*outer_acc)(const double* dy, const double* x, double* gw, std::size_t rows, std::size_t cols);
    /// Population variance (divide by rows) of each column of a row-major matrix.
    void (*column_variance)(const double* m, std::size_t rows, std::size_t cols, double* var);
    /// One decoupled-weight-decay Adam update over n parameters.
    void (*adamw_step)(double* p, const double* g, double* m, double* v, std::size_t n, const AdamWParams& hp);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant is not compiled in.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
/// Best variant supported by this CPU and build.
Isa detected_isa();

/// The table used by the library. First call honours QDAL_ISA.
const KernelTable& active();
Isa active_isa();
/// Throws std::invalid_argument if `isa` is not supported here.
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);
std::vector<Isa> supported_isas();

}  // namespace qdal::kernels
