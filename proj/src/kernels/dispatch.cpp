#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace qdal::kernels {

namespace {

const KernelTable kScalar{
    Isa::scalar,        scalar::dot,       scalar::axpy,         scalar::gemv,
    scalar::gemv_t_acc, scalar::outer_acc, scalar::column_variance, scalar::adamw_step,
};

#if defined(QDAL_HAVE_AVX2_KERNELS)
const KernelTable kAvx2{
    Isa::avx2,        avx2::dot,       avx2::axpy,            avx2::gemv,
    avx2::gemv_t_acc, avx2::outer_acc, avx2::column_variance, avx2::adamw_step,
};
#endif

const KernelTable& table_for(Isa isa) {
#if defined(QDAL_HAVE_AVX2_KERNELS)
    if (isa == Isa::avx2) {
        return kAvx2;
    }
#endif
    (void)isa;
    return kScalar;
}

const KernelTable* initial_table() {
    Isa isa = detected_isa();
    if (const char* env = std::getenv("QDAL_ISA"); env != nullptr && *env != '\0') {
        const auto requested = parse_isa(env);
        if (!requested) {
            throw std::invalid_argument(std::string("QDAL_ISA: unknown instruction set '") + env + "'");
        }
        if (isa_supported(*requested)) {
            isa = *requested;
        }
    }
    return &table_for(isa);
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{initial_table()};
    return slot;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(QDAL_HAVE_AVX2_KERNELS)
    return isa_supported(Isa::avx2) ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(QDAL_HAVE_AVX2_KERNELS)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa detected_isa() { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("instruction set '" + std::string(isa_name(isa)) + "' is not supported here");
    }
    active_slot().store(&table_for(isa), std::memory_order_release);
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
    if (name == "scalar") {
        return Isa::scalar;
    }
    if (name == "avx2") {
        return Isa::avx2;
    }
    return std::nullopt;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out{Isa::scalar};
    if (isa_supported(Isa::avx2)) {
        out.push_back(Isa::avx2);
    }
    return out;
}

}  // namespace qdal::kernels
