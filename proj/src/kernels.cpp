#include "anomsynth/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>

#include "anomsynth/error.hpp"

namespace anomsynth::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < n4; i += 4) {
        l0 = l0 + a[i + 0] * b[i + 0];
        l1 = l1 + a[i + 1] * b[i + 1];
        l2 = l2 + a[i + 2] * b[i + 2];
        l3 = l3 + a[i + 3] * b[i + 3];
    }
    double s = (l0 + l2) + (l1 + l3);
    for (std::size_t i = n4; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

double sq_l2_scalar(const double* a, const double* b, std::size_t n, double cutoff) {
    double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
    const std::size_t n4 = n - n % 4;
    std::size_t i = 0;
    while (i < n4) {
        const std::size_t stop = std::min(n4, i + 16);
        for (; i < stop; i += 4) {
            const double d0 = a[i + 0] - b[i + 0];
            const double d1 = a[i + 1] - b[i + 1];
            const double d2 = a[i + 2] - b[i + 2];
            const double d3 = a[i + 3] - b[i + 3];
            l0 = l0 + d0 * d0;
            l1 = l1 + d1 * d1;
            l2 = l2 + d2 * d2;
            l3 = l3 + d3 * d3;
        }
        if (i % 16 == 0 && (l0 + l2) + (l1 + l3) >= cutoff)
            return std::numeric_limits<double>::infinity();
    }
    double s = (l0 + l2) + (l1 + l3);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s = s + d * d;
    }
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr KernelOps kScalarOps{"scalar", dot_scalar, sq_l2_scalar, axpy_scalar};

const KernelOps* pick_active() {
    if (const char* env = std::getenv("ANOMSYNTH_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &kScalarOps;
    }
    if (const KernelOps* simd = simd_ops()) return simd;
    return &kScalarOps;
}

}  // namespace

const KernelOps& scalar_ops() { return kScalarOps; }

const KernelOps& active_ops() {
    static const KernelOps* ops = pick_active();
    return *ops;
}

ArgminResult argmin_sq_l2(std::span<const double> query,
                          std::span<const double> entries, std::size_t count) {
    if (count == 0) throw InvalidArgument("argmin_sq_l2: no entries");
    const std::size_t dim = query.size();
    const KernelOps& ops = active_ops();
    double best = ops.sq_l2(query.data(), entries.data(), dim,
                            std::numeric_limits<double>::infinity());
    std::size_t best_index = 0;
    for (std::size_t k = 1; k < count; ++k) {
        const double d = ops.sq_l2(query.data(), entries.data() + k * dim, dim, best);
        if (d < best) {
            best = d;
            best_index = k;
        }
    }
    return {best_index, best};
}

}  // namespace anomsynth::kernels
