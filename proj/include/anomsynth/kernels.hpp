#pragma once

#include <cstddef>
#include <limits>
#include <span>

namespace anomsynth::kernels {

// Data-parallel inner loops behind the codec, AR model, detector and scorer.
//
// Every reduction follows one fixed evaluation order: four independent lane
// accumulators over the 4-aligned prefix, combined as (l0+l2)+(l1+l3), then a
// sequential tail. The SIMD variants implement exactly that order with plain
// mul/add (no FMA), so scalar and vector backends return bit-identical
// doubles and the dispatch choice can never change a pipeline result.
//
// sq_l2 takes a cutoff and may abandon early; abandon checks happen only at
// 16-element block boundaries on the identically-computed partial sum, which
// keeps the abandon decision backend-independent. A cutoff hit returns +inf.

struct KernelOps {
    const char* name;
    double (*dot)(const double*, const double*, std::size_t);
    double (*sq_l2)(const double*, const double*, std::size_t, double cutoff);
    void (*axpy)(double, const double*, double*, std::size_t);
};

const KernelOps& scalar_ops();

// Best vector backend compiled in and supported by this CPU; nullptr if none.
const KernelOps* simd_ops();

// Runtime-selected backend. ANOMSYNTH_KERNELS=scalar forces the reference
// implementation; anything else auto-selects.
const KernelOps& active_ops();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active_ops().dot(a.data(), b.data(), a.size());
}

inline double sq_l2(std::span<const double> a, std::span<const double> b) {
    return active_ops().sq_l2(a.data(), b.data(), a.size(),
                              std::numeric_limits<double>::infinity());
}

inline double sq_l2_bounded(std::span<const double> a, std::span<const double> b,
                            double cutoff) {
    return active_ops().sq_l2(a.data(), b.data(), a.size(), cutoff);
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active_ops().axpy(alpha, x.data(), y.data(), x.size());
}

struct ArgminResult {
    std::size_t index;
    double distance;
};

// Nearest row of `entries` (count rows of query.size() doubles) under squared
// Euclidean distance; ties resolve to the lowest index.
ArgminResult argmin_sq_l2(std::span<const double> query,
                          std::span<const double> entries, std::size_t count);

}  // namespace anomsynth::kernels
