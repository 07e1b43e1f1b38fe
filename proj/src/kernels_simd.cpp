// Vector kernel backends: AVX2 on x86-64, NEON on aarch64. Both mirror the
// scalar reference exactly: same 4-lane blocking, same combine order, mul+add
// only (no FMA), identical cutoff checkpoints, so results are bit-identical
// to scalar_ops().

#include "anomsynth/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <limits>

namespace anomsynth::kernels {

namespace {

inline double combine(__m256d acc) {
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d v = _mm_add_pd(lo, hi);  // [l0+l2, l1+l3]
    return _mm_cvtsd_f64(v) + _mm_cvtsd_f64(_mm_unpackhi_pd(v, v));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    double s = combine(acc);
    for (std::size_t i = n4; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

double sq_l2_avx2(const double* a, const double* b, std::size_t n, double cutoff) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n - n % 4;
    std::size_t i = 0;
    while (i < n4) {
        const std::size_t stop = i + 16 < n4 ? i + 16 : n4;
        for (; i < stop; i += 4) {
            const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
        }
        if (i % 16 == 0 && combine(acc) >= cutoff)
            return std::numeric_limits<double>::infinity();
    }
    double s = combine(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s = s + d * d;
    }
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (std::size_t i = n4; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr KernelOps kAvx2Ops{"avx2", dot_avx2, sq_l2_avx2, axpy_avx2};

}  // namespace

const KernelOps* simd_ops() {
    return __builtin_cpu_supports("avx2") ? &kAvx2Ops : nullptr;
}

}  // namespace anomsynth::kernels

#elif defined(__aarch64__)

#include <arm_neon.h>

#include <limits>

namespace anomsynth::kernels {

namespace {

// Two 2-lane registers stand in for the 4 lanes: acc01=[l0,l1], acc23=[l2,l3].
inline double combine(float64x2_t acc01, float64x2_t acc23) {
    const float64x2_t v = vaddq_f64(acc01, acc23);  // [l0+l2, l1+l3]
    return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1);
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < n4; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double s = combine(acc01, acc23);
    for (std::size_t i = n4; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

double sq_l2_neon(const double* a, const double* b, std::size_t n, double cutoff) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    const std::size_t n4 = n - n % 4;
    std::size_t i = 0;
    while (i < n4) {
        const std::size_t stop = i + 16 < n4 ? i + 16 : n4;
        for (; i < stop; i += 4) {
            const float64x2_t d01 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
            const float64x2_t d23 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
            acc01 = vaddq_f64(acc01, vmulq_f64(d01, d01));
            acc23 = vaddq_f64(acc23, vmulq_f64(d23, d23));
        }
        if (i % 16 == 0 && combine(acc01, acc23) >= cutoff)
            return std::numeric_limits<double>::infinity();
    }
    double s = combine(acc01, acc23);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s = s + d * d;
    }
    return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    const std::size_t n2 = n - n % 2;
    for (std::size_t i = 0; i < n2; i += 2) {
        const float64x2_t vy = vld1q_f64(y + i);
        const float64x2_t vx = vld1q_f64(x + i);
        vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
    }
    for (std::size_t i = n2; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr KernelOps kNeonOps{"neon", dot_neon, sq_l2_neon, axpy_neon};

}  // namespace

const KernelOps* simd_ops() { return &kNeonOps; }

}  // namespace anomsynth::kernels

#else

namespace anomsynth::kernels {
const KernelOps* simd_ops() { return nullptr; }
}  // namespace anomsynth::kernels

#endif
