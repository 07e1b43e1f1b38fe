#include "anomsynth/numeric.hpp"

#include <cmath>

#include "anomsynth/error.hpp"

namespace anomsynth {

double stable_sum(std::span<const double> xs) {
    // Neumaier's compensated sum; robust even when terms exceed the running sum
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw InvalidArgument("mean of empty range");
    return stable_sum(xs) / double(xs.size());
}

double variance(std::span<const double> xs) {
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / double(xs.size());
}

double covariance(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.empty())
        throw InvalidArgument("covariance: ranges must be nonempty and equal length");
    const double mx = mean(xs), my = mean(ys);
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += (xs[i] - mx) * (ys[i] - my);
    return acc / double(xs.size());
}

double spectral_norm(std::span<const double> data, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || data.size() != rows * cols)
        throw InvalidArgument("spectral_norm: bad shape");

    // column-major working copy; one-sided Jacobi orthogonalizes columns
    std::vector<double> a(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a[j * rows + i] = data[i * cols + j];

    const double eps = 1e-14;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double app = 0, aqq = 0, apq = 0;
                const double* cp = &a[p * rows];
                const double* cq = &a[q * rows];
                for (std::size_t i = 0; i < rows; ++i) {
                    app += cp[i] * cp[i];
                    aqq += cq[i] * cq[i];
                    apq += cp[i] * cq[i];
                }
                if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                double* mp = &a[p * rows];
                double* mq = &a[q * rows];
                for (std::size_t i = 0; i < rows; ++i) {
                    const double vp = mp[i], vq = mq[i];
                    mp[i] = c * vp - s * vq;
                    mq[i] = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    double best = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        double norm2 = 0.0;
        const double* cj = &a[j * rows];
        for (std::size_t i = 0; i < rows; ++i) norm2 += cj[i] * cj[i];
        if (norm2 > best) best = norm2;
    }
    return std::sqrt(best);
}

}  // namespace anomsynth
