#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace anomsynth {

// Kahan-compensated sum; keeps normalization identities tight for large batches.
double stable_sum(std::span<const double> xs);

double mean(std::span<const double> xs);

// population variance (divide by N)
double variance(std::span<const double> xs);

// population covariance (divide by N)
double covariance(std::span<const double> xs, std::span<const double> ys);

// Spectral norm (largest singular value) of a row-major rows x cols matrix,
// via one-sided Jacobi. Exact to machine precision; used to certify
// Lipschitz bounds, so no power-iteration underestimates.
double spectral_norm(std::span<const double> data, std::size_t rows, std::size_t cols);

}  // namespace anomsynth
