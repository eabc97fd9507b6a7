#pragma once

// Data-parallel numeric kernels used by the statistics, scaling and metric
// code. Each kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant compiled in its own translation unit. The dispatched entry points in
// `hitlopt::kernels` pick the variant once at startup from CPUID; the
// HITLOPT_SIMD environment variable ("scalar" or "avx2") overrides the choice.
//
// Results from the two variants agree to rounding (reduction order differs),
// which tests/unit/test_kernels.cpp checks on random inputs.

#include <cstddef>
#include <span>
#include <string_view>

namespace hitlopt::kernels {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b) noexcept;
bool backend_available(Backend b) noexcept;
Backend active_backend() noexcept;
// Throws ValidationError if `b` is not available on this machine.
void force_backend(Backend b);

struct MinMax {
    double min;
    double max;
};

struct CrossMoments {
    double sxx; // sum (x - mean_x)^2
    double syy; // sum (y - mean_y)^2
    double sxy; // sum (x - mean_x)(y - mean_y)
};

// Dispatched entry points.
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
MinMax minmax(std::span<const double> x);
CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y);
// out[i] = (x[i] - offset) * factor
void affine(std::span<const double> x, double offset, double factor, std::span<double> out);
// out[g] = sum_i exp(-0.5 * ((grid[g] - samples[i]) / bandwidth)^2)
void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out);

namespace scalar {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
MinMax minmax(std::span<const double> x);
CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y);
void affine(std::span<const double> x, double offset, double factor, std::span<double> out);
void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out);
} // namespace scalar

#if defined(HITLOPT_HAVE_AVX2)
namespace avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
MinMax minmax(std::span<const double> x);
CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y);
void affine(std::span<const double> x, double offset, double factor, std::span<double> out);
void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out);
} // namespace avx2
#endif

} // namespace hitlopt::kernels
