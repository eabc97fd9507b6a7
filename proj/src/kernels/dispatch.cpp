#include "hitlopt/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "hitlopt/error.hpp"

namespace hitlopt::kernels {
namespace {

bool cpu_has_avx2() noexcept
{
#if defined(HITLOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() noexcept
{
    const bool avx2_ok = cpu_has_avx2();
    if (const char* env = std::getenv("HITLOPT_SIMD")) {
        const std::string v(env);
        if (v == "scalar")
            return Backend::scalar;
        if (v == "avx2" && avx2_ok)
            return Backend::avx2;
    }
    return avx2_ok ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current()
{
    static std::atomic<Backend> b{detect()};
    return b;
}

} // namespace

std::string_view backend_name(Backend b) noexcept
{
    return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) noexcept
{
    return b == Backend::scalar || cpu_has_avx2();
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void force_backend(Backend b)
{
    if (!backend_available(b))
        throw ValidationError("kernel backend not available: " + std::string(backend_name(b)));
    current().store(b, std::memory_order_relaxed);
}

#if defined(HITLOPT_HAVE_AVX2)
#define HITLOPT_DISPATCH(fn, ...)                         \
    (active_backend() == Backend::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define HITLOPT_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double sum(std::span<const double> x) { return HITLOPT_DISPATCH(sum, x); }

double dot(std::span<const double> x, std::span<const double> y)
{
    return HITLOPT_DISPATCH(dot, x, y);
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y)
{
    return HITLOPT_DISPATCH(sum_sq_diff, x, y);
}

MinMax minmax(std::span<const double> x) { return HITLOPT_DISPATCH(minmax, x); }

CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y)
{
    return HITLOPT_DISPATCH(cross_moments, x, y, mean_x, mean_y);
}

void affine(std::span<const double> x, double offset, double factor, std::span<double> out)
{
    HITLOPT_DISPATCH(affine, x, offset, factor, out);
}

void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out)
{
    HITLOPT_DISPATCH(gaussian_sum, samples, grid, bandwidth, out);
}

#undef HITLOPT_DISPATCH

} // namespace hitlopt::kernels
