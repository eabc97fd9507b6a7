// Compiled with -mavx2 -mfma. Only reached through dispatch.cpp after a
// CPUID check, so nothing here may run on a machine without AVX2/FMA.

#include "hitlopt/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace hitlopt::kernels::avx2 {
namespace {

inline double hsum(__m256d v)
{
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

// exp(x) for x <= 0. Cody-Waite reduction x = n ln2 + r, degree-12 Taylor
// polynomial on |r| <= ln2/2, then scale by 2^n through the exponent bits.
// Inputs below -708 flush to zero.
inline __m256d exp_nonpositive(__m256d x)
{
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(0.693147180369123816490);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 0x1.8p52
    const __m256d underflow = _mm256_set1_pd(-708.0);

    const __m256d keep = _mm256_cmp_pd(x, underflow, _CMP_GE_OQ);
    x = _mm256_max_pd(x, underflow);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    static constexpr double c[] = {
        1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
        1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,     1.0 / 120.0,
        1.0 / 24.0,        1.0 / 6.0,        0.5,             1.0,
        1.0};
    __m256d p = _mm256_set1_pd(c[0]);
    for (int k = 1; k < 13; ++k)
        p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[k]));

    __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                  _mm256_castpd_si256(magic));
    ni = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    const __m256d scale = _mm256_castsi256_pd(ni);
    return _mm256_and_pd(_mm256_mul_pd(p, scale), keep);
}

} // namespace

double sum(std::span<const double> x)
{
    const std::size_t n = x.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + 4));
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        s += x[i];
    return s;
}

double dot(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

MinMax minmax(std::span<const double> x)
{
    const std::size_t n = x.size();
    MinMax r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::size_t i = 0;
    if (n >= 4) {
        __m256d lo = _mm256_loadu_pd(x.data());
        __m256d hi = lo;
        for (i = 4; i + 4 <= n; i += 4) {
            const __m256d v = _mm256_loadu_pd(x.data() + i);
            lo = _mm256_min_pd(lo, v);
            hi = _mm256_max_pd(hi, v);
        }
        alignas(32) double l[4];
        alignas(32) double h[4];
        _mm256_store_pd(l, lo);
        _mm256_store_pd(h, hi);
        for (int k = 0; k < 4; ++k) {
            r.min = l[k] < r.min ? l[k] : r.min;
            r.max = h[k] > r.max ? h[k] : r.max;
        }
    }
    for (; i < n; ++i) {
        r.min = x[i] < r.min ? x[i] : r.min;
        r.max = x[i] > r.max ? x[i] : r.max;
    }
    return r;
}

CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y)
{
    const std::size_t n = x.size();
    const __m256d mx = _mm256_set1_pd(mean_x);
    const __m256d my = _mm256_set1_pd(mean_y);
    __m256d axx = _mm256_setzero_pd();
    __m256d ayy = _mm256_setzero_pd();
    __m256d axy = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), mx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y.data() + i), my);
        axx = _mm256_fmadd_pd(dx, dx, axx);
        ayy = _mm256_fmadd_pd(dy, dy, ayy);
        axy = _mm256_fmadd_pd(dx, dy, axy);
    }
    CrossMoments m{hsum(axx), hsum(ayy), hsum(axy)};
    for (; i < n; ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

void affine(std::span<const double> x, double offset, double factor, std::span<double> out)
{
    const std::size_t n = x.size();
    const __m256d off = _mm256_set1_pd(offset);
    const __m256d fac = _mm256_set1_pd(factor);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), off), fac));
    for (; i < n; ++i)
        out[i] = (x[i] - offset) * factor;
}

void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out)
{
    const double inv_h = 1.0 / bandwidth;
    const __m256d vinv = _mm256_set1_pd(inv_h);
    const __m256d mhalf = _mm256_set1_pd(-0.5);
    const std::size_t n = samples.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const __m256d gv = _mm256_set1_pd(grid[g]);
        __m256d acc = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            const __m256d z = _mm256_mul_pd(_mm256_sub_pd(gv, _mm256_loadu_pd(samples.data() + i)), vinv);
            acc = _mm256_add_pd(acc, exp_nonpositive(_mm256_mul_pd(mhalf, _mm256_mul_pd(z, z))));
        }
        double s = hsum(acc);
        for (; i < n; ++i) {
            const double z = (grid[g] - samples[i]) * inv_h;
            s += std::exp(-0.5 * z * z);
        }
        out[g] = s;
    }
}

} // namespace hitlopt::kernels::avx2
