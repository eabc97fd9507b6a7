#include "hitlopt/kernels.hpp"

#include <cmath>
#include <limits>

namespace hitlopt::kernels::scalar {

double sum(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x)
        s += v;
    return s;
}

double dot(std::span<const double> x, std::span<const double> y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += x[i] * y[i];
    return s;
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

MinMax minmax(std::span<const double> x)
{
    MinMax r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double v : x) {
        r.min = v < r.min ? v : r.min;
        r.max = v > r.max ? v : r.max;
    }
    return r;
}

CrossMoments cross_moments(std::span<const double> x, std::span<const double> y,
                           double mean_x, double mean_y)
{
    CrossMoments m{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
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
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (x[i] - offset) * factor;
}

void gaussian_sum(std::span<const double> samples, std::span<const double> grid,
                  double bandwidth, std::span<double> out)
{
    const double inv_h = 1.0 / bandwidth;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double s = 0.0;
        for (double v : samples) {
            const double z = (grid[g] - v) * inv_h;
            s += std::exp(-0.5 * z * z);
        }
        out[g] = s;
    }
}

} // namespace hitlopt::kernels::scalar
