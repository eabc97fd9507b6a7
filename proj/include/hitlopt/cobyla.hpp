#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hitlopt::opt {

using Function = std::function<double(std::span<const double>)>;

struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const noexcept { return lower.size(); }
    void validate(std::size_t n) const;
    bool contains(std::span<const double> x, double tol = 0.0) const;
    // Largest amount by which x leaves the box (0 when inside).
    double violation(std::span<const double> x) const;
    std::vector<double> clip(std::span<const double> x) const;
    static Bounds unit(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }
};

struct CobylaSettings {
    double rho_beg = 0.1;
    double rho_end = 1e-4;
    int maxfun = 1000;

    void validate(std::size_t n) const;
    nlohmann::json to_json() const;
    static CobylaSettings from_json(const nlohmann::json& j);
};

enum class CobylaStatus { converged, maxfun_reached };
std::string_view to_string(CobylaStatus s) noexcept;

// Merit f + mu * max(0, -min_k g_k) of the best vertex, recorded every time
// the best vertex changes or mu changes.
struct MeritRecord {
    double mu;
    double merit;
};

struct CobylaResult {
    std::vector<double> x;
    double f = 0.0;
    // max(0, -min_k g_k) over the user constraints at x.
    double max_violation = 0.0;
    CobylaStatus status = CobylaStatus::converged;
    int evaluations = 0;
    std::vector<MeritRecord> merit_trace;
};

// Derivative-free minimization of f subject to g_k(x) >= 0 and the box
// bounds, after Powell's COBYLA: linear interpolation of f and every g_k on a
// simplex of n+1 points, a linear trust-region subproblem at radius rho, an
// L-infinity merit function with adaptive penalty mu, and rho halved from
// rho_beg down to rho_end. The trust region is the box |d_i| <= rho, which
// makes each subproblem a small LP. Bounds are honoured exactly: every point
// evaluated lies inside them.
//
// Throws NumericError if f or a constraint returns NaN.
CobylaResult cobyla_minimize(const Function& f, const std::vector<Function>& constraints,
                             std::span<const double> x0, const Bounds& bounds,
                             const CobylaSettings& settings = {});

namespace detail {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status;
    std::vector<double> z;
    double objective;
};

// Minimize c.z subject to A z <= b (row-major A, rows = b.size()), z >= 0.
// Dense two-phase tableau simplex with Bland's rule.
LpResult solve_lp(std::span<const double> c, std::span<const double> A, std::span<const double> b);

} // namespace detail

} // namespace hitlopt::opt
