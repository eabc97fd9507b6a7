#include "hitlopt/cobyla.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hitlopt/error.hpp"

namespace hitlopt::opt {

// ---------------------------------------------------------------------------
// Bounds / settings

void Bounds::validate(std::size_t n) const
{
    if (lower.size() != n || upper.size() != n)
        throw ValidationError("bounds width does not match the variable count");
    for (std::size_t i = 0; i < n; ++i)
        if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw ValidationError("bounds must be finite with lower <= upper");
}

bool Bounds::contains(std::span<const double> x, double tol) const { return violation(x) <= tol; }

double Bounds::violation(std::span<const double> x) const
{
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        v = std::max({v, lower[i] - x[i], x[i] - upper[i]});
    return v;
}

std::vector<double> Bounds::clip(std::span<const double> x) const
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], lower[i], upper[i]);
    return out;
}

void CobylaSettings::validate(std::size_t n) const
{
    if (!(rho_end > 0.0 && rho_end < rho_beg))
        throw ValidationError("COBYLA settings need 0 < rho_end < rho_beg");
    if (maxfun < static_cast<int>(n) + 2)
        throw ValidationError("COBYLA maxfun must be at least n + 2");
}

nlohmann::json CobylaSettings::to_json() const
{
    return {{"rho_beg", rho_beg}, {"rho_end", rho_end}, {"maxfun", maxfun}};
}

CobylaSettings CobylaSettings::from_json(const nlohmann::json& j)
{
    CobylaSettings s;
    s.rho_beg = j.value("rho_beg", s.rho_beg);
    s.rho_end = j.value("rho_end", s.rho_end);
    s.maxfun = j.value("maxfun", s.maxfun);
    return s;
}

std::string_view to_string(CobylaStatus s) noexcept
{
    return s == CobylaStatus::converged ? "converged" : "maxfun_reached";
}

// ---------------------------------------------------------------------------
// LP

namespace detail {
namespace {

constexpr double kPivotEps = 1e-12;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_(rows * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return t_[r * (cols_ + 1) + cols_]; }
    double rhs(std::size_t r) const { return t_[r * (cols_ + 1) + cols_]; }
    std::size_t& basis(std::size_t r) { return basis_[r]; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void pivot(std::size_t pr, std::size_t pc)
    {
        const double p = at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c)
            t_[pr * (cols_ + 1) + c] /= p;
        for (std::size_t r = 0; r < rows_; ++r) {
            if (r == pr)
                continue;
            const double factor = at(r, pc);
            if (factor == 0.0)
                continue;
            for (std::size_t c = 0; c <= cols_; ++c)
                t_[r * (cols_ + 1) + c] -= factor * t_[pr * (cols_ + 1) + c];
        }
        basis_[pr] = pc;
    }

    // Minimizes cost.z over columns flagged in `allowed`. Returns false when
    // unbounded.
    bool optimize(const std::vector<double>& cost, const std::vector<bool>& allowed)
    {
        double cscale = 1.0;
        for (double v : cost)
            cscale = std::max(cscale, std::abs(v));
        const double tol = 1e-12 * cscale;
        const std::size_t max_iter = 50 * (rows_ + cols_) + 100;
        std::vector<bool> in_basis(cols_, false);
        for (std::size_t it = 0; it < max_iter; ++it) {
            std::fill(in_basis.begin(), in_basis.end(), false);
            for (std::size_t r = 0; r < rows_; ++r)
                in_basis[basis_[r]] = true;
            std::size_t enter = cols_;
            for (std::size_t c = 0; c < cols_; ++c) {
                if (!allowed[c] || in_basis[c])
                    continue;
                double red = cost[c];
                for (std::size_t r = 0; r < rows_; ++r)
                    red -= cost[basis_[r]] * at(r, c);
                if (red < -tol) {
                    enter = c;
                    break;
                }
            }
            if (enter == cols_)
                return true;
            std::size_t leave = rows_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < rows_; ++r) {
                const double a = at(r, enter);
                if (a <= kPivotEps)
                    continue;
                const double ratio = std::max(rhs(r), 0.0) / a;
                if (ratio < best || (ratio == best && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == rows_)
                return false;
            pivot(leave, enter);
        }
        return true; // iteration cap; current basis is feasible
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
};

} // namespace

LpResult solve_lp(std::span<const double> c, std::span<const double> A, std::span<const double> b)
{
    const std::size_t m = b.size();
    const std::size_t n = c.size();
    std::size_t n_art = 0;
    for (double v : b)
        n_art += v < 0.0 ? 1 : 0;
    const std::size_t cols = n + m + n_art;
    Tableau tab(m, cols);
    std::size_t art = n + m;
    for (std::size_t i = 0; i < m; ++i) {
        const double sign = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j)
            tab.at(i, j) = sign * A[i * n + j];
        tab.at(i, n + i) = sign;
        tab.rhs(i) = sign * b[i];
        if (b[i] < 0.0) {
            tab.at(i, art) = 1.0;
            tab.basis(i) = art++;
        } else {
            tab.basis(i) = n + i;
        }
    }

    std::vector<bool> allowed(cols, true);
    if (n_art > 0) {
        std::vector<double> w(cols, 0.0);
        for (std::size_t j = n + m; j < cols; ++j)
            w[j] = 1.0;
        tab.optimize(w, allowed);
        double infeas = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            scale = std::max(scale, std::abs(b[i]));
            if (tab.basis(i) >= n + m)
                infeas += tab.rhs(i);
        }
        if (infeas > 1e-10 * scale)
            return {LpStatus::infeasible, {}, 0.0};
        for (std::size_t i = 0; i < m; ++i) {
            if (tab.basis(i) < n + m)
                continue;
            for (std::size_t j = 0; j < n + m; ++j) {
                if (std::abs(tab.at(i, j)) > 1e-9) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
        for (std::size_t j = n + m; j < cols; ++j)
            allowed[j] = false;
    }

    std::vector<double> cost(cols, 0.0);
    std::copy(c.begin(), c.end(), cost.begin());
    if (!tab.optimize(cost, allowed))
        return {LpStatus::unbounded, {}, 0.0};

    LpResult res{LpStatus::optimal, std::vector<double>(n, 0.0), 0.0};
    for (std::size_t i = 0; i < m; ++i)
        if (tab.basis(i) < n)
            res.z[tab.basis(i)] = std::max(tab.rhs(i), 0.0);
    for (std::size_t j = 0; j < n; ++j)
        res.objective += c[j] * res.z[j];
    return res;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Solver

namespace {

struct Vertex {
    std::vector<double> x; // free coordinates only
    double f = 0.0;
    std::vector<double> g;
    double viol = 0.0;
};

// In-place Gauss-Jordan inverse of the n x n row-major matrix `a`.
bool invert(std::vector<double> a, std::size_t n, std::vector<double>& inv)
{
    inv.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        inv[i * n + i] = 1.0;
    double scale = 0.0;
    for (double v : a)
        scale = std::max(scale, std::abs(v));
    if (scale == 0.0)
        return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col]))
                piv = r;
        if (std::abs(a[piv * n + col]) < 1e-12 * scale)
            return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a[piv * n + c], a[col * n + c]);
                std::swap(inv[piv * n + c], inv[col * n + c]);
            }
        }
        const double p = a[col * n + col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double factor = a[r * n + col];
            if (factor == 0.0)
                continue;
            for (std::size_t c = 0; c < n; ++c) {
                a[r * n + c] -= factor * a[col * n + c];
                inv[r * n + c] -= factor * inv[col * n + c];
            }
        }
    }
    return true;
}

class Cobyla {
public:
    Cobyla(const Function& f, const std::vector<Function>& cons, std::span<const double> x0, const Bounds& bounds,
           const CobylaSettings& s)
        : f_(f), cons_(cons), full_(x0.begin(), x0.end()), bounds_(bounds), s_(s)
    {
        for (std::size_t i = 0; i < full_.size(); ++i)
            if (bounds_.upper[i] > bounds_.lower[i])
                free_.push_back(i);
        n_ = free_.size();
        for (auto i : free_) {
            lo_.push_back(bounds_.lower[i]);
            hi_.push_back(bounds_.upper[i]);
        }
    }

    CobylaResult run()
    {
        CobylaResult res;
        if (n_ == 0) {
            Vertex v = evaluate(full_);
            res.x = expand(v.x);
            res.f = v.f;
            res.max_violation = v.viol;
            res.evaluations = nfev_;
            return res;
        }

        rho_ = s_.rho_beg;
        std::vector<double> start(n_);
        for (std::size_t k = 0; k < n_; ++k)
            start[k] = full_[free_[k]];
        build_initial_simplex(start);

        bool need_geometry = false;
        int idle = 0;
        int geometry_steps = 0; // since the last change of rho
        CobylaStatus status = CobylaStatus::converged;
        for (;;) {
            if (nfev_ >= s_.maxfun) {
                status = CobylaStatus::maxfun_reached;
                break;
            }
            select_best();
            if (!factorize()) {
                rebuild_simplex();
                continue;
            }
            compute_models();

            if (need_geometry) {
                need_geometry = false;
                if (!geometry_ok() && geometry_steps < 2 * static_cast<int>(n_) + 2) {
                    improve_geometry();
                    ++geometry_steps;
                    continue;
                }
                geometry_steps = 0;
                if (!reduce_rho())
                    break;
                continue;
            }

            // Trust-region step.
            std::vector<double> d;
            double pred_viol = 0.0;
            solve_subproblem(d, pred_viol);
            double dnorm = 0.0;
            for (double v : d)
                dnorm = std::max(dnorm, std::abs(v));
            if (dnorm < 0.1 * rho_) {
                need_geometry = true;
                continue;
            }

            const Vertex& best = verts_[0];
            const double pred_f_red = -std::inner_product(gf_.begin(), gf_.end(), d.begin(), 0.0);
            const double prerec = best.viol - pred_viol;
            if (prerec > 0.0) {
                const double barmu = -pred_f_red / prerec;
                if (mu_ < 1.5 * barmu) {
                    mu_ = 2.0 * barmu;
                    trace_.push_back({mu_, merit(verts_[0])});
                    if (best_index() != 0 && ++idle < 50)
                        continue;
                }
            }
            const double prerem = pred_f_red + mu_ * std::max(prerec, 0.0);
            if (!(prerem > 0.0)) {
                need_geometry = true;
                continue;
            }
            idle = 0;

            std::vector<double> xt(n_);
            for (std::size_t k = 0; k < n_; ++k)
                xt[k] = std::clamp(verts_[0].x[k] + d[k], lo_[k], hi_[k]);
            Vertex trial = evaluate(xt);
            const double ared = merit(verts_[0]) - merit(trial);
            const double ratio = ared / prerem;

            // Vertex to replace: the one whose barycentric weight for the
            // trial point is largest, scaled up for far-away vertices.
            std::size_t drop = 0;
            double best_score = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                double bary = 0.0;
                for (std::size_t k = 0; k < n_; ++k)
                    bary += dinv_[j * n_ + k] * (xt[k] - verts_[0].x[k]);
                double dist2 = 0.0;
                for (std::size_t k = 0; k < n_; ++k) {
                    const double e = verts_[j + 1].x[k] - xt[k];
                    dist2 += e * e;
                }
                const double score = std::abs(bary) * std::max(1.0, dist2 / (rho_ * rho_));
                if (score > best_score) {
                    best_score = score;
                    drop = j + 1;
                }
            }
            if (drop != 0 && best_score > 1e-8 && (ared > 0.0 || best_score > 1.0))
                verts_[drop] = std::move(trial);

            if (!(ratio >= 0.1))
                need_geometry = true;
        }

        select_best();
        res.x = expand(verts_[0].x);
        res.f = verts_[0].f;
        res.max_violation = verts_[0].viol;
        res.status = status;
        res.evaluations = nfev_;
        res.merit_trace = std::move(trace_);
        return res;
    }

private:
    std::vector<double> expand(const std::vector<double>& xf) const
    {
        std::vector<double> x = full_;
        if (n_ == 0)
            return xf;
        for (std::size_t k = 0; k < n_; ++k)
            x[free_[k]] = xf[k];
        return bounds_.clip(x);
    }

    Vertex evaluate(const std::vector<double>& xf)
    {
        const std::vector<double> x = n_ == 0 ? xf : expand(xf);
        Vertex v;
        v.x = xf;
        v.f = f_(x);
        if (std::isnan(v.f))
            throw NumericError("COBYLA: objective returned NaN");
        v.g.resize(cons_.size());
        for (std::size_t k = 0; k < cons_.size(); ++k) {
            v.g[k] = cons_[k](x);
            if (std::isnan(v.g[k]))
                throw NumericError("COBYLA: constraint returned NaN");
            v.viol = std::max(v.viol, -v.g[k]);
        }
        ++nfev_;
        return v;
    }

    double merit(const Vertex& v) const { return v.f + mu_ * v.viol; }

    std::size_t best_index() const
    {
        std::size_t best = 0;
        for (std::size_t j = 1; j < verts_.size(); ++j) {
            const double mj = merit(verts_[j]);
            const double mb = merit(verts_[best]);
            if (mj < mb || (mj == mb && verts_[j].viol < verts_[best].viol))
                best = j;
        }
        return best;
    }

    void select_best()
    {
        const std::size_t b = best_index();
        if (b != 0) {
            std::swap(verts_[0], verts_[b]);
            trace_.push_back({mu_, merit(verts_[0])});
        }
    }

    double initial_step(std::size_t k, double x, double rho) const
    {
        if (x + rho <= hi_[k])
            return rho;
        if (x - rho >= lo_[k])
            return -rho;
        return hi_[k] - x >= x - lo_[k] ? hi_[k] - x : lo_[k] - x;
    }

    void build_initial_simplex(const std::vector<double>& start)
    {
        verts_.clear();
        verts_.push_back(evaluate(start));
        trace_.push_back({mu_, merit(verts_[0])});
        for (std::size_t k = 0; k < n_ && nfev_ < s_.maxfun; ++k) {
            std::vector<double> x = start;
            x[k] += initial_step(k, start[k], rho_);
            verts_.push_back(evaluate(x));
        }
        while (verts_.size() < n_ + 1) // maxfun too small to finish; pad with the base
            verts_.push_back(verts_[0]);
    }

    void rebuild_simplex()
    {
        const std::vector<double> base = verts_[0].x;
        Vertex keep = verts_[0];
        verts_.assign(1, keep);
        for (std::size_t k = 0; k < n_; ++k) {
            if (nfev_ >= s_.maxfun) {
                verts_.push_back(keep);
                continue;
            }
            std::vector<double> x = base;
            x[k] += initial_step(k, base[k], rho_);
            verts_.push_back(evaluate(x));
        }
    }

    bool factorize()
    {
        std::vector<double> dm(n_ * n_);
        for (std::size_t j = 0; j < n_; ++j)
            for (std::size_t k = 0; k < n_; ++k)
                dm[k * n_ + j] = verts_[j + 1].x[k] - verts_[0].x[k];
        dmat_ = dm;
        return invert(std::move(dm), n_, dinv_);
    }

    // Gradients from the interpolation conditions D^T grad = values - value_0.
    std::vector<double> gradient(const std::vector<double>& diff) const
    {
        std::vector<double> g(n_, 0.0);
        for (std::size_t k = 0; k < n_; ++k)
            for (std::size_t j = 0; j < n_; ++j)
                g[k] += dinv_[j * n_ + k] * diff[j];
        return g;
    }

    void compute_models()
    {
        std::vector<double> diff(n_);
        for (std::size_t j = 0; j < n_; ++j)
            diff[j] = verts_[j + 1].f - verts_[0].f;
        gf_ = gradient(diff);
        ga_.assign(cons_.size(), {});
        for (std::size_t c = 0; c < cons_.size(); ++c) {
            for (std::size_t j = 0; j < n_; ++j)
                diff[j] = verts_[j + 1].g[c] - verts_[0].g[c];
            ga_[c] = gradient(diff);
        }
    }

    // Distances are measured in the infinity norm, the norm of the trust
    // region, so a vertex placed by a full step from the best vertex passes.
    double edge_length(std::size_t j) const
    {
        double e = 0.0;
        for (std::size_t k = 0; k < n_; ++k)
            e = std::max(e, std::abs(dmat_[k * n_ + j]));
        return e;
    }

    // Euclidean distance from vertex j+1 to the face spanned by the others.
    double face_distance(std::size_t j) const
    {
        double s2 = 0.0;
        for (std::size_t k = 0; k < n_; ++k)
            s2 += dinv_[j * n_ + k] * dinv_[j * n_ + k];
        return 1.0 / std::sqrt(s2);
    }

    bool geometry_ok() const
    {
        for (std::size_t j = 0; j < n_; ++j)
            if (edge_length(j) > 2.1 * rho_ || face_distance(j) < 0.25 * rho_)
                return false;
        return true;
    }

    void improve_geometry()
    {
        // Farthest vertex first; otherwise the one closest to its opposite face.
        std::size_t pick = 0;
        double worst_eta = 0.0;
        double worst_sig = std::numeric_limits<double>::infinity();
        std::size_t pick_sig = 0;
        for (std::size_t j = 0; j < n_; ++j) {
            const double eta = edge_length(j);
            const double sig = face_distance(j);
            if (eta > 2.1 * rho_ && eta > worst_eta) {
                worst_eta = eta;
                pick = j + 1;
            }
            if (sig < worst_sig) {
                worst_sig = sig;
                pick_sig = j + 1;
            }
        }
        if (pick == 0)
            pick = pick_sig;
        const std::size_t j = pick - 1;

        double norm = 0.0;
        for (std::size_t k = 0; k < n_; ++k)
            norm += dinv_[j * n_ + k] * dinv_[j * n_ + k];
        norm = std::sqrt(norm);
        std::vector<double> dir(n_);
        for (std::size_t k = 0; k < n_; ++k)
            dir[k] = 0.5 * rho_ * dinv_[j * n_ + k] / norm;

        // Sign with the lower linear merit prediction, preferring a point
        // that stays inside the bounds.
        auto predicted = [&](double sign) {
            double df = 0.0;
            double viol = 0.0;
            for (std::size_t k = 0; k < n_; ++k)
                df += gf_[k] * sign * dir[k];
            for (std::size_t c = 0; c < cons_.size(); ++c) {
                double g = verts_[0].g[c];
                for (std::size_t k = 0; k < n_; ++k)
                    g += ga_[c][k] * sign * dir[k];
                viol = std::max(viol, -g);
            }
            return df + mu_ * viol;
        };
        auto inside = [&](double sign) {
            for (std::size_t k = 0; k < n_; ++k) {
                const double v = verts_[0].x[k] + sign * dir[k];
                if (v < lo_[k] || v > hi_[k])
                    return false;
            }
            return true;
        };
        double sign = predicted(1.0) <= predicted(-1.0) ? 1.0 : -1.0;
        if (!inside(sign) && inside(-sign))
            sign = -sign;
        std::vector<double> x(n_);
        for (std::size_t k = 0; k < n_; ++k)
            x[k] = std::clamp(verts_[0].x[k] + sign * dir[k], lo_[k], hi_[k]);
        verts_[pick] = evaluate(x);
    }

    bool reduce_rho()
    {
        if (rho_ <= s_.rho_end)
            return false;
        rho_ *= 0.5;
        if (rho_ <= 1.5 * s_.rho_end)
            rho_ = s_.rho_end;
        // Shrink mu when the constraint spread across the simplex allows it.
        if (mu_ > 0.0) {
            double denom = 0.0;
            for (std::size_t c = 0; c < cons_.size(); ++c) {
                double cmin = std::numeric_limits<double>::infinity();
                double cmax = -std::numeric_limits<double>::infinity();
                for (const auto& v : verts_) {
                    cmin = std::min(cmin, v.g[c]);
                    cmax = std::max(cmax, v.g[c]);
                }
                if (cmin < 0.5 * cmax) {
                    const double t = std::max(cmax, 0.0) - cmin;
                    denom = denom <= 0.0 ? t : std::min(denom, t);
                }
            }
            double fmin = std::numeric_limits<double>::infinity();
            double fmax = -std::numeric_limits<double>::infinity();
            for (const auto& v : verts_) {
                fmin = std::min(fmin, v.f);
                fmax = std::max(fmax, v.f);
            }
            const double old = mu_;
            if (denom == 0.0)
                mu_ = 0.0;
            else if (fmax - fmin < mu_ * denom)
                mu_ = (fmax - fmin) / denom;
            if (mu_ != old)
                trace_.push_back({mu_, merit(verts_[0])});
        }
        return true;
    }

    // Linear programme over the box max(-rho, lo - x0) <= d <= min(rho, hi - x0).
    // Stage one minimizes the largest linearized violation t; stage two
    // minimizes the linear objective while keeping violations within t.
    void solve_subproblem(std::vector<double>& d, double& pred_viol) const
    {
        const Vertex& v0 = verts_[0];
        std::vector<double> lo(n_), width(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            const double l = std::min(0.0, std::max(-rho_, lo_[k] - v0.x[k]));
            const double u = std::max(0.0, std::min(rho_, hi_[k] - v0.x[k]));
            lo[k] = l;
            width[k] = u - l;
        }
        const std::size_t K = cons_.size();
        d.assign(n_, 0.0);

        if (K == 0) {
            for (std::size_t k = 0; k < n_; ++k)
                d[k] = gf_[k] > 0.0 ? lo[k] : (gf_[k] < 0.0 ? lo[k] + width[k] : 0.0);
            pred_viol = 0.0;
            return;
        }

        // c_k + a_k.l, the linearized constraint value at d = lo.
        std::vector<double> at_lo(K);
        double t0 = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            at_lo[c] = v0.g[c] + std::inner_product(ga_[c].begin(), ga_[c].end(), lo.begin(), 0.0);
            t0 = std::max(t0, -at_lo[c]);
        }

        // Stage one: variables (y, s) with t = t0 - s.
        double t_star = 0.0;
        std::vector<double> y_stage1(n_, 0.0);
        if (t0 > 0.0) {
            const std::size_t nv = n_ + 1;
            const std::size_t rows = K + n_ + 1;
            std::vector<double> A(rows * nv, 0.0), b(rows, 0.0), cost(nv, 0.0);
            cost[n_] = -1.0;
            for (std::size_t c = 0; c < K; ++c) {
                for (std::size_t k = 0; k < n_; ++k)
                    A[c * nv + k] = -ga_[c][k];
                A[c * nv + n_] = 1.0;
                b[c] = at_lo[c] + t0;
            }
            for (std::size_t k = 0; k < n_; ++k) {
                A[(K + k) * nv + k] = 1.0;
                b[K + k] = width[k];
            }
            A[(K + n_) * nv + n_] = 1.0;
            b[K + n_] = t0;
            const auto lp = detail::solve_lp(cost, A, b);
            if (lp.status == detail::LpStatus::optimal) {
                t_star = std::max(0.0, t0 - lp.z[n_]);
                std::copy(lp.z.begin(), lp.z.begin() + static_cast<std::ptrdiff_t>(n_), y_stage1.begin());
            } else {
                t_star = t0;
            }
        }

        // Stage two.
        double cscale = 1.0;
        for (std::size_t c = 0; c < K; ++c)
            cscale = std::max(cscale, std::abs(v0.g[c]));
        const double t_allow = t_star + 1e-12 * cscale;
        const std::size_t rows = K + n_;
        std::vector<double> A(rows * n_, 0.0), b(rows, 0.0);
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t k = 0; k < n_; ++k)
                A[c * n_ + k] = -ga_[c][k];
            b[c] = at_lo[c] + t_allow;
        }
        for (std::size_t k = 0; k < n_; ++k) {
            A[(K + k) * n_ + k] = 1.0;
            b[K + k] = width[k];
        }
        const auto lp = detail::solve_lp(gf_, A, b);
        const std::vector<double>& y = lp.status == detail::LpStatus::optimal ? lp.z : y_stage1;
        for (std::size_t k = 0; k < n_; ++k)
            d[k] = lo[k] + std::clamp(y[k], 0.0, width[k]);

        pred_viol = 0.0;
        for (std::size_t c = 0; c < K; ++c)
            pred_viol = std::max(pred_viol, -(v0.g[c] + std::inner_product(ga_[c].begin(), ga_[c].end(), d.begin(), 0.0)));
    }

    const Function& f_;
    const std::vector<Function>& cons_;
    std::vector<double> full_;
    const Bounds& bounds_;
    CobylaSettings s_;

    std::vector<std::size_t> free_;
    std::size_t n_ = 0;
    std::vector<double> lo_, hi_;

    std::vector<Vertex> verts_;
    std::vector<double> dmat_; // column j = vertex j+1 - vertex 0
    std::vector<double> dinv_;
    std::vector<double> gf_;
    std::vector<std::vector<double>> ga_;
    double rho_ = 0.0;
    double mu_ = 0.0;
    int nfev_ = 0;
    std::vector<MeritRecord> trace_;
};

} // namespace

CobylaResult cobyla_minimize(const Function& f, const std::vector<Function>& constraints,
                             std::span<const double> x0, const Bounds& bounds, const CobylaSettings& settings)
{
    bounds.validate(x0.size());
    settings.validate(x0.size());
    for (double v : x0)
        if (!std::isfinite(v))
            throw ValidationError("COBYLA: non-finite initial point");
    if (bounds.violation(x0) > 1e-12)
        throw ValidationError("COBYLA: initial point lies outside the bounds");
    Cobyla solver(f, constraints, bounds.clip(x0), bounds, settings);
    return solver.run();
}

} // namespace hitlopt::opt
