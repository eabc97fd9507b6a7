#include "hitlopt/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "hitlopt/error.hpp"

namespace hitlopt::opt {

void ObjectiveSpec::validate() const
{
    if (!te_model || !thr_model)
        throw ValidationError("objective needs both a TE and a THR model");
    if (te_model->feature_names() != thr_model->feature_names())
        throw ValidationError("TE and THR models must share the feature schema");
    if (!(te_norm.max > te_norm.min) || !(thr_norm.max > thr_norm.min))
        throw ValidationError("objective normalization ranges must be non-degenerate");
}

double scalarized_objective(const ObjectiveSpec& spec, std::span<const double> x)
{
    if (x.size() != spec.dimension())
        throw ValidationError("objective expects " + std::to_string(spec.dimension()) + " variables, got " +
                              std::to_string(x.size()));
    for (double v : x)
        if (!(v >= -0.1 && v <= 1.1))
            throw ValidationError("objective evaluated outside the scaled box [-0.1, 1.1]");
    const double te = spec.te_norm.normalize(spec.te_model->predict(x));
    const double thr = spec.thr_norm.normalize(spec.thr_model->predict(x));
    return -spec.w_te * te + spec.w_thr * thr;
}

std::vector<std::pair<std::size_t, std::size_t>> ToleranceConstraintSet::pairs() const
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (empty())
        return out;
    if (all_pairs) {
        for (std::size_t i = 0; i < features.size(); ++i)
            for (std::size_t j = i + 1; j < features.size(); ++j)
                out.emplace_back(features[i], features[j]);
    } else {
        for (std::size_t i = 0; i + 1 < features.size(); ++i)
            out.emplace_back(features[i], features[i + 1]);
    }
    return out;
}

void ToleranceConstraintSet::validate(std::size_t n_vars) const
{
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw ValidationError("tolerance tau must be positive");
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i] >= n_vars)
            throw ValidationError("tolerance constraint refers to a variable outside the problem");
        for (std::size_t j = 0; j < i; ++j)
            if (features[j] == features[i])
                throw ValidationError("tolerance constraint lists a variable twice");
    }
}

nlohmann::json ToleranceConstraintSet::to_json() const
{
    return {{"features", features}, {"tau", tau}, {"all_pairs", all_pairs}};
}

std::vector<Function> build_constraints(const ToleranceConstraintSet& set)
{
    std::vector<Function> out;
    const double tau = set.tau;
    for (auto [i, j] : set.pairs()) {
        out.emplace_back([=](std::span<const double> x) { return tau - (x[i] - x[j]); });
        out.emplace_back([=](std::span<const double> x) { return tau - (x[j] - x[i]); });
    }
    return out;
}

double max_chain_violation(const ToleranceConstraintSet& set, std::span<const double> x)
{
    double worst = 0.0;
    for (auto [i, j] : set.pairs())
        worst = std::max(worst, std::abs(x[i] - x[j]));
    return worst;
}

void OptimizationProblem::validate() const
{
    objective.validate();
    const std::size_t n = objective.dimension();
    bounds.validate(n);
    if (!variables.empty() && variables.size() != n)
        throw ValidationError("problem variable list does not match the model width");
    if (scaler.size() != 0 && scaler.size() != n)
        throw ValidationError("problem scaler does not match the model width");
    if (constraints)
        constraints->validate(n);
}

nlohmann::json interval_to_json(const conformal::Interval& iv)
{
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v))
            return v;
        return v > 0 ? "inf" : "-inf";
    };
    return {{"lower", num(iv.lower)}, {"point", iv.point}, {"upper", num(iv.upper)}};
}

nlohmann::json SolutionRecord::to_json() const
{
    nlohmann::json j = {{"guess_id", guess_id},
                        {"x_scaled", x_scaled},
                        {"x_eng", x_eng},
                        {"te_pred", interval_to_json(te_pred)},
                        {"thr_pred", interval_to_json(thr_pred)},
                        {"objective_value", objective_value},
                        {"feasible", feasible},
                        {"max_chain_violation", max_chain_violation},
                        {"evaluations", evaluations},
                        {"status", status}};
    if (!error.empty())
        j["error"] = error;
    return j;
}

namespace {

SolutionRecord solve_one(const OptimizationProblem& p, const std::vector<Function>& cons, std::size_t id,
                         std::span<const double> guess, const CobylaSettings& settings)
{
    SolutionRecord rec;
    rec.guess_id = id;
    Function f = [&p](std::span<const double> x) { return scalarized_objective(p.objective, x); };
    try {
        const CobylaResult r = cobyla_minimize(f, cons, guess, p.bounds, settings);
        rec.x_scaled = r.x;
        rec.objective_value = r.f;
        rec.evaluations = r.evaluations;
        rec.status = std::string(to_string(r.status));
    } catch (const Error& e) {
        rec.x_scaled.assign(guess.begin(), guess.end());
        rec.objective_value = std::nan("");
        rec.status = "error";
        rec.error = e.what();
        rec.feasible = false;
        return rec;
    }

    const double te = p.objective.te_model->predict(rec.x_scaled);
    const double thr = p.objective.thr_model->predict(rec.x_scaled);
    rec.te_pred = p.te_calibration ? conformal::interval_around(te, *p.te_calibration) : conformal::Interval{te, te, te};
    rec.thr_pred =
        p.thr_calibration ? conformal::interval_around(thr, *p.thr_calibration) : conformal::Interval{thr, thr, thr};
    rec.x_eng = p.scaler.size() ? p.scaler.inverse_row(rec.x_scaled) : rec.x_scaled;

    const bool in_bounds = p.bounds.violation(rec.x_scaled) <= kBoundsTol;
    if (p.constraints && !p.constraints->empty()) {
        rec.max_chain_violation = max_chain_violation(*p.constraints, rec.x_scaled);
        rec.feasible = in_bounds && rec.max_chain_violation <= p.constraints->tau + kFeasibilityTol;
    } else {
        rec.feasible = in_bounds;
    }
    return rec;
}

} // namespace

std::vector<SolutionRecord> solve_batch(const OptimizationProblem& problem, const Matrix& guesses,
                                        const CobylaSettings& settings, int jobs, std::vector<std::string>* warnings)
{
    problem.validate();
    const std::size_t n = problem.objective.dimension();
    if (guesses.rows() == 0)
        throw EmptyInputError("solve_batch needs at least one initial guess");
    if (guesses.cols() != n)
        throw ValidationError("initial guesses have the wrong width");
    settings.validate(n);

    std::vector<std::vector<double>> starts(guesses.rows());
    for (std::size_t r = 0; r < guesses.rows(); ++r) {
        auto row = guesses.row(r);
        if (problem.bounds.violation(row) > 0.0 && warnings)
            warnings->push_back("initial guess " + std::to_string(r) + " clipped into the bounds");
        starts[r] = problem.bounds.clip(row);
    }

    const std::vector<Function> cons =
        problem.constraints ? build_constraints(*problem.constraints) : std::vector<Function>{};
    std::vector<SolutionRecord> out(starts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < starts.size(); i = next++)
            out[i] = solve_one(problem, cons, i, starts[i], settings);
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs > 0 ? static_cast<std::size_t>(jobs) : 1, 1, starts.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    return out;
}

} // namespace hitlopt::opt
