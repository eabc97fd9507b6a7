#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hitlopt/cobyla.hpp"
#include "hitlopt/conformal.hpp"
#include "hitlopt/data.hpp"
#include "hitlopt/matrix.hpp"
#include "hitlopt/surrogate.hpp"

namespace hitlopt::opt {

inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kBoundsTol = 1e-9;

struct NormRange {
    double min = 0.0;
    double max = 1.0;

    double normalize(double v) const { return (v - min) / (max - min); }
    nlohmann::json to_json() const { return {min, max}; }
};

// f(x) = -w_te * norm(TE(x)) + w_thr * norm(THR(x)), both surrogates fed the
// scaled operating vector.
struct ObjectiveSpec {
    std::shared_ptr<const surrogate::GbtModel> te_model;
    std::shared_ptr<const surrogate::GbtModel> thr_model;
    NormRange te_norm;
    NormRange thr_norm;
    double w_te = 1.0;
    double w_thr = 1.0;

    void validate() const;
    std::size_t dimension() const { return te_model->feature_count(); }
};

// Throws ValidationError on a width mismatch or when x leaves [-0.1, 1.1].
double scalarized_objective(const ObjectiveSpec& spec, std::span<const double> x);

// Pairwise tolerance |x_i - x_j| <= tau over an ordered list of variable
// indices: consecutive pairs by default, every pair when all_pairs is set.
struct ToleranceConstraintSet {
    std::vector<std::size_t> features;
    double tau = 0.05;
    bool all_pairs = false;

    bool empty() const noexcept { return features.size() < 2; }
    std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
    void validate(std::size_t n_vars) const;
    nlohmann::json to_json() const;
};

// Two smooth inequalities per pair: tau - (x_i - x_j) >= 0 and
// tau - (x_j - x_i) >= 0. Fewer than two features gives no constraints.
std::vector<Function> build_constraints(const ToleranceConstraintSet& set);

// Largest |x_i - x_j| over the constrained pairs (0 for an empty set).
double max_chain_violation(const ToleranceConstraintSet& set, std::span<const double> x);

struct OptimizationProblem {
    ObjectiveSpec objective;
    Bounds bounds;
    std::optional<ToleranceConstraintSet> constraints;
    std::vector<std::string> variables;
    // Scaler over `variables`, used to report engineering units.
    ScalingParams scaler;
    std::optional<conformal::ConformalCalibration> te_calibration;
    std::optional<conformal::ConformalCalibration> thr_calibration;

    void validate() const;
};

struct SolutionRecord {
    std::size_t guess_id = 0;
    std::vector<double> x_scaled;
    std::vector<double> x_eng;
    conformal::Interval te_pred{0.0, 0.0, 0.0};
    conformal::Interval thr_pred{0.0, 0.0, 0.0};
    double objective_value = 0.0;
    bool feasible = false;
    double max_chain_violation = 0.0;
    int evaluations = 0;
    std::string status;
    std::string error;

    nlohmann::json to_json() const;
};

// Solves one problem per guess row (scaled space), `jobs` guesses at a time.
// Guesses outside the bounds are clipped; a message per clipped guess is
// appended to `warnings` when given. Records come back in guess order.
std::vector<SolutionRecord> solve_batch(const OptimizationProblem& problem, const Matrix& guesses,
                                        const CobylaSettings& settings, int jobs = 1,
                                        std::vector<std::string>* warnings = nullptr);

nlohmann::json interval_to_json(const conformal::Interval& iv);

} // namespace hitlopt::opt
