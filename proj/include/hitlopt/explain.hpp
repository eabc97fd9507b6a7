#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitlopt/matrix.hpp"
#include "hitlopt/surrogate.hpp"

namespace hitlopt::explain {

// Expected model output under the training cover distribution,
// base_score + eta * sum_t E[tree_t].
double base_value(const surrogate::GbtModel& model);

// Exact path-dependent TreeSHAP. Satisfies base_value + sum(phi) = predict(x).
// Throws ValidationError if any node lacks a positive cover.
std::vector<double> tree_shap(const surrogate::GbtModel& model, std::span<const double> x);
std::vector<double> tree_shap(const surrogate::RegressionTree& tree, std::span<const double> x,
                              std::size_t feature_count);

inline constexpr std::size_t kBruteForceMaxFeatures = 15;

// Shapley values by enumerating all 2^m coalitions, with the same
// cover-weighted conditional expectation as tree_shap.
std::vector<double> shap_brute_force(const surrogate::GbtModel& model, std::span<const double> x);

// Cover-weighted expectation of the ensemble output with features outside
// `known` (bitmask) marginalized.
double conditional_expectation(const surrogate::GbtModel& model, std::span<const double> x,
                               unsigned long known);

struct FeatureContribution {
    std::string feature;
    double mean_abs_shap;
    double percent;
};

struct ShapReport {
    std::string target;
    double base_value = 0.0;
    std::vector<std::vector<double>> attributions;
    // Sorted by descending contribution.
    std::vector<FeatureContribution> ranking;

    nlohmann::json to_json(bool include_attributions = false) const;
};

ShapReport contribution_percentages(const surrogate::GbtModel& model, const Matrix& X);

} // namespace hitlopt::explain
