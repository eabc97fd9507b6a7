#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "hitlopt/matrix.hpp"
#include "hitlopt/surrogate.hpp"

namespace hitlopt::conformal {

// Split-conformal calibration with absolute-residual scores.
struct ConformalCalibration {
    double alpha = 0.05;
    std::vector<double> scores; // ascending
    double q_hat = 0.0;         // +inf when the quantile index exceeds n

    nlohmann::json to_json() const;
    static ConformalCalibration from_json(const nlohmann::json& j);
};

struct Interval {
    double lower;
    double point;
    double upper;
    bool contains(double y) const noexcept { return y >= lower && y <= upper; }
};

// 1-based index ceil((n + 1)(1 - alpha)) into the sorted scores.
std::size_t quantile_index(std::size_t n, double alpha);

ConformalCalibration calibrate_scores(std::vector<double> scores, double alpha);
ConformalCalibration calibrate(const surrogate::GbtModel& model, const Matrix& X_cal,
                               std::span<const double> y_cal, double alpha = 0.05);

Interval predict_interval(const surrogate::GbtModel& model, const ConformalCalibration& cal,
                          std::span<const double> x);
Interval interval_around(double point, const ConformalCalibration& cal);

} // namespace hitlopt::conformal
