#include "hitlopt/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hitlopt/error.hpp"

namespace hitlopt::conformal {

std::size_t quantile_index(std::size_t n, double alpha)
{
    // The epsilon absorbs representation error such as 20 * 0.95 = 19.000000000000004.
    const double k = std::ceil(static_cast<double>(n + 1) * (1.0 - alpha) - 1e-9);
    return static_cast<std::size_t>(std::max(1.0, k));
}

ConformalCalibration calibrate_scores(std::vector<double> scores, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("conformal alpha must lie in (0,1)");
    if (scores.empty())
        throw EmptyInputError("conformal calibration set is empty");
    for (double s : scores)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ValidationError("nonconformity scores must be finite and nonnegative");
    std::sort(scores.begin(), scores.end());
    ConformalCalibration cal;
    cal.alpha = alpha;
    const std::size_t k = quantile_index(scores.size(), alpha);
    cal.q_hat = k > scores.size() ? std::numeric_limits<double>::infinity() : scores[k - 1];
    cal.scores = std::move(scores);
    return cal;
}

ConformalCalibration calibrate(const surrogate::GbtModel& model, const Matrix& X_cal,
                               std::span<const double> y_cal, double alpha)
{
    if (X_cal.rows() != y_cal.size())
        throw ValidationError("calibration X rows and y length differ");
    std::vector<double> scores(y_cal.size());
    for (std::size_t i = 0; i < y_cal.size(); ++i)
        scores[i] = std::abs(y_cal[i] - model.predict(X_cal.row(i)));
    return calibrate_scores(std::move(scores), alpha);
}

Interval interval_around(double point, const ConformalCalibration& cal)
{
    return {point - cal.q_hat, point, point + cal.q_hat};
}

Interval predict_interval(const surrogate::GbtModel& model, const ConformalCalibration& cal,
                          std::span<const double> x)
{
    return interval_around(model.predict(x), cal);
}

nlohmann::json ConformalCalibration::to_json() const
{
    nlohmann::json q = std::isfinite(q_hat) ? nlohmann::json(q_hat) : nlohmann::json("inf");
    return {{"alpha", alpha}, {"q_hat", q}, {"scores", scores}};
}

ConformalCalibration ConformalCalibration::from_json(const nlohmann::json& j)
{
    return calibrate_scores(j.at("scores").get<std::vector<double>>(), j.at("alpha").get<double>());
}

} // namespace hitlopt::conformal
