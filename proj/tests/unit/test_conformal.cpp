#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "hitlopt/conformal.hpp"
#include "hitlopt/error.hpp"

using namespace hitlopt;

TEST_CASE("quantile index")
{
    CHECK(conformal::quantile_index(19, 0.05) == 19);
    CHECK(conformal::quantile_index(1, 0.05) == 2);
    CHECK(conformal::quantile_index(99, 0.1) == 90);
    CHECK(conformal::quantile_index(500, 0.05) == 476);
}

TEST_CASE("calibration examples")
{
    std::vector<double> scores;
    for (int i = 19; i >= 1; --i)
        scores.push_back(i);
    const auto cal = conformal::calibrate_scores(scores, 0.05);
    CHECK(cal.q_hat == 19.0);
    CHECK(std::is_sorted(cal.scores.begin(), cal.scores.end()));

    const auto zero = conformal::calibrate_scores(std::vector<double>(30, 0.0), 0.05);
    CHECK(zero.q_hat == 0.0);
    const auto iv0 = conformal::interval_around(12.0, zero);
    CHECK(iv0.lower == 12.0);
    CHECK(iv0.upper == 12.0);

    const auto one = conformal::calibrate_scores({0.3}, 0.05);
    CHECK(std::isinf(one.q_hat));
    const auto vac = conformal::interval_around(1.0, one);
    CHECK(vac.contains(1e300));
    CHECK(vac.contains(-1e300));

    CHECK_THROWS_AS(conformal::calibrate_scores({}, 0.05), EmptyInputError);
    CHECK_THROWS_AS(conformal::calibrate_scores({1.0}, 0.0), ValidationError);
    CHECK_THROWS_AS(conformal::calibrate_scores({-1.0}, 0.1), ValidationError);
}

TEST_CASE("interval arithmetic")
{
    conformal::ConformalCalibration cal;
    cal.q_hat = 0.5;
    const auto iv = conformal::interval_around(40.0, cal);
    CHECK(iv.lower == 39.5);
    CHECK(iv.point == 40.0);
    CHECK(iv.upper == 40.5);
}

TEST_CASE("q_hat is nondecreasing in confidence level")
{
    std::mt19937_64 rng(1);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> s(200);
    for (auto& v : s)
        v = e(rng);
    double prev = -1.0;
    for (double alpha = 0.5; alpha >= 0.005; alpha -= 0.005) {
        const double q = conformal::calibrate_scores(s, alpha).q_hat;
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("calibrate uses absolute residuals of the model")
{
    const surrogate::GbtModel m(2.0, 1.0, {}, {"x"}, "y");
    Matrix X(4, 1, 0.0);
    const auto cal = conformal::calibrate(m, X, std::vector<double>{1.0, 2.5, 5.0, 2.0}, 0.2);
    CHECK(cal.scores == std::vector<double>{0.0, 0.5, 1.0, 3.0});
    CHECK(cal.q_hat == 3.0);
    const auto back = conformal::ConformalCalibration::from_json(nlohmann::json::parse(cal.to_json().dump()));
    CHECK(back.q_hat == cal.q_hat);
    CHECK(back.scores == cal.scores);
    const auto inf = conformal::ConformalCalibration::from_json(
        nlohmann::json::parse(conformal::calibrate_scores({0.3}, 0.05).to_json().dump()));
    CHECK(std::isinf(inf.q_hat));
    CHECK_THROWS_AS(conformal::calibrate(m, X, std::vector<double>{1.0}, 0.2), ValidationError);
}

TEST_CASE("marginal coverage on exchangeable data within binomial noise")
{
    // A fixed predictor and exchangeable heteroscedastic noise: coverage is
    // at least 1 - alpha in expectation.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u;
    std::normal_distribution<double> z;
    const surrogate::GbtModel m(0.0, 1.0, {}, {"x"}, "y");
    const double alpha = 0.1;
    std::size_t inside = 0, total = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> scores(200);
        for (auto& s : scores)
            s = std::abs((0.5 + u(rng)) * z(rng));
        const auto cal = conformal::calibrate_scores(scores, alpha);
        for (int i = 0; i < 200; ++i) {
            const double y = (0.5 + u(rng)) * z(rng);
            inside += conformal::interval_around(0.0, cal).contains(y) ? 1 : 0;
            ++total;
        }
    }
    const double cov = static_cast<double>(inside) / static_cast<double>(total);
    const double sigma = std::sqrt(alpha * (1 - alpha) / static_cast<double>(total));
    CHECK(cov >= 1.0 - alpha - 2.0 * sigma);
}
