#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"

#include "hitlopt/error.hpp"
#include "hitlopt/surrogate.hpp"
#include "hitlopt/synth.hpp"

using namespace hitlopt;
using surrogate::GbtModel;
using surrogate::HyperParams;
using surrogate::RegressionTree;
using surrogate::TreeNode;

namespace {

RegressionTree stump(int feature, double threshold, double left, double right)
{
    std::vector<TreeNode> nodes(3);
    nodes[0] = {feature, threshold, 1, 2, 0.0, 10.0};
    nodes[1].value = left;
    nodes[1].cover = 5.0;
    nodes[2].value = right;
    nodes[2].cover = 5.0;
    return RegressionTree(nodes);
}

void make_data(std::size_t n, std::size_t m, std::uint64_t seed, Matrix& X, std::vector<double>& y)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    X = Matrix(n, m);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k)
            X(i, k) = u(rng);
        y[i] = std::sin(4 * X(i, 0)) + X(i, 1 % m) * X(i, 1 % m) + 0.1 * u(rng);
    }
}

void check_structure(const RegressionTree& t, int max_depth)
{
    CHECK(t.depth() <= max_depth);
    for (const auto& nd : t.nodes()) {
        if (nd.is_leaf())
            continue;
        REQUIRE(nd.left > 0);
        REQUIRE(nd.right > 0);
        const auto& l = t.nodes()[static_cast<std::size_t>(nd.left)];
        const auto& r = t.nodes()[static_cast<std::size_t>(nd.right)];
        CHECK(l.cover + r.cover == nd.cover);
    }
}

} // namespace

TEST_CASE("hyperparameter validation")
{
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    for (auto mutate : std::vector<void (*)(HyperParams&)>{
             [](HyperParams& h) { h.eta = 0.0; }, [](HyperParams& h) { h.eta = 1.5; },
             [](HyperParams& h) { h.gamma = -1; }, [](HyperParams& h) { h.reg_lambda = -1; },
             [](HyperParams& h) { h.max_depth = 0; }, [](HyperParams& h) { h.subsample = 0; },
             [](HyperParams& h) { h.colsample_bytree = 1.1; }, [](HyperParams& h) { h.n_estimators = 0; }}) {
        HyperParams bad;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }
    CHECK(HyperParams::from_json(hp.to_json()) == hp);
}

TEST_CASE("predict examples")
{
    const GbtModel empty(3.5, 0.1, {}, {"a"}, "y");
    CHECK(empty.predict(std::vector<double>{0.7}) == 3.5);
    const GbtModel m(10.0, 0.5, {stump(0, 0.5, -1.0, 1.0)}, {"a"}, "y");
    CHECK(m.predict(std::vector<double>{0.2}) == 9.5);
    CHECK(m.predict(std::vector<double>{0.5}) == 10.5);
    CHECK_THROWS_AS(m.predict(std::vector<double>{0.2, 0.3}), ValidationError);
    Matrix X(3, 1);
    X(0, 0) = 0.1;
    X(1, 0) = 0.9;
    X(2, 0) = 0.4;
    const auto batch = m.predict(X);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(batch[i] == m.predict(X.row(i)));
}

TEST_CASE("a tree with all-zero leaves leaves predictions unchanged")
{
    const GbtModel a(1.0, 0.3, {stump(0, 0.5, -1.0, 2.0)}, {"a", "b"}, "y");
    const GbtModel b(1.0, 0.3, {stump(0, 0.5, -1.0, 2.0), stump(1, 0.3, 0.0, 0.0)}, {"a", "b"}, "y");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x{u(rng), u(rng)};
        CHECK(a.predict(x) == b.predict(x));
    }
}

TEST_CASE("constant target gives a constant model")
{
    Matrix X;
    std::vector<double> y;
    make_data(50, 3, 1, X, y);
    std::fill(y.begin(), y.end(), 7.25);
    const auto m = surrogate::train_gbt(X, y, HyperParams{}, 1);
    CHECK(m.base_score() == 7.25);
    for (const auto& t : m.trees())
        for (const auto& nd : t.nodes())
            if (nd.is_leaf())
                CHECK(nd.value == 0.0);
    CHECK(m.predict(X.row(3)) == 7.25);
}

TEST_CASE("one deep tree with eta 1 interpolates tiny data")
{
    Matrix X(6, 1);
    std::vector<double> y{3, -1, 4, 1, -5, 9};
    for (std::size_t i = 0; i < 6; ++i)
        X(i, 0) = static_cast<double>(i);
    HyperParams hp;
    hp.n_estimators = 1;
    hp.eta = 1.0;
    hp.max_depth = 6;
    hp.reg_lambda = 0.0;
    hp.subsample = 1.0;
    const auto m = surrogate::train_gbt(X, y, hp, 3);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(m.predict(X.row(i)) == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("training is deterministic, respects depth, and keeps cover counts consistent")
{
    Matrix X;
    std::vector<double> y;
    make_data(300, 4, 5, X, y);
    HyperParams hp;
    hp.n_estimators = 40;
    hp.max_depth = 3;
    hp.colsample_bytree = 0.5;
    const auto a = surrogate::train_gbt(X, y, hp, 11);
    const auto b = surrogate::train_gbt(X, y, hp, 11);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.to_json().dump() != surrogate::train_gbt(X, y, hp, 12).to_json().dump());
    CHECK(a.trees().size() == 40);
    for (const auto& t : a.trees())
        check_structure(t, 3);
}

TEST_CASE("prediction equals base plus eta times the tree sum")
{
    Matrix X;
    std::vector<double> y;
    make_data(200, 3, 6, X, y);
    HyperParams hp;
    hp.n_estimators = 25;
    const auto m = surrogate::train_gbt(X, y, hp, 1);
    for (std::size_t i = 0; i < 20; ++i) {
        double s = 0.0;
        for (const auto& t : m.trees())
            s += t.evaluate(X.row(i));
        CHECK(m.predict(X.row(i)) == doctest::Approx(m.base_score() + m.eta() * s).epsilon(1e-14));
    }
}

TEST_CASE("training loss is nonincreasing without subsampling")
{
    Matrix X;
    std::vector<double> y;
    make_data(400, 5, 8, X, y);
    HyperParams hp;
    hp.subsample = 1.0;
    hp.colsample_bytree = 1.0;
    hp.n_estimators = 120;
    std::vector<double> trace;
    surrogate::TrainOptions opts;
    opts.rmse_trace = &trace;
    const auto m = surrogate::train_gbt(X, y, hp, 1, opts);
    REQUIRE(trace.size() == 121);
    for (std::size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i] <= trace[i - 1] + 1e-12);
    CHECK(trace.back() == doctest::Approx(surrogate::rmse(y, m.predict(X))).epsilon(1e-12));
}

TEST_CASE("serialization round-trips predictions")
{
    Matrix X;
    std::vector<double> y;
    make_data(200, 4, 9, X, y);
    HyperParams hp;
    hp.n_estimators = 30;
    surrogate::TrainOptions opts;
    opts.feature_names = {"a", "b", "c", "d"};
    opts.target_name = "TE";
    opts.scaler_hash = "abc";
    const auto m = surrogate::train_gbt(X, y, hp, 1, opts);
    const auto back = GbtModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.target_name() == "TE");
    CHECK(back.scaler_hash() == "abc");
    CHECK(back.feature_names() == opts.feature_names);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
        CHECK(back.predict(x) == m.predict(x));
    }
}

TEST_CASE("training input errors")
{
    Matrix X(0, 2);
    std::vector<double> y;
    CHECK_THROWS_AS(surrogate::train_gbt(X, y, HyperParams{}, 1), ValidationError);
    Matrix X2(3, 1, 0.5);
    CHECK_THROWS_AS(surrogate::train_gbt(X2, std::vector<double>{1, 2}, HyperParams{}, 1), ValidationError);
    HyperParams bad;
    bad.max_depth = 0;
    CHECK_THROWS_AS(surrogate::train_gbt(X2, std::vector<double>{1, 2, 3}, bad, 1), ValidationError);
}

TEST_CASE("metric examples and identities")
{
    CHECK(surrogate::r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(surrogate::r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}) == 0.0);
    CHECK(surrogate::r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) == doctest::Approx(0.5));
    CHECK(surrogate::rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(std::sqrt(12.5)));
    CHECK(surrogate::rmse(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK_THROWS_AS(surrogate::r_squared(std::vector<double>{2, 2}, std::vector<double>{1, 2}), NumericError);

    std::mt19937_64 rng(10);
    std::normal_distribution<double> z;
    for (int k = 0; k < 30; ++k) {
        std::vector<double> y(25), yh(25), yk(25);
        const double scale = 0.5 + std::abs(z(rng));
        for (std::size_t i = 0; i < 25; ++i) {
            y[i] = z(rng);
            yh[i] = y[i] + 0.3 * z(rng);
            yk[i] = y[i] + scale * (yh[i] - y[i]);
        }
        const double my = std::accumulate(y.begin(), y.end(), 0.0) / 25.0;
        double sst = 0.0;
        for (double v : y)
            sst += (v - my) * (v - my);
        const double r = surrogate::rmse(y, yh);
        CHECK(std::abs(surrogate::r_squared(y, yh) - (1.0 - r * r * 25.0 / sst)) <= 1e-10);
        CHECK(surrogate::rmse(y, yk) == doctest::Approx(scale * r).epsilon(1e-12));
    }
    const auto ev = surrogate::evaluate(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 5});
    CHECK(ev.r2 == doctest::Approx(0.8));
    CHECK(ev.rmse == doctest::Approx(0.5));
    CHECK(ev.n == 4);
}
