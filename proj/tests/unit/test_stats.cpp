#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "hitlopt/error.hpp"
#include "hitlopt/stats.hpp"

using namespace hitlopt;

namespace {

// T = nm/(n+m)^2 * sum over pooled z of (F(z) - G(z))^2
double ecdf_oracle(const std::vector<double>& a, const std::vector<double>& b)
{
    auto F = [](const std::vector<double>& s, double z) {
        return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= z; })) /
               static_cast<double>(s.size());
    };
    double acc = 0.0;
    for (const auto* s : {&a, &b})
        for (double z : *s)
            acc += std::pow(F(a, z) - F(b, z), 2);
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    return n * m / ((n + m) * (n + m)) * acc;
}

DataTable table_of(const std::vector<std::vector<double>>& cols, const std::vector<std::string>& names)
{
    std::vector<VariableDef> defs;
    for (const auto& n : names)
        defs.push_back({n, "", Role::operating, ""});
    Matrix m(cols[0].size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < cols[c].size(); ++r)
            m(r, c) = cols[c][r];
    return DataTable(FeatureSchema(defs), m);
}

} // namespace

TEST_CASE("pearson examples")
{
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(stats::pearson(x, std::vector<double>{2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats::pearson(x, std::vector<double>{-1, -2, -3, -4}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(stats::pearson(x, std::vector<double>{1, 3, 2, 4}) - 0.8) <= 1e-12);
    CHECK_THROWS_AS(stats::pearson(x, std::vector<double>{3, 3, 3, 3}), NumericError);
    CHECK_THROWS_AS(stats::pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("pearson is affine invariant up to sign")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (int k = 0; k < 50; ++k) {
        std::vector<double> x(30), y(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = z(rng);
            y[i] = 0.5 * x[i] + z(rng);
        }
        const double a = 1.0 + std::abs(z(rng)), c = -(0.5 + std::abs(z(rng)));
        std::vector<double> xa(30), yc(30);
        for (std::size_t i = 0; i < 30; ++i) {
            xa[i] = a * x[i] + 3.0;
            yc[i] = c * y[i] - 7.0;
        }
        CHECK(std::abs(stats::pearson(xa, yc) + stats::pearson(x, y)) <= 1e-12);
    }
}

TEST_CASE("correlation matrix properties and pair detection")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    const std::size_t n = 1000;
    std::vector<double> a(n), b(n), c(n), d(n, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = z(rng);
        b[i] = a[i];
        c[i] = z(rng);
    }
    const auto t = table_of({a, b, c, d}, {"a", "b", "c", "d"});
    const auto r = stats::correlation_matrix(t, 0.9);
    REQUIRE(r.correlated_pairs.size() == 1);
    CHECK(r.correlated_pairs[0].a == "a");
    CHECK(r.correlated_pairs[0].b == "b");
    CHECK(r.correlated_pairs[0].pcc == doctest::Approx(1.0));
    CHECK(r.constant_columns == std::vector<std::string>{"d"});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.at(i, i) == 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(r.at(i, j) == r.at(j, i));
            CHECK(std::abs(r.at(i, j)) <= 1.0);
        }
    }
    CHECK(std::isnan(r.at(0, 3)));
    CHECK(r.at(3, 3) == 1.0);
    CHECK(r.to_json()["matrix"][0][3].is_null());
    CHECK(stats::correlated_cluster(r, t.schema()) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("independent noise columns produce no pair")
{
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> cols(5, std::vector<double>(1000));
    for (auto& c : cols)
        for (auto& v : c)
            v = z(rng);
    const auto r = stats::correlation_matrix(table_of(cols, {"a", "b", "c", "d", "e"}), 0.9);
    CHECK(r.correlated_pairs.empty());
}

TEST_CASE("ecdf examples")
{
    CHECK(stats::ecdf({5})(5.0) == 1.0);
    CHECK(stats::ecdf({5})(4.999) == 0.0);
    CHECK(stats::ecdf({1, 2, 3, 4})(2.5) == 0.5);
    CHECK(stats::ecdf({1, 1, 2})(1.0) == doctest::Approx(2.0 / 3.0));
    const auto e = stats::ecdf({3, 1, 2, 2});
    const auto p = e.probabilities();
    CHECK(std::is_sorted(p.begin(), p.end()));
    CHECK(p.back() == 1.0);
    CHECK(e(e.values().back()) == 1.0);
    CHECK_THROWS_AS(stats::ecdf({}), ValidationError);
}

TEST_CASE("cvm against the ECDF oracle on continuous data")
{
    CHECK(stats::cvm_two_sample(std::vector<double>{1, 2}, std::vector<double>{100, 200}).statistic ==
          doctest::Approx(ecdf_oracle({1, 2}, {100, 200})).epsilon(1e-12));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + rng() % 30, m = 1 + rng() % 30;
        std::vector<double> a(n), b(m);
        for (auto& v : a)
            v = z(rng);
        for (auto& v : b)
            v = z(rng) + 0.5;
        const auto s = stats::cvm_two_sample(a, b);
        CHECK(std::abs(s.statistic - ecdf_oracle(a, b)) <= 1e-9);
        CHECK(s.statistic == doctest::Approx(stats::cvm_two_sample(b, a).statistic).epsilon(1e-12));
        CHECK(s.n == n);
        CHECK(s.m == m);
    }
}

TEST_CASE("cvm with ties uses average ranks")
{
    // Reference values from scipy.stats.cramervonmises_2samp, which ranks
    // ties the same way.
    CHECK(stats::cvm_two_sample(std::vector<double>{1, 1, 2, 3}, std::vector<double>{2, 2, 4}).statistic ==
          doctest::Approx(0.1785714285714286).epsilon(1e-12));
    CHECK(stats::cvm_two_sample(std::vector<double>{0, 0, 0, 1, 5}, std::vector<double>{0, 1, 1, 1}).statistic ==
          doctest::Approx(0.1425925925925926).epsilon(1e-12));
}

TEST_CASE("cvm of a sample against itself is zero and separation increases it")
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    for (int k = 0; k < 20; ++k) {
        std::vector<double> a(40);
        for (auto& v : a)
            v = u(rng);
        const double self = stats::cvm_two_sample(a, a).statistic;
        CHECK(std::abs(self) <= 1e-12);
        auto b = a;
        for (auto& v : b)
            v += 2.0;
        CHECK(stats::cvm_two_sample(a, b).statistic > self);
    }
    CHECK_THROWS_AS(stats::cvm_two_sample(std::vector<double>{}, std::vector<double>{1}), ValidationError);
}

TEST_CASE("kde normalization, shape and grid")
{
    const auto single = stats::kde(std::vector<double>{3.0});
    CHECK(single.grid.size() == stats::kKdeGridPoints);
    const auto peak = std::max_element(single.density.begin(), single.density.end()) - single.density.begin();
    CHECK(std::abs(single.grid[static_cast<std::size_t>(peak)] - 3.0) <= single.grid[1] - single.grid[0]);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    std::vector<double> s(300);
    for (auto& v : s)
        v = z(rng);
    const auto k = stats::kde(s);
    double integral = 0.0;
    for (std::size_t i = 1; i < k.grid.size(); ++i)
        integral += 0.5 * (k.density[i] + k.density[i - 1]) * (k.grid[i] - k.grid[i - 1]);
    CHECK(std::abs(integral - 1.0) <= 1e-3);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    CHECK(k.grid.front() == doctest::Approx(*lo - stats::kKdeGridMargin * k.bandwidth));
    CHECK(k.grid.back() == doctest::Approx(*hi + stats::kKdeGridMargin * k.bandwidth));

    std::vector<double> bi(100, 0.0);
    std::fill(bi.begin() + 50, bi.end(), 10.0);
    const auto kb = stats::kde(bi, 0.5);
    int maxima = 0;
    for (std::size_t i = 1; i + 1 < kb.density.size(); ++i)
        maxima += kb.density[i] > kb.density[i - 1] && kb.density[i] >= kb.density[i + 1] ? 1 : 0;
    CHECK(maxima == 2);
    CHECK_THROWS_AS(stats::kde(s, 0.0), ValidationError);
}

TEST_CASE("silverman bandwidth")
{
    CHECK(stats::silverman_bandwidth(std::vector<double>{2, 2, 2}) == 1.0);
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(stats::silverman_bandwidth(v) > 0.0);
    CHECK(stats::mean(v) == 4.5);
    CHECK(stats::stddev(std::vector<double>{1, 3}) == doctest::Approx(std::sqrt(2.0)));
}
