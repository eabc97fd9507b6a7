#include "hitlopt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "hitlopt/error.hpp"
#include "hitlopt/kernels.hpp"

namespace hitlopt::stats {

double mean(std::span<const double> x)
{
    if (x.empty())
        throw ValidationError("mean of an empty sample");
    return kernels::sum(x) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x)
{
    if (x.size() < 2)
        throw ValidationError("standard deviation needs at least 2 values");
    const double m = mean(x);
    const auto mom = kernels::cross_moments(x, x, m, m);
    return std::sqrt(mom.sxx / static_cast<double>(x.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw ValidationError("pearson: vectors differ in length");
    if (x.size() < 2)
        throw ValidationError("pearson: need at least 2 observations");
    const double mx = mean(x);
    const double my = mean(y);
    const auto m = kernels::cross_moments(x, y, mx, my);
    if (!(m.sxx > 0.0) || !(m.syy > 0.0))
        throw NumericError("pearson: correlation undefined for a constant vector");
    const double r = m.sxy / std::sqrt(m.sxx * m.syy);
    return std::clamp(r, -1.0, 1.0);
}

nlohmann::json CorrelationReport::to_json() const
{
    nlohmann::json mat = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < names.size(); ++j) {
            const double v = at(i, j);
            row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        }
        mat.push_back(std::move(row));
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : correlated_pairs)
        pairs.push_back({{"a", p.a}, {"b", p.b}, {"pcc", p.pcc}});
    return {{"names", names},
            {"matrix", mat},
            {"threshold", threshold},
            {"correlated_pairs", pairs},
            {"constant_columns", constant_columns}};
}

CorrelationReport correlation_matrix(const DataTable& table, double threshold)
{
    const std::size_t k = table.cols();
    CorrelationReport rep;
    rep.names = table.schema().names();
    rep.threshold = threshold;
    rep.matrix.assign(k * k, std::numeric_limits<double>::quiet_NaN());

    std::vector<std::vector<double>> cols(k);
    std::vector<bool> constant(k);
    for (std::size_t c = 0; c < k; ++c) {
        cols[c] = table.column(c);
        const auto mm = kernels::minmax(cols[c]);
        constant[c] = !(mm.max > mm.min);
        if (constant[c])
            rep.constant_columns.push_back(rep.names[c]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        rep.matrix[i * k + i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            if (constant[i] || constant[j])
                continue;
            const double r = pearson(cols[i], cols[j]);
            rep.matrix[i * k + j] = r;
            rep.matrix[j * k + i] = r;
        }
    }
    const auto& vars = table.schema().variables();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            if (vars[i].role != Role::operating || vars[j].role != Role::operating)
                continue;
            const double r = rep.at(i, j);
            if (!std::isnan(r) && std::abs(r) > threshold)
                rep.correlated_pairs.push_back({rep.names[i], rep.names[j], r});
        }
    }
    return rep;
}

std::vector<std::string> correlated_cluster(const CorrelationReport& report,
                                            const FeatureSchema& schema)
{
    std::vector<std::string> out;
    for (const auto& v : schema.variables()) {
        if (v.role != Role::operating)
            continue;
        const bool member = std::any_of(report.correlated_pairs.begin(), report.correlated_pairs.end(),
                                        [&](const CorrelatedPair& p) { return p.a == v.name || p.b == v.name; });
        if (member)
            out.push_back(v.name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ECDF

EcdfCurve::EcdfCurve(std::vector<double> values) : sorted_(std::move(values))
{
    if (sorted_.empty())
        throw ValidationError("ECDF of an empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EcdfCurve::operator()(double t) const
{
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

std::vector<double> EcdfCurve::probabilities() const
{
    std::vector<double> p(sorted_.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = static_cast<double>(i + 1) / static_cast<double>(p.size());
    return p;
}

nlohmann::json EcdfCurve::to_json() const
{
    return {{"x", sorted_}, {"p", probabilities()}};
}

EcdfCurve ecdf(std::vector<double> values) { return EcdfCurve(std::move(values)); }

// ---------------------------------------------------------------------------
// Cramér–von Mises

SimilarityValue cvm_two_sample(std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 || m == 0)
        throw ValidationError("Cramér-von Mises: empty sample");

    struct Item {
        double v;
        bool from_a;
    };
    std::vector<Item> pooled;
    pooled.reserve(n + m);
    for (double v : a)
        pooled.push_back({v, true});
    for (double v : b)
        pooled.push_back({v, false});
    std::sort(pooled.begin(), pooled.end(), [](const Item& l, const Item& r) { return l.v < r.v; });

    // Average 1-based ranks over tie groups.
    std::vector<double> rank(pooled.size());
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j + 1 < pooled.size() && pooled[j + 1].v == pooled[i].v)
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            rank[k] = avg;
        i = j + 1;
    }

    double ua = 0.0, ub = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < pooled.size(); ++k) {
        if (pooled[k].from_a) {
            const double d = rank[k] - static_cast<double>(++ia);
            ua += d * d;
        } else {
            const double d = rank[k] - static_cast<double>(++ib);
            ub += d * d;
        }
    }
    const auto dn = static_cast<double>(n);
    const auto dm = static_cast<double>(m);
    const double u = dn * ua + dm * ub;
    const double t = u / (dn * dm * (dn + dm)) - (4.0 * dn * dm - 1.0) / (6.0 * (dn + dm));
    return {t, n, m};
}

// ---------------------------------------------------------------------------
// KDE

double silverman_bandwidth(std::span<const double> values)
{
    if (values.size() < 2)
        return 1.0;
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    const double sd = stddev(values);
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = sd;
    if (iqr > 0.0)
        spread = std::min(sd, iqr / 1.34);
    const double h = 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
    return h > 0.0 ? h : 1.0;
}

nlohmann::json KdeCurve::to_json() const
{
    return {{"x", grid}, {"density", density}, {"bandwidth", bandwidth}};
}

KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth)
{
    if (values.empty())
        throw ValidationError("KDE of an empty sample");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
    if (!(h > 0.0))
        throw ValidationError("KDE bandwidth must be positive");
    const auto mm = kernels::minmax(values);
    const double lo = mm.min - kKdeGridMargin * h;
    const double hi = mm.max + kKdeGridMargin * h;

    KdeCurve out;
    out.bandwidth = h;
    out.grid.resize(kKdeGridPoints);
    out.density.resize(kKdeGridPoints);
    const double step = (hi - lo) / static_cast<double>(kKdeGridPoints - 1);
    for (std::size_t g = 0; g < kKdeGridPoints; ++g)
        out.grid[g] = lo + step * static_cast<double>(g);
    kernels::gaussian_sum(values, out.grid, h, out.density);
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (double& d : out.density)
        d *= norm;
    return out;
}

} // namespace hitlopt::stats
