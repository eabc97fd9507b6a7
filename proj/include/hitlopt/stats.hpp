#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitlopt/data.hpp"

namespace hitlopt::stats {

// Pearson correlation. Throws NumericError when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelatedPair {
    std::string a;
    std::string b;
    double pcc;
};

struct CorrelationReport {
    std::vector<std::string> names;
    // Row-major names.size()^2 matrix. Entries involving a constant column
    // are NaN (serialized as null), except the diagonal which is 1.
    std::vector<double> matrix;
    double threshold = 0.9;
    // Operating-variable pairs with |PCC| > threshold, in schema order.
    std::vector<CorrelatedPair> correlated_pairs;
    std::vector<std::string> constant_columns;

    double at(std::size_t i, std::size_t j) const { return matrix[i * names.size() + j]; }
    nlohmann::json to_json() const;
};

CorrelationReport correlation_matrix(const DataTable& table, double threshold = 0.9);

// Operating variables that belong to at least one correlated pair, in schema
// order. This is the default tolerance-constraint chain.
std::vector<std::string> correlated_cluster(const CorrelationReport& report,
                                            const FeatureSchema& schema);

// Right-continuous empirical CDF, F(t) = #{x_i <= t} / n.
class EcdfCurve {
public:
    explicit EcdfCurve(std::vector<double> values);

    double operator()(double t) const;
    const std::vector<double>& values() const noexcept { return sorted_; }
    // probabilities()[i] = (i + 1) / n at values()[i].
    std::vector<double> probabilities() const;
    nlohmann::json to_json() const;

private:
    std::vector<double> sorted_;
};

EcdfCurve ecdf(std::vector<double> values);

struct SimilarityValue {
    double statistic;
    std::size_t n;
    std::size_t m;
};

// Two-sample Cramér–von Mises criterion from pooled ranks (average ranks for
// ties):
//   U = n sum_i (r_i - i)^2 + m sum_j (s_j - j)^2
//   T = U / (n m (n + m)) - (4 n m - 1) / (6 (n + m))
SimilarityValue cvm_two_sample(std::span<const double> a, std::span<const double> b);

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth;
    nlohmann::json to_json() const;
};

inline constexpr std::size_t kKdeGridPoints = 256;
inline constexpr double kKdeGridMargin = 4.0; // bandwidths beyond the data range

// Silverman's rule of thumb, 0.9 min(sd, IQR/1.34) n^(-1/5); 1.0 for a
// degenerate sample.
double silverman_bandwidth(std::span<const double> values);

// Gaussian KDE on a 256-point grid over [min - 4h, max + 4h].
KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth = std::nullopt);

double mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> x);

} // namespace hitlopt::stats
