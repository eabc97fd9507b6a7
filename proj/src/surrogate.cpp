#include "hitlopt/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "hitlopt/error.hpp"
#include "hitlopt/kernels.hpp"

namespace hitlopt::surrogate {

void HyperParams::validate() const
{
    auto fail = [](const char* what) { throw ValidationError(std::string("invalid hyperparameter: ") + what); };
    if (!(eta > 0.0 && eta <= 1.0))
        fail("eta must lie in (0,1]");
    if (!(gamma >= 0.0))
        fail("gamma must be >= 0");
    if (!(reg_lambda >= 0.0))
        fail("reg_lambda must be >= 0");
    if (max_depth < 1)
        fail("max_depth must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
        fail("subsample must lie in (0,1]");
    if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
        fail("colsample_bytree must lie in (0,1]");
    if (n_estimators < 1)
        fail("n_estimators must be >= 1");
}

nlohmann::json HyperParams::to_json() const
{
    return {{"eta", eta},
            {"gamma", gamma},
            {"reg_lambda", reg_lambda},
            {"max_depth", max_depth},
            {"subsample", subsample},
            {"colsample_bytree", colsample_bytree},
            {"n_estimators", n_estimators}};
}

HyperParams HyperParams::from_json(const nlohmann::json& j)
{
    HyperParams hp;
    hp.eta = j.value("eta", hp.eta);
    hp.gamma = j.value("gamma", hp.gamma);
    hp.reg_lambda = j.value("reg_lambda", hp.reg_lambda);
    hp.max_depth = j.value("max_depth", hp.max_depth);
    hp.subsample = j.value("subsample", hp.subsample);
    hp.colsample_bytree = j.value("colsample_bytree", hp.colsample_bytree);
    hp.n_estimators = j.value("n_estimators", hp.n_estimators);
    hp.validate();
    return hp;
}

// ---------------------------------------------------------------------------
// RegressionTree

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes))
{
    if (nodes_.empty())
        throw ValidationError("regression tree has no nodes");
    const auto n = static_cast<int>(nodes_.size());
    for (const auto& node : nodes_) {
        if (node.is_leaf())
            continue;
        if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
            throw ValidationError("regression tree child index out of range");
    }
}

double RegressionTree::evaluate(std::span<const double> x) const
{
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& node = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right);
    }
    return nodes_[i].value;
}

int RegressionTree::depth() const
{
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        if (node.is_leaf()) {
            best = std::max(best, d[i]);
            continue;
        }
        d[static_cast<std::size_t>(node.left)] = d[i] + 1;
        d[static_cast<std::size_t>(node.right)] = d[i] + 1;
    }
    return best;
}

double RegressionTree::expected_value() const
{
    double num = 0.0;
    for (const auto& node : nodes_)
        if (node.is_leaf())
            num += node.cover * node.value;
    return num / nodes_.front().cover;
}

nlohmann::json RegressionTree::to_json() const
{
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value, cover;
    for (const auto& node : nodes_) {
        feature.push_back(node.feature);
        threshold.push_back(node.threshold);
        left.push_back(node.left);
        right.push_back(node.right);
        value.push_back(node.value);
        cover.push_back(node.cover);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},
            {"right", right},     {"value", value},         {"cover", cover}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j)
{
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto cover = j.value("cover", std::vector<double>{});
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
        throw ValidationError("regression tree arrays differ in length");
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i)
        nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], cover.empty() ? 0.0 : cover[i]};
    return RegressionTree(std::move(nodes));
}

// ---------------------------------------------------------------------------
// GbtModel

GbtModel::GbtModel(double base_score, double eta, std::vector<RegressionTree> trees,
                   std::vector<std::string> feature_names, std::string target_name,
                   std::string scaler_hash)
    : base_score_(base_score),
      eta_(eta),
      trees_(std::move(trees)),
      feature_names_(std::move(feature_names)),
      target_name_(std::move(target_name)),
      scaler_hash_(std::move(scaler_hash))
{
    const auto m = static_cast<int>(feature_names_.size());
    for (const auto& t : trees_)
        for (const auto& node : t.nodes())
            if (node.feature >= m)
                throw ValidationError("tree splits on a feature beyond the model width");
}

double GbtModel::predict(std::span<const double> x) const
{
    if (x.size() != feature_names_.size())
        throw ValidationError("predict: expected " + std::to_string(feature_names_.size()) +
                              " features, got " + std::to_string(x.size()));
    double s = 0.0;
    for (const auto& t : trees_)
        s += t.evaluate(x);
    return base_score_ + eta_ * s;
}

std::vector<double> GbtModel::predict(const Matrix& X) const
{
    std::vector<double> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r)
        out[r] = predict(X.row(r));
    return out;
}

nlohmann::json GbtModel::to_json() const
{
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_)
        trees.push_back(t.to_json());
    return {{"schema_version", 1},
            {"kind", "gbt_model"},
            {"base_score", base_score_},
            {"eta", eta_},
            {"features", feature_names_},
            {"target", target_name_},
            {"scaler_hash", scaler_hash_},
            {"trees", trees}};
}

GbtModel GbtModel::from_json(const nlohmann::json& j)
{
    if (j.value("kind", "") != "gbt_model")
        throw ValidationError("document is not a gbt_model");
    if (j.value("schema_version", 0) != 1)
        throw ValidationError("unsupported gbt_model schema_version");
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees"))
        trees.push_back(RegressionTree::from_json(t));
    return GbtModel(j.at("base_score").get<double>(), j.at("eta").get<double>(), std::move(trees),
                    j.at("features").get<std::vector<std::string>>(), j.value("target", ""),
                    j.value("scaler_hash", ""));
}

// ---------------------------------------------------------------------------
// Training

namespace {

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const std::vector<double>& residual, const HyperParams& hp)
        : X_(X), r_(residual), hp_(hp)
    {
    }

    // `sorted[k]` lists the node's rows ordered by feature `features[k]`.
    RegressionTree build(const std::vector<int>& features, std::vector<std::vector<std::uint32_t>> sorted)
    {
        features_ = &features;
        nodes_.clear();
        grow(std::move(sorted), 0);
        return RegressionTree(std::move(nodes_));
    }

private:
    int grow(std::vector<std::vector<std::uint32_t>> sorted, int depth)
    {
        const auto& rows = sorted.front();
        const auto h = static_cast<double>(rows.size());
        double s = 0.0;
        for (auto i : rows)
            s += r_[i];

        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{});
        nodes_[static_cast<std::size_t>(id)].cover = h;
        nodes_[static_cast<std::size_t>(id)].value = s / (h + hp_.reg_lambda);

        if (depth >= hp_.max_depth || rows.size() < 2)
            return id;

        const double parent_score = s * s / (h + hp_.reg_lambda);
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t k = 0; k < features_->size(); ++k) {
            const auto f = static_cast<std::size_t>((*features_)[k]);
            const auto& list = sorted[k];
            double sl = 0.0;
            for (std::size_t p = 0; p + 1 < list.size(); ++p) {
                sl += r_[list[p]];
                const double a = X_(list[p], f);
                const double b = X_(list[p + 1], f);
                if (!(a < b))
                    continue;
                const auto hl = static_cast<double>(p + 1);
                const double hr = h - hl;
                const double sr = s - sl;
                const double gain = 0.5 * (sl * sl / (hl + hp_.reg_lambda) + sr * sr / (hr + hp_.reg_lambda) -
                                           parent_score) -
                                    hp_.gamma;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    double thr = 0.5 * (a + b);
                    if (!(thr > a))
                        thr = b;
                    best_threshold = thr;
                }
            }
        }
        if (best_feature < 0)
            return id;

        const auto bf = static_cast<std::size_t>(best_feature);
        std::vector<std::vector<std::uint32_t>> left(sorted.size()), right(sorted.size());
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            for (auto i : sorted[k])
                (X_(i, bf) < best_threshold ? left[k] : right[k]).push_back(i);
        }
        sorted.clear();
        sorted.shrink_to_fit();

        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        node.value = 0.0;
        return id;
    }

    const Matrix& X_;
    const std::vector<double>& r_;
    const HyperParams& hp_;
    const std::vector<int>* features_ = nullptr;
    std::vector<TreeNode> nodes_;
};

// k distinct indices from 0..n-1, ascending.
std::vector<std::uint32_t> sample_indices(std::size_t n, std::size_t k, std::mt19937_64& rng)
{
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    if (k < n) {
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        all.resize(k);
        std::sort(all.begin(), all.end());
    }
    return all;
}

} // namespace

GbtModel train_gbt(const Matrix& X, std::span<const double> y, const HyperParams& hp,
                   std::uint64_t seed, const TrainOptions& options)
{
    hp.validate();
    const std::size_t n = X.rows();
    const std::size_t m = X.cols();
    if (n == 0 || y.empty())
        throw EmptyInputError("train_gbt: empty training data");
    if (y.size() != n)
        throw ValidationError("train_gbt: X rows and y length differ");
    if (n < 2)
        throw ValidationError("train_gbt: need at least 2 training rows");
    if (m == 0)
        throw ValidationError("train_gbt: no features");
    for (double v : X.data())
        if (!std::isfinite(v))
            throw ValidationError("train_gbt: non-finite feature value");
    for (double v : y)
        if (!std::isfinite(v))
            throw ValidationError("train_gbt: non-finite target value");

    std::vector<std::string> names = options.feature_names;
    if (names.empty())
        for (std::size_t f = 0; f < m; ++f)
            names.push_back("f" + std::to_string(f));
    if (names.size() != m)
        throw ValidationError("train_gbt: feature name count differs from X width");

    const double base = kernels::sum(y) / static_cast<double>(n);
    std::vector<double> pred(n, base);
    std::vector<double> residual(n);
    std::vector<double> yv(y.begin(), y.end());
    std::mt19937_64 rng(seed);

    if (options.rmse_trace) {
        options.rmse_trace->clear();
        options.rmse_trace->push_back(std::sqrt(kernels::sum_sq_diff(yv, pred) / static_cast<double>(n)));
    }

    const auto n_rows = std::max<std::size_t>(
        2, std::min(n, static_cast<std::size_t>(std::floor(hp.subsample * static_cast<double>(n) + 1e-9))));
    const auto n_cols = std::max<std::size_t>(
        1, std::min(m, static_cast<std::size_t>(std::floor(hp.colsample_bytree * static_cast<double>(m) + 1e-9))));

    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(hp.n_estimators));
    TreeBuilder builder(X, residual, hp);
    for (int t = 0; t < hp.n_estimators; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            residual[i] = yv[i] - pred[i];

        const auto rows = sample_indices(n, n_rows, rng);
        const auto cols_u = sample_indices(m, n_cols, rng);
        std::vector<int> cols(cols_u.begin(), cols_u.end());

        std::vector<std::vector<std::uint32_t>> sorted(cols.size(), rows);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto f = static_cast<std::size_t>(cols[k]);
            std::stable_sort(sorted[k].begin(), sorted[k].end(),
                             [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
        }
        trees.push_back(builder.build(cols, std::move(sorted)));

        const auto& tree = trees.back();
        for (std::size_t i = 0; i < n; ++i)
            pred[i] += hp.eta * tree.evaluate(X.row(i));
        if (options.rmse_trace)
            options.rmse_trace->push_back(std::sqrt(kernels::sum_sq_diff(yv, pred) / static_cast<double>(n)));
    }
    return GbtModel(base, hp.eta, std::move(trees), std::move(names), options.target_name, options.scaler_hash);
}

// ---------------------------------------------------------------------------
// Metrics

double rmse(std::span<const double> y, std::span<const double> yhat)
{
    if (y.size() != yhat.size())
        throw ValidationError("rmse: length mismatch");
    if (y.empty())
        throw EmptyInputError("rmse: empty input");
    return std::sqrt(kernels::sum_sq_diff(y, yhat) / static_cast<double>(y.size()));
}

double r_squared(std::span<const double> y, std::span<const double> yhat)
{
    if (y.size() != yhat.size())
        throw ValidationError("r_squared: length mismatch");
    if (y.empty())
        throw EmptyInputError("r_squared: empty input");
    const double mean = kernels::sum(y) / static_cast<double>(y.size());
    const auto mom = kernels::cross_moments(y, y, mean, mean);
    if (!(mom.sxx > 0.0))
        throw NumericError("r_squared: undefined for a constant target");
    return 1.0 - kernels::sum_sq_diff(y, yhat) / mom.sxx;
}

RegressionMetrics evaluate(std::span<const double> y, std::span<const double> yhat)
{
    return {r_squared(y, yhat), rmse(y, yhat), y.size()};
}

} // namespace hitlopt::surrogate
