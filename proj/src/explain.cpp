#include "hitlopt/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hitlopt/error.hpp"

namespace hitlopt::explain {

using surrogate::GbtModel;
using surrogate::RegressionTree;
using surrogate::TreeNode;

namespace {

void require_cover(const RegressionTree& tree)
{
    for (const auto& node : tree.nodes())
        if (!(node.cover > 0.0))
            throw ValidationError("TreeSHAP needs positive cover counts on every node");
}

// Path bookkeeping of the polynomial-time TreeSHAP recursion.
struct PathElement {
    int feature;
    double zero_fraction;
    double one_fraction;
    double weight;
};

void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature)
{
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
        path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
    }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index)
{
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    double next = path[depth].weight;
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = path[i].weight;
            path[i].weight = next * d1 / (static_cast<double>(i + 1) * one);
            next = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
        }
    }
    for (std::size_t i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

double unwound_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index)
{
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    double next = path[depth].weight;
    double total = 0.0;
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = next * d1 / (static_cast<double>(i + 1) * one);
            total += tmp;
            next = path[i].weight - tmp * zero * static_cast<double>(depth - i) / d1;
        } else if (zero != 0.0) {
            total += path[i].weight / zero / (static_cast<double>(depth - i) / d1);
        }
    }
    return total;
}

void recurse(const RegressionTree& tree, std::span<const double> x, std::span<double> phi, std::size_t node_id,
             std::vector<PathElement> path, std::size_t depth, double zero_fraction, double one_fraction,
             int feature)
{
    if (path.size() < depth + 1)
        path.resize(depth + 1);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const TreeNode& node = tree.nodes()[node_id];

    if (node.is_leaf()) {
        for (std::size_t i = 1; i <= depth; ++i) {
            const double w = unwound_sum(path, depth, i);
            const auto& el = path[i];
            phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.value;
        }
        return;
    }

    const auto f = static_cast<std::size_t>(node.feature);
    const bool go_left = x[f] < node.threshold;
    const auto hot = static_cast<std::size_t>(go_left ? node.left : node.right);
    const auto cold = static_cast<std::size_t>(go_left ? node.right : node.left);
    const double hot_frac = tree.nodes()[hot].cover / node.cover;
    const double cold_frac = tree.nodes()[cold].cover / node.cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    std::size_t k = 1;
    for (; k <= depth; ++k)
        if (path[k].feature == node.feature)
            break;
    if (k <= depth) {
        incoming_zero = path[k].zero_fraction;
        incoming_one = path[k].one_fraction;
        unwind_path(path, depth, k);
        --depth;
    }
    recurse(tree, x, phi, hot, path, depth + 1, hot_frac * incoming_zero, incoming_one, node.feature);
    recurse(tree, x, phi, cold, path, depth + 1, cold_frac * incoming_zero, 0.0, node.feature);
}

double tree_expectation(const RegressionTree& tree, std::span<const double> x, unsigned long known,
                        std::size_t node_id)
{
    const TreeNode& node = tree.nodes()[node_id];
    if (node.is_leaf())
        return node.value;
    const auto l = static_cast<std::size_t>(node.left);
    const auto r = static_cast<std::size_t>(node.right);
    if (known & (1UL << node.feature))
        return tree_expectation(tree, x, known, x[static_cast<std::size_t>(node.feature)] < node.threshold ? l : r);
    const auto& nl = tree.nodes()[l];
    const auto& nr = tree.nodes()[r];
    return (nl.cover * tree_expectation(tree, x, known, l) + nr.cover * tree_expectation(tree, x, known, r)) /
           node.cover;
}

} // namespace

double base_value(const GbtModel& model)
{
    double s = 0.0;
    for (const auto& t : model.trees()) {
        require_cover(t);
        s += t.expected_value();
    }
    return model.base_score() + model.eta() * s;
}

std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x, std::size_t feature_count)
{
    require_cover(tree);
    std::vector<double> phi(feature_count, 0.0);
    std::vector<PathElement> path(static_cast<std::size_t>(tree.depth()) + 2);
    recurse(tree, x, phi, 0, std::move(path), 0, 1.0, 1.0, -1);
    return phi;
}

std::vector<double> tree_shap(const GbtModel& model, std::span<const double> x)
{
    if (x.size() != model.feature_count())
        throw ValidationError("tree_shap: feature width mismatch");
    std::vector<double> phi(model.feature_count(), 0.0);
    for (const auto& t : model.trees()) {
        const auto p = tree_shap(t, x, model.feature_count());
        for (std::size_t j = 0; j < phi.size(); ++j)
            phi[j] += p[j];
    }
    for (double& v : phi)
        v *= model.eta();
    return phi;
}

double conditional_expectation(const GbtModel& model, std::span<const double> x, unsigned long known)
{
    double s = 0.0;
    for (const auto& t : model.trees())
        s += tree_expectation(t, x, known, 0);
    return model.base_score() + model.eta() * s;
}

std::vector<double> shap_brute_force(const GbtModel& model, std::span<const double> x)
{
    const std::size_t m = model.feature_count();
    if (m > kBruteForceMaxFeatures)
        throw ValidationError("brute-force Shapley refuses more than 15 features");
    if (x.size() != m)
        throw ValidationError("shap_brute_force: feature width mismatch");
    for (const auto& t : model.trees())
        require_cover(t);

    const unsigned long n_sets = 1UL << m;
    std::vector<double> v(n_sets);
    for (unsigned long s = 0; s < n_sets; ++s)
        v[s] = conditional_expectation(model, x, s);

    // weight[k] = k! (m - k - 1)! / m!
    std::vector<double> weight(m);
    for (std::size_t k = 0; k < m; ++k)
        weight[k] = std::exp(std::lgamma(static_cast<double>(k + 1)) + std::lgamma(static_cast<double>(m - k)) -
                             std::lgamma(static_cast<double>(m + 1)));

    std::vector<double> phi(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const unsigned long bit = 1UL << j;
        for (unsigned long s = 0; s < n_sets; ++s) {
            if (s & bit)
                continue;
            const auto k = static_cast<std::size_t>(__builtin_popcountl(s));
            phi[j] += weight[k] * (v[s | bit] - v[s]);
        }
    }
    return phi;
}

nlohmann::json ShapReport::to_json(bool include_attributions) const
{
    nlohmann::json rank = nlohmann::json::array();
    for (const auto& c : ranking)
        rank.push_back({{"feature", c.feature}, {"mean_abs_shap", c.mean_abs_shap}, {"percent", c.percent}});
    nlohmann::json j = {{"schema_version", 1}, {"target", target}, {"base_value", base_value}, {"ranking", rank}};
    if (include_attributions)
        j["attributions"] = attributions;
    return j;
}

ShapReport contribution_percentages(const GbtModel& model, const Matrix& X)
{
    if (X.rows() == 0)
        throw EmptyInputError("contribution_percentages: no evaluation rows");
    ShapReport rep;
    rep.target = model.target_name();
    rep.base_value = base_value(model);
    const std::size_t m = model.feature_count();
    std::vector<double> mean_abs(m, 0.0);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        auto phi = tree_shap(model, X.row(r));
        for (std::size_t j = 0; j < m; ++j)
            mean_abs[j] += std::abs(phi[j]);
        rep.attributions.push_back(std::move(phi));
    }
    double total = 0.0;
    for (double& v : mean_abs) {
        v /= static_cast<double>(X.rows());
        total += v;
    }
    for (std::size_t j = 0; j < m; ++j)
        rep.ranking.push_back({model.feature_names()[j], mean_abs[j], total > 0.0 ? 100.0 * mean_abs[j] / total : 0.0});
    std::stable_sort(rep.ranking.begin(), rep.ranking.end(),
                     [](const FeatureContribution& a, const FeatureContribution& b) { return a.percent > b.percent; });
    return rep;
}

} // namespace hitlopt::explain
