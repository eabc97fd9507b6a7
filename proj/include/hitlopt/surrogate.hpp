#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitlopt/matrix.hpp"

namespace hitlopt::surrogate {

struct HyperParams {
    double eta = 0.1;
    double gamma = 0.0;
    double reg_lambda = 1.0;
    int max_depth = 4;
    double subsample = 0.8;
    double colsample_bytree = 1.0;
    int n_estimators = 300;

    // Throws ValidationError naming the first out-of-range field.
    void validate() const;
    nlohmann::json to_json() const;
    static HyperParams from_json(const nlohmann::json& j);
    bool operator==(const HyperParams&) const = default;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0; // go left when x[feature] < threshold
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf weight; unused for internal nodes
    double cover = 0.0; // training samples that reached the node

    bool is_leaf() const noexcept { return feature < 0; }
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes);

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }
    // Raw leaf weight reached by x (not multiplied by eta).
    double evaluate(std::span<const double> x) const;
    int depth() const;
    // Cover-weighted mean leaf value.
    double expected_value() const;

    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json& j);

private:
    std::vector<TreeNode> nodes_;
};

// Boosted ensemble: prediction = base_score + eta * sum_t tree_t(x).
class GbtModel {
public:
    GbtModel() = default;
    GbtModel(double base_score, double eta, std::vector<RegressionTree> trees,
             std::vector<std::string> feature_names, std::string target_name,
             std::string scaler_hash = {});

    double base_score() const noexcept { return base_score_; }
    double eta() const noexcept { return eta_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    std::size_t feature_count() const noexcept { return feature_names_.size(); }
    const std::string& target_name() const noexcept { return target_name_; }
    const std::string& scaler_hash() const noexcept { return scaler_hash_; }

    // Throws ValidationError on a width mismatch.
    double predict(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& X) const;

    nlohmann::json to_json() const;
    static GbtModel from_json(const nlohmann::json& j);

private:
    double base_score_ = 0.0;
    double eta_ = 1.0;
    std::vector<RegressionTree> trees_;
    std::vector<std::string> feature_names_;
    std::string target_name_;
    std::string scaler_hash_;
};

struct TrainOptions {
    std::vector<std::string> feature_names;
    std::string target_name = "y";
    std::string scaler_hash;
    // When set, receives the training RMSE after each boosting round
    // (index 0 is the base score alone).
    std::vector<double>* rmse_trace = nullptr;
};

// Squared-error gradient boosting with exact greedy splits.
GbtModel train_gbt(const Matrix& X, std::span<const double> y, const HyperParams& hp,
                   std::uint64_t seed, const TrainOptions& options = {});

struct RegressionMetrics {
    double r2;
    double rmse;
    std::size_t n;
    nlohmann::json to_json() const { return {{"r2", r2}, {"rmse", rmse}, {"n", n}}; }
};

// 1 - SS_res / SS_tot. Throws NumericError for a constant y.
double r_squared(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
RegressionMetrics evaluate(std::span<const double> y, std::span<const double> yhat);

} // namespace hitlopt::surrogate
