#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hitlopt/carbon.hpp"
#include "hitlopt/cobyla.hpp"
#include "hitlopt/conformal.hpp"
#include "hitlopt/data.hpp"
#include "hitlopt/evaluate.hpp"
#include "hitlopt/explain.hpp"
#include "hitlopt/optimizer.hpp"
#include "hitlopt/surrogate.hpp"
#include "hitlopt/tpe.hpp"

// End-to-end orchestration shared by the command line tool and the service.
namespace hitlopt::pipeline {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
    // Data: a CSV path, or a built-in generator when `dataset` is empty.
    std::string dataset;
    std::string schema = "plant"; // plant | correlated_six | friedman1
    nlohmann::json schema_definition; // explicit FeatureSchema document, overrides `schema`
    std::size_t synthetic_rows = 1278;

    std::uint64_t seed = 42;
    double train_fraction = 0.8;
    double calibration_share = 0.2; // of the training rows
    int tuning_budget = 0;          // TPE trials; 0 trains with `hyperparams`
    surrogate::HyperParams hyperparams;
    double alpha = 0.05;

    std::vector<double> taus{0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
    std::vector<double> quantile_levels = eval::kDefaultQuantileLevels;
    std::vector<std::string> chain; // empty: correlated operating cluster
    double correlation_threshold = 0.9;
    bool all_pairs = false;
    std::vector<std::pair<std::string, std::string>> report_pairs;
    // Engineering-unit (lower, upper) overrides per operating variable.
    std::map<std::string, std::pair<double, double>> bounds;
    std::size_t guesses = 219; // 0 uses every test row
    opt::CobylaSettings cobyla;

    std::string fleet;
    double delta_pp = 0.64;

    std::string output_dir = "hitlopt_out";
    int jobs = 1;

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string token;
    std::string store_dir = "hitlopt_store";

    // Throws ValidationError naming the offending key.
    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

// Directory holding the shipped reference files (fleet configuration).
std::string default_data_dir();
std::string default_fleet_path();

FeatureSchema schema_for(const RunConfig& cfg);
DataTable load_dataset(const RunConfig& cfg);
DataTable synthetic_dataset(const std::string& name, std::size_t rows, std::uint64_t seed);

struct VariableSummary {
    std::string name;
    std::string unit;
    std::string role;
    double min;
    double max;
    double mean;
};

struct DatasetSummary {
    std::size_t rows = 0;
    std::vector<VariableSummary> variables;
    nlohmann::json to_json() const;
};

DatasetSummary summarize(const DataTable& table);

// Correlation report plus ECDF and KDE payloads per variable.
nlohmann::json dataset_stats(const DataTable& table, double threshold);

struct TargetBundle {
    std::string target;
    surrogate::GbtModel model;
    surrogate::HyperParams params;
    std::optional<surrogate::TuneResult> tuning;
    surrogate::RegressionMetrics train_metrics{};
    surrogate::RegressionMetrics test_metrics{};
    conformal::ConformalCalibration calibration;
    opt::NormRange range; // target min/max over training rows
    std::vector<double> rmse_trace;

    nlohmann::json to_json() const;
    static TargetBundle from_json(const nlohmann::json& j);
};

struct TrainedBundle {
    FeatureSchema schema = FeatureSchema::plant();
    std::vector<std::size_t> features; // operating indices into the schema
    ScalingParams scaler;              // over `features`, fitted on training rows
    DataSplits splits;
    std::vector<TargetBundle> targets;

    const TargetBundle& target(const std::string& name) const;
    std::vector<std::string> feature_names() const;
    nlohmann::json to_json() const;
    static TrainedBundle from_json(const nlohmann::json& j);
};

// Splits the rows, fits the scaler on training rows, trains one model per
// performance variable and calibrates it on the calibration rows.
TrainedBundle train(const DataTable& table, const RunConfig& cfg);

// Scaled operating features of the selected rows.
Matrix scaled_features(const DataTable& table, const TrainedBundle& bundle, std::span<const std::size_t> rows);

std::vector<explain::ShapReport> explain_models(const DataTable& table, const TrainedBundle& bundle);

struct SweepSetup {
    opt::OptimizationProblem problem;
    Matrix guesses;
    std::vector<std::size_t> guess_rows; // table rows behind the guesses
    eval::SweepOptions options;
};

// Needs TE and THR targets in the bundle.
SweepSetup prepare_sweep(const DataTable& table, const TrainedBundle& bundle, const RunConfig& cfg);
eval::SweepReport run_sweep(const DataTable& table, const TrainedBundle& bundle, const RunConfig& cfg,
                            std::function<void(std::size_t, std::size_t)> progress = {});

// Setpoint sheet in engineering units for the pick at `quantile` of the
// entry at `tau` (unconstrained entry when tau is empty).
nlohmann::json setpoint_sheet(const eval::SweepReport& report, const FeatureSchema& schema,
                              const std::vector<std::size_t>& features, std::optional<double> tau, double quantile);

// Runs the picks of the tau entry through the simulated plant. Ground truth
// is the synthetic plant for the plant schema and the surrogates otherwise.
eval::VerificationReport verify(const DataTable& table, const TrainedBundle& bundle, const eval::SweepReport& report,
                                double tau, const RunConfig& cfg, double noise_fraction = 0.01);

carbon::CarbonReport carbon_report(const RunConfig& cfg);

} // namespace hitlopt::pipeline
