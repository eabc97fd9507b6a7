#include "hitlopt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>

#include "hitlopt/error.hpp"
#include "hitlopt/stats.hpp"
#include "hitlopt/synth.hpp"

#ifndef HITLOPT_DATA_DIR
#define HITLOPT_DATA_DIR "data"
#endif

namespace hitlopt::pipeline {

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const
{
    auto fail = [](const std::string& key, const std::string& what) {
        throw ValidationError("config '" + key + "': " + what);
    };
    if (schema_definition.is_null() && schema != "plant" && schema != "correlated_six" && schema != "friedman1")
        fail("schema", "unknown schema '" + schema + "'");
    if (dataset.empty() && synthetic_rows < 10)
        fail("synthetic_rows", "need at least 10 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail("train_fraction", "must lie in (0,1)");
    if (!(calibration_share > 0.0 && calibration_share < 1.0))
        fail("calibration_share", "must lie in (0,1)");
    if (tuning_budget < 0)
        fail("tuning_budget", "must be >= 0");
    try {
        hyperparams.validate();
    } catch (const ValidationError& e) {
        fail("hyperparams", e.what());
    }
    if (!(alpha > 0.0 && alpha < 1.0))
        fail("alpha", "must lie in (0,1)");
    if (taus.empty())
        fail("taus", "must not be empty");
    for (double t : taus)
        if (!(t > 0.0) || !std::isfinite(t))
            fail("taus", "every tau must be positive");
    if (quantile_levels.empty())
        fail("quantile_levels", "must not be empty");
    for (double q : quantile_levels)
        if (!(q >= 0.0 && q <= 100.0))
            fail("quantile_levels", "levels must lie in [0,100]");
    if (chain.size() == 1)
        fail("chain", "needs at least two variables");
    if (!(correlation_threshold > 0.0 && correlation_threshold < 1.0))
        fail("correlation_threshold", "must lie in (0,1)");
    for (const auto& [name, b] : bounds)
        if (!(b.first <= b.second))
            fail("bounds", "lower exceeds upper for " + name);
    if (!(cobyla.rho_end > 0.0 && cobyla.rho_end < cobyla.rho_beg))
        fail("cobyla", "need 0 < rho_end < rho_beg");
    if (cobyla.maxfun < 3)
        fail("cobyla", "maxfun too small");
    if (!(delta_pp >= 0.0 && delta_pp < 50.0))
        fail("delta_pp", "must lie in [0,50)");
    if (jobs < 1)
        fail("jobs", "must be >= 1");
    if (port < 0 || port > 65535)
        fail("port", "must lie in [0,65535]");
}

nlohmann::json RunConfig::to_json() const
{
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [name, v] : bounds)
        b[name] = {v.first, v.second};
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [a, c] : report_pairs)
        pairs.push_back({a, c});
    return {{"dataset", dataset},
            {"schema", schema},
            {"schema_definition", schema_definition},
            {"synthetic_rows", synthetic_rows},
            {"seed", seed},
            {"train_fraction", train_fraction},
            {"calibration_share", calibration_share},
            {"tuning_budget", tuning_budget},
            {"hyperparams", hyperparams.to_json()},
            {"alpha", alpha},
            {"taus", taus},
            {"quantile_levels", quantile_levels},
            {"chain", chain},
            {"correlation_threshold", correlation_threshold},
            {"all_pairs", all_pairs},
            {"report_pairs", pairs},
            {"bounds", b},
            {"guesses", guesses},
            {"cobyla", cobyla.to_json()},
            {"fleet", fleet},
            {"delta_pp", delta_pp},
            {"output_dir", output_dir},
            {"jobs", jobs},
            {"host", host},
            {"port", port},
            {"token", token},
            {"store_dir", store_dir}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j)
{
    static const std::set<std::string> known{
        "dataset", "schema", "schema_definition", "synthetic_rows", "seed", "train_fraction", "calibration_share",
        "tuning_budget", "hyperparams", "alpha", "taus", "quantile_levels", "chain", "correlation_threshold",
        "all_pairs", "report_pairs", "bounds", "guesses", "cobyla", "fleet", "delta_pp", "output_dir", "jobs",
        "host", "port", "token", "store_dir"};
    if (!j.is_object())
        throw ValidationError("config must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ValidationError("config: unknown key '" + key + "'");
    RunConfig c;
    std::string key;
    try {
        auto get = [&](const char* k, auto& field) {
            key = k;
            if (j.contains(k) && !j[k].is_null())
                field = j[k].get<std::decay_t<decltype(field)>>();
        };
        get("dataset", c.dataset);
        get("schema", c.schema);
        key = "schema_definition";
        if (j.contains("schema_definition"))
            c.schema_definition = j["schema_definition"];
        get("synthetic_rows", c.synthetic_rows);
        get("seed", c.seed);
        get("train_fraction", c.train_fraction);
        get("calibration_share", c.calibration_share);
        get("tuning_budget", c.tuning_budget);
        key = "hyperparams";
        if (j.contains("hyperparams"))
            c.hyperparams = surrogate::HyperParams::from_json(j["hyperparams"]);
        get("alpha", c.alpha);
        get("taus", c.taus);
        get("quantile_levels", c.quantile_levels);
        get("chain", c.chain);
        get("correlation_threshold", c.correlation_threshold);
        get("all_pairs", c.all_pairs);
        key = "report_pairs";
        if (j.contains("report_pairs"))
            for (const auto& p : j["report_pairs"])
                c.report_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        key = "bounds";
        if (j.contains("bounds"))
            for (const auto& [name, v] : j["bounds"].items())
                c.bounds[name] = {v.at(0).get<double>(), v.at(1).get<double>()};
        get("guesses", c.guesses);
        key = "cobyla";
        if (j.contains("cobyla"))
            c.cobyla = opt::CobylaSettings::from_json(j["cobyla"]);
        get("fleet", c.fleet);
        get("delta_pp", c.delta_pp);
        get("output_dir", c.output_dir);
        get("jobs", c.jobs);
        get("host", c.host);
        get("port", c.port);
        get("token", c.token);
        get("store_dir", c.store_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config '" + key + "': " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("config '" + key + "': " + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config file: " + path);
    try {
        return from_json(nlohmann::json::parse(in, nullptr, true, true));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config file " + path + ": " + e.what());
    }
}

std::string default_data_dir()
{
    if (const char* env = std::getenv("HITLOPT_DATA_DIR"))
        return env;
    return HITLOPT_DATA_DIR;
}

std::string default_fleet_path() { return default_data_dir() + "/fleet_reference.json"; }

// ---------------------------------------------------------------------------
// Data

FeatureSchema schema_for(const RunConfig& cfg)
{
    if (!cfg.schema_definition.is_null())
        return FeatureSchema::from_json(cfg.schema_definition);
    if (cfg.schema == "correlated_six")
        return synth::correlated_six_schema();
    if (cfg.schema == "friedman1")
        return synth::friedman1(2, 0).schema();
    return FeatureSchema::plant();
}

DataTable synthetic_dataset(const std::string& name, std::size_t rows, std::uint64_t seed)
{
    if (name == "plant")
        return synth::plant_dataset(rows, seed);
    if (name == "correlated_six")
        return synth::correlated_six(rows, seed);
    if (name == "friedman1")
        return synth::friedman1(rows, seed);
    throw ValidationError("unknown synthetic dataset '" + name + "'");
}

DataTable load_dataset(const RunConfig& cfg)
{
    if (!cfg.dataset.empty())
        return ingest_csv_file(cfg.dataset, schema_for(cfg));
    if (!cfg.schema_definition.is_null())
        throw ValidationError("config 'dataset': a custom schema needs a dataset path");
    return synthetic_dataset(cfg.schema, cfg.synthetic_rows, cfg.seed);
}

nlohmann::json DatasetSummary::to_json() const
{
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : variables)
        vars.push_back(
            {{"name", v.name}, {"unit", v.unit}, {"role", v.role}, {"min", v.min}, {"max", v.max}, {"mean", v.mean}});
    return {{"schema_version", kSchemaVersion}, {"kind", "dataset_summary"}, {"rows", rows}, {"variables", vars}};
}

DatasetSummary summarize(const DataTable& table)
{
    std::vector<std::size_t> all(table.rows());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    const ScalingParams sp = fit_scaler(table, all);
    DatasetSummary s;
    s.rows = table.rows();
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const auto& v = table.schema().variables()[c];
        s.variables.push_back(
            {v.name, v.unit, std::string(to_string(v.role)), sp.min()[c], sp.max()[c], stats::mean(table.column(c))});
    }
    return s;
}

nlohmann::json dataset_stats(const DataTable& table, double threshold)
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "dataset_stats";
    j["correlation"] = stats::correlation_matrix(table, threshold).to_json();
    nlohmann::json ecdfs = nlohmann::json::object();
    nlohmann::json kdes = nlohmann::json::object();
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const auto name = table.schema().variables()[c].name;
        const auto col = table.column(c);
        ecdfs[name] = stats::ecdf(col).to_json();
        kdes[name] = stats::kde(col).to_json();
    }
    j["ecdf"] = ecdfs;
    j["kde"] = kdes;
    return j;
}

// ---------------------------------------------------------------------------
// Training

nlohmann::json TargetBundle::to_json() const
{
    nlohmann::json j = {{"target", target},
                        {"model", model.to_json()},
                        {"params", params.to_json()},
                        {"train_metrics", train_metrics.to_json()},
                        {"test_metrics", test_metrics.to_json()},
                        {"calibration", calibration.to_json()},
                        {"range", range.to_json()},
                        {"rmse_trace", rmse_trace}};
    j["tuning"] = tuning ? tuning->to_json() : nlohmann::json(nullptr);
    return j;
}

namespace {

surrogate::RegressionMetrics metrics_from_json(const nlohmann::json& j)
{
    return {j.at("r2").get<double>(), j.at("rmse").get<double>(), j.at("n").get<std::size_t>()};
}

} // namespace

TargetBundle TargetBundle::from_json(const nlohmann::json& j)
{
    TargetBundle t;
    t.target = j.at("target").get<std::string>();
    t.model = surrogate::GbtModel::from_json(j.at("model"));
    t.params = surrogate::HyperParams::from_json(j.at("params"));
    t.train_metrics = metrics_from_json(j.at("train_metrics"));
    t.test_metrics = metrics_from_json(j.at("test_metrics"));
    t.calibration = conformal::ConformalCalibration::from_json(j.at("calibration"));
    t.range = {j.at("range").at(0).get<double>(), j.at("range").at(1).get<double>()};
    t.rmse_trace = j.value("rmse_trace", std::vector<double>{});
    return t;
}

const TargetBundle& TrainedBundle::target(const std::string& name) const
{
    for (const auto& t : targets)
        if (t.target == name)
            return t;
    throw ValidationError("no trained model for target '" + name + "'");
}

std::vector<std::string> TrainedBundle::feature_names() const
{
    std::vector<std::string> out;
    for (auto f : features)
        out.push_back(schema.variables()[f].name);
    return out;
}

nlohmann::json TrainedBundle::to_json() const
{
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : targets)
        ts.push_back(t.to_json());
    return {{"schema_version", kSchemaVersion},
            {"kind", "trained_bundle"},
            {"schema", schema.to_json()},
            {"features", feature_names()},
            {"scaler", scaler.to_json()},
            {"splits", splits.to_json()},
            {"targets", ts}};
}

TrainedBundle TrainedBundle::from_json(const nlohmann::json& j)
{
    try {
        if (j.value("kind", std::string()) != "trained_bundle")
            throw ValidationError("not a trained model bundle");
        TrainedBundle b;
        b.schema = FeatureSchema::from_json(j.at("schema"));
        for (const auto& name : j.at("features"))
            b.features.push_back(b.schema.index_of(name.get<std::string>()));
        b.scaler = ScalingParams::from_json(j.at("scaler"));
        b.splits = DataSplits::from_json(j.at("splits"));
        for (const auto& t : j.at("targets"))
            b.targets.push_back(TargetBundle::from_json(t));
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model bundle: ") + e.what());
    }
}

Matrix scaled_features(const DataTable& table, const TrainedBundle& bundle, std::span<const std::size_t> rows)
{
    return bundle.scaler.scale(table.select(rows, bundle.features));
}

TrainedBundle train(const DataTable& table, const RunConfig& cfg)
{
    cfg.validate();
    TrainedBundle b;
    b.schema = table.schema();
    b.features = b.schema.operating_indices();
    if (b.features.empty() || b.schema.performance_indices().empty())
        throw ValidationError("schema needs operating and performance variables");
    b.splits = split(table.rows(), cfg.train_fraction * (1.0 - cfg.calibration_share),
                     cfg.train_fraction * cfg.calibration_share, cfg.seed);
    b.scaler = fit_scaler(table, b.splits.train).subset(b.features);

    const Matrix X_train = scaled_features(table, b, b.splits.train);
    const Matrix X_cal = scaled_features(table, b, b.splits.calibration);
    const Matrix X_test = scaled_features(table, b, b.splits.test);
    const auto names = b.feature_names();

    std::uint64_t target_index = 0;
    for (std::size_t ti : b.schema.performance_indices()) {
        TargetBundle t;
        t.target = b.schema.variables()[ti].name;
        const Matrix Y_all = table.select(b.splits.train, std::vector<std::size_t>{ti});
        const std::vector<double> y_train = Y_all.column(0);
        const std::vector<double> y_cal = table.select(b.splits.calibration, std::vector<std::size_t>{ti}).column(0);
        const std::vector<double> y_test = table.select(b.splits.test, std::vector<std::size_t>{ti}).column(0);
        const auto [mn, mx] = std::minmax_element(y_train.begin(), y_train.end());
        t.range = {*mn, *mx};

        const std::uint64_t seed = surrogate::derive_seed(cfg.seed, 1000 + target_index++);
        t.params = cfg.hyperparams;
        if (cfg.tuning_budget > 0) {
            t.tuning = surrogate::tune_tpe(X_train, y_train, surrogate::SearchSpace::defaults(), cfg.tuning_budget, seed);
            t.params = t.tuning->best;
        }
        surrogate::TrainOptions opts;
        opts.feature_names = names;
        opts.target_name = t.target;
        opts.scaler_hash = b.scaler.hash();
        opts.rmse_trace = &t.rmse_trace;
        t.model = surrogate::train_gbt(X_train, y_train, t.params, seed, opts);
        t.train_metrics = surrogate::evaluate(y_train, t.model.predict(X_train));
        t.test_metrics = surrogate::evaluate(y_test, t.model.predict(X_test));
        t.calibration = conformal::calibrate(t.model, X_cal, y_cal, cfg.alpha);
        b.targets.push_back(std::move(t));
    }
    return b;
}

std::vector<explain::ShapReport> explain_models(const DataTable& table, const TrainedBundle& bundle)
{
    const Matrix X = scaled_features(table, bundle, bundle.splits.test);
    std::vector<explain::ShapReport> out;
    for (const auto& t : bundle.targets)
        out.push_back(explain::contribution_percentages(t.model, X));
    return out;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

std::size_t feature_position(const TrainedBundle& b, const std::string& name)
{
    const std::size_t idx = b.schema.index_of(name);
    const auto it = std::find(b.features.begin(), b.features.end(), idx);
    if (it == b.features.end())
        throw ValidationError("'" + name + "' is not an operating variable");
    return static_cast<std::size_t>(it - b.features.begin());
}

} // namespace

SweepSetup prepare_sweep(const DataTable& table, const TrainedBundle& bundle, const RunConfig& cfg)
{
    cfg.validate();
    SweepSetup s;
    const std::size_t n = bundle.features.size();
    auto& p = s.problem;
    const auto& te = bundle.target("TE");
    const auto& thr = bundle.target("THR");
    p.objective.te_model = std::make_shared<surrogate::GbtModel>(te.model);
    p.objective.thr_model = std::make_shared<surrogate::GbtModel>(thr.model);
    p.objective.te_norm = te.range;
    p.objective.thr_norm = thr.range;
    p.variables = bundle.feature_names();
    p.scaler = bundle.scaler;
    p.te_calibration = te.calibration;
    p.thr_calibration = thr.calibration;
    p.bounds = opt::Bounds::unit(n);
    for (const auto& [name, b] : cfg.bounds) {
        const std::size_t k = feature_position(bundle, name);
        double lo = bundle.scaler.scale(k, b.first);
        double hi = bundle.scaler.scale(k, b.second);
        if (lo > hi)
            std::swap(lo, hi);
        p.bounds.lower[k] = std::clamp(lo, -0.1, 1.1);
        p.bounds.upper[k] = std::clamp(hi, -0.1, 1.1);
    }

    // Tolerance chain: configured, or the correlated operating cluster found
    // on the training rows.
    std::vector<std::string> chain = cfg.chain;
    if (chain.empty()) {
        const Matrix train_rows = table.select(bundle.splits.train, [&] {
            std::vector<std::size_t> all(table.cols());
            for (std::size_t i = 0; i < all.size(); ++i)
                all[i] = i;
            return all;
        }());
        const DataTable train_table(table.schema(), train_rows, "training rows");
        const auto report = stats::correlation_matrix(train_table, cfg.correlation_threshold);
        chain = stats::correlated_cluster(report, table.schema());
        if (chain.size() < 2)
            throw ValidationError("no correlated operating variables above threshold " +
                                  std::to_string(cfg.correlation_threshold) + "; set 'chain' explicitly");
    }
    for (const auto& name : chain)
        s.options.chain.push_back(feature_position(bundle, name));
    for (const auto& [a, b] : cfg.report_pairs)
        s.options.report_pairs.emplace_back(feature_position(bundle, a), feature_position(bundle, b));
    s.options.taus = cfg.taus;
    s.options.all_pairs = cfg.all_pairs;
    s.options.quantile_levels = cfg.quantile_levels;
    s.options.settings = cfg.cobyla;
    s.options.jobs = cfg.jobs;

    s.guess_rows = bundle.splits.test;
    if (cfg.guesses > 0 && cfg.guesses < s.guess_rows.size())
        s.guess_rows.resize(cfg.guesses);
    s.guesses = scaled_features(table, bundle, s.guess_rows);
    return s;
}

eval::SweepReport run_sweep(const DataTable& table, const TrainedBundle& bundle, const RunConfig& cfg,
                            std::function<void(std::size_t, std::size_t)> progress)
{
    SweepSetup s = prepare_sweep(table, bundle, cfg);
    s.options.progress = std::move(progress);
    eval::SweepReport r = eval::sweep(s.problem, s.guesses, s.options);
    const auto te_col = table.column("TE");
    const auto thr_col = table.column("THR");
    // Data extrema drawn as reference lines.
    r.metadata["te_max"] = *std::max_element(te_col.begin(), te_col.end());
    r.metadata["thr_min"] = *std::min_element(thr_col.begin(), thr_col.end());
    r.metadata["guess_rows"] = s.guess_rows;
    r.metadata["scaler_hash"] = bundle.scaler.hash();
    r.metadata["seed"] = cfg.seed;
    return r;
}

nlohmann::json setpoint_sheet(const eval::SweepReport& report, const FeatureSchema& schema,
                              const std::vector<std::size_t>& features, std::optional<double> tau, double quantile)
{
    const eval::SweepEntry* entry = tau ? report.entry_for(*tau) : &report.unconstrained;
    if (!entry)
        throw ValidationError("sweep has no entry for tau " + std::to_string(*tau));
    if (!entry->picks)
        throw ValidationError("sweep entry has no successful solutions");
    const eval::QuantilePick* pick = entry->picks->at(quantile);
    if (!pick)
        throw ValidationError("quantile " + std::to_string(quantile) + " was not picked in this sweep");
    const auto& rec = pick->record;
    nlohmann::json vars = nlohmann::json::array();
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& v = schema.variables()[features[k]];
        vars.push_back({{"name", v.name}, {"unit", v.unit}, {"value", rec.x_eng[k]}, {"scaled", rec.x_scaled[k]}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "setpoint_sheet"},
            {"entry", entry->label},
            {"tau", tau ? nlohmann::json(*tau) : nlohmann::json(nullptr)},
            {"quantile", quantile},
            {"guess_id", rec.guess_id},
            {"feasible", rec.feasible},
            {"objective_value", rec.objective_value},
            {"te_pred", opt::interval_to_json(rec.te_pred)},
            {"thr_pred", opt::interval_to_json(rec.thr_pred)},
            {"variables", vars}};
}

eval::VerificationReport verify(const DataTable& table, const TrainedBundle& bundle, const eval::SweepReport& report,
                                double tau, const RunConfig& cfg, double noise_fraction)
{
    const eval::SweepEntry* entry = report.entry_for(tau);
    if (!entry || !entry->picks)
        throw ValidationError("sweep has no usable entry for tau " + std::to_string(tau));
    const std::vector<std::size_t> guess_rows = report.metadata.value("guess_rows", std::vector<std::size_t>{});
    const std::size_t te_col = table.schema().index_of("TE");
    const std::size_t thr_col = table.schema().index_of("THR");

    std::vector<eval::VerificationInstance> instances;
    std::vector<std::vector<double>> setpoints;
    for (const auto& pick : entry->picks->picks) {
        const auto& rec = pick.record;
        eval::VerificationInstance in;
        in.label = entry->label + " q" + std::to_string(static_cast<int>(pick.level));
        in.setpoint = rec.x_eng;
        in.te_pred = rec.te_pred.point;
        in.thr_pred = rec.thr_pred.point;
        if (rec.guess_id < guess_rows.size()) {
            in.te_baseline = table.values()(guess_rows[rec.guess_id], te_col);
            in.thr_baseline = table.values()(guess_rows[rec.guess_id], thr_col);
        }
        setpoints.push_back(rec.x_eng);
        instances.push_back(std::move(in));
    }

    eval::NoiseModel noise;
    for (std::size_t k = 0; k < bundle.features.size(); ++k)
        noise.sigma.push_back(noise_fraction * (bundle.scaler.max()[k] - bundle.scaler.min()[k]));
    eval::GroundTruth truth;
    if (table.schema().names() == FeatureSchema::plant().names()) {
        truth.te = [](std::span<const double> x) { return synth::plant_te(x); };
        truth.thr = [](std::span<const double> x) { return synth::plant_thr(x); };
    } else {
        auto te = std::make_shared<surrogate::GbtModel>(bundle.target("TE").model);
        auto thr = std::make_shared<surrogate::GbtModel>(bundle.target("THR").model);
        auto scaler = std::make_shared<ScalingParams>(bundle.scaler);
        truth.te = [te, scaler](std::span<const double> x) { return te->predict(scaler->scale_row(x)); };
        truth.thr = [thr, scaler](std::span<const double> x) { return thr->predict(scaler->scale_row(x)); };
    }
    eval::SimulationOptions so;
    so.seed = cfg.seed;
    const auto log = eval::simulate_plant(setpoints, bundle.feature_names(), noise, truth, so);
    return eval::verification_compare(instances, log);
}

carbon::CarbonReport carbon_report(const RunConfig& cfg)
{
    const std::string path = cfg.fleet.empty() ? default_fleet_path() : cfg.fleet;
    return carbon::fleet_report(carbon::load_fleet(path), cfg.delta_pp);
}

} // namespace hitlopt::pipeline
