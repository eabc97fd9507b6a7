// hitlopt: batch driver for ingest, training, explanation, tolerance sweeps,
// verification, carbon reporting and the HTTP service.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "hitlopt/error.hpp"
#include "hitlopt/pipeline.hpp"
#include "hitlopt/service.hpp"

namespace fs = std::filesystem;
using namespace hitlopt;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::string> dataset;
    std::optional<std::string> schema;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::optional<int> tuning_budget;
    std::optional<double> alpha;
    std::optional<std::vector<double>> taus;
    std::optional<std::size_t> guesses;
    std::optional<std::vector<std::string>> chain;
    std::optional<std::string> fleet;
    std::optional<double> delta_pp;
    std::optional<std::string> host;
    std::optional<int> port;
    std::optional<std::string> token;
    std::optional<std::string> store;
    std::optional<std::size_t> rows;
};

pipeline::RunConfig resolve(const Overrides& o)
{
    pipeline::RunConfig c = o.config_path.empty() ? pipeline::RunConfig{} : pipeline::RunConfig::load(o.config_path);
    if (o.dataset) c.dataset = *o.dataset;
    if (o.schema) c.schema = *o.schema;
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.output_dir = *o.out;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.tuning_budget) c.tuning_budget = *o.tuning_budget;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.taus) c.taus = *o.taus;
    if (o.guesses) c.guesses = *o.guesses;
    if (o.chain) c.chain = *o.chain;
    if (o.fleet) c.fleet = *o.fleet;
    if (o.delta_pp) c.delta_pp = *o.delta_pp;
    if (o.host) c.host = *o.host;
    if (o.port) c.port = *o.port;
    if (o.token) c.token = *o.token;
    if (o.store) c.store_dir = *o.store;
    if (o.rows) c.synthetic_rows = *o.rows;
    c.validate();
    return c;
}

fs::path out_path(const pipeline::RunConfig& c, const std::string& name)
{
    fs::create_directories(c.output_dir);
    return fs::path(c.output_dir) / name;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + p.string());
    out << text;
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(1) + "\n"); }

pipeline::TrainedBundle bundle_for(const DataTable& table, const pipeline::RunConfig& c, const std::string& models)
{
    if (models.empty())
        return pipeline::train(table, c);
    std::ifstream in(models);
    if (!in)
        throw ValidationError("cannot open model bundle: " + models);
    try {
        return pipeline::TrainedBundle::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("model bundle " + models + ": " + e.what());
    }
}

int cmd_ingest(const pipeline::RunConfig& c)
{
    const DataTable table = pipeline::load_dataset(c);
    const auto s = pipeline::summarize(table);
    std::printf("rows: %zu\n%-8s %-8s %14s %14s %14s\n", s.rows, "variable", "unit", "min", "max", "mean");
    for (const auto& v : s.variables)
        std::printf("%-8s %-8s %14.6g %14.6g %14.6g\n", v.name.c_str(), v.unit.c_str(), v.min, v.max, v.mean);
    write_json(out_path(c, "summary.json"), s.to_json());
    return 0;
}

int cmd_train(const pipeline::RunConfig& c)
{
    const DataTable table = pipeline::load_dataset(c);
    const auto bundle = pipeline::train(table, c);
    nlohmann::json metrics = nlohmann::json::object();
    std::printf("%-8s %10s %10s %10s %10s %10s\n", "target", "train_r2", "train_rmse", "test_r2", "test_rmse", "q_hat");
    for (const auto& t : bundle.targets) {
        std::printf("%-8s %10.4f %10.4g %10.4f %10.4g %10.4g\n", t.target.c_str(), t.train_metrics.r2,
                    t.train_metrics.rmse, t.test_metrics.r2, t.test_metrics.rmse, t.calibration.q_hat);
        metrics[t.target] = {{"train", t.train_metrics.to_json()},
                             {"test", t.test_metrics.to_json()},
                             {"q_hat", t.calibration.q_hat},
                             {"params", t.params.to_json()}};
    }
    write_json(out_path(c, "models.json"), bundle.to_json());
    write_json(out_path(c, "metrics.json"), {{"schema_version", pipeline::kSchemaVersion}, {"targets", metrics}});
    return 0;
}

int cmd_explain(const pipeline::RunConfig& c, const std::string& models)
{
    const DataTable table = pipeline::load_dataset(c);
    const auto bundle = bundle_for(table, c, models);
    nlohmann::json all = nlohmann::json::array();
    for (const auto& r : pipeline::explain_models(table, bundle)) {
        std::printf("%s (base %.6g)\n", r.target.c_str(), r.base_value);
        std::string csv = "feature,mean_abs_shap,percent\n";
        for (const auto& f : r.ranking) {
            std::printf("  %-8s %8.3f%%\n", f.feature.c_str(), f.percent);
            csv += f.feature + "," + std::to_string(f.mean_abs_shap) + "," + std::to_string(f.percent) + "\n";
        }
        write_text(out_path(c, "shap_" + r.target + ".csv"), csv);
        all.push_back(r.to_json());
    }
    write_json(out_path(c, "shap.json"), {{"schema_version", pipeline::kSchemaVersion}, {"targets", all}});
    return 0;
}

void print_sweep(const eval::SweepReport& r)
{
    std::printf("%-14s %9s", "entry", "feasible");
    for (const auto& p : r.pairs)
        std::printf(" %14s", p.label().c_str());
    std::printf("\n");
    auto row = [&](const eval::SweepEntry& e) {
        std::printf("%-14s %4zu/%-4zu", e.label.c_str(), e.feasible_count, e.solutions.size());
        for (const auto& p : e.pair_cvm)
            std::printf(" %14.4f", p.value);
        std::printf("\n");
    };
    row(r.baseline);
    for (const auto& e : r.entries)
        row(e);
    row(r.unconstrained);
}

std::string cvm_csv(const eval::SweepReport& r)
{
    std::string s = "entry,pair,value\n";
    auto add = [&](const eval::SweepEntry& e) {
        for (const auto& p : e.pair_cvm)
            s += e.label + "," + p.label + "," + nlohmann::json(p.value).dump() + "\n";
    };
    add(r.baseline);
    for (const auto& e : r.entries)
        add(e);
    add(r.unconstrained);
    return s;
}

int cmd_sweep(const pipeline::RunConfig& c, const std::string& models, std::optional<double> verify_tau)
{
    const DataTable table = pipeline::load_dataset(c);
    const auto bundle = bundle_for(table, c, models);
    const auto report = pipeline::run_sweep(table, bundle, c);
    print_sweep(report);
    write_json(out_path(c, "sweep_report.json"), report.to_json());
    write_text(out_path(c, "sweep_scatter.csv"), eval::sweep_scatter_csv(report));
    write_text(out_path(c, "sweep_cvm.csv"), cvm_csv(report));
    if (verify_tau) {
        const auto v = pipeline::verify(table, bundle, report, *verify_tau, c);
        std::printf("verification at tau=%g: mean TE gain %.4f pp, mean THR reduction %.2f kJ/kWh, CI coverage %.3f\n",
                    *verify_tau, v.mean_te_gain, v.mean_thr_reduction, v.coverage);
        write_json(out_path(c, "verification.json"), v.to_json());
    }
    return 0;
}

int cmd_carbon(const pipeline::RunConfig& c)
{
    const auto r = pipeline::carbon_report(c);
    std::printf("delta %.4g pp\n%-10s %6s %14s\n", r.delta_pp, "country", "plants", "reduction_Mt");
    for (const auto& ct : r.countries)
        std::printf("%-10s %6zu %14.3f\n", ct.country.c_str(), ct.plants, carbon::CarbonReport::megatonnes(ct.kg));
    std::printf("%-10s %6zu %14.3f\n", "total", r.plants.size(), carbon::CarbonReport::megatonnes(r.total_kg));
    write_json(out_path(c, "carbon_report.json"), r.to_json());
    write_text(out_path(c, "carbon_countries.csv"), r.country_csv());
    return 0;
}

service::Service* g_service = nullptr;

void on_signal(int)
{
    if (g_service)
        g_service->stop();
}

int cmd_serve(const pipeline::RunConfig& c)
{
    service::ServiceOptions opts;
    opts.store_dir = c.store_dir;
    opts.token = c.token;
    opts.defaults = c;
    service::Service svc(opts);
    g_service = &svc;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::fprintf(stderr, "serving on %s:%d (store %s)\n", c.host.c_str(), c.port, c.store_dir.c_str());
    const bool ok = svc.listen(c.host, c.port);
    g_service = nullptr;
    if (!ok) {
        std::fprintf(stderr, "error: cannot bind %s:%d\n", c.host.c_str(), c.port);
        return 3;
    }
    return 0;
}

int cmd_synth(const pipeline::RunConfig& c, const std::string& path)
{
    const DataTable t = pipeline::synthetic_dataset(c.schema, c.synthetic_rows, c.seed);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path);
    t.write_csv(out);
    std::printf("wrote %zu rows to %s\n", t.rows(), path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Surrogate-model setpoint optimization with operator-tuned tolerance constraints"};
    app.require_subcommand(1);
    Overrides o;
    std::string models;
    std::string synth_out = "synthetic.csv";
    std::optional<double> verify_tau;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--dataset", o.dataset, "CSV dataset (default: built-in synthetic data)");
        sub->add_option("--schema", o.schema, "plant | correlated_six | friedman1");
        sub->add_option("--rows", o.rows, "rows of synthetic data when no dataset is given");
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("-o,--out", o.out, "output directory");
        sub->add_option("-j,--jobs", o.jobs, "worker cap");
    };

    auto* ingest = app.add_subcommand("ingest", "validate a dataset and print its summary");
    common(ingest);
    auto* train = app.add_subcommand("train", "train TE/THR surrogates with conformal calibration");
    common(train);
    train->add_option("--tuning-budget", o.tuning_budget, "TPE trials (0 = fixed hyperparameters)");
    train->add_option("--alpha", o.alpha, "conformal miscoverage level");
    auto* explain = app.add_subcommand("explain", "SHAP feature contributions");
    common(explain);
    explain->add_option("--models", models, "model bundle from 'train' (default: retrain)");
    auto* sweep = app.add_subcommand("sweep", "optimize from every guess over the tau grid");
    common(sweep);
    sweep->add_option("--models", models, "model bundle from 'train' (default: retrain)");
    sweep->add_option("--taus", o.taus, "tolerance values");
    sweep->add_option("--guesses", o.guesses, "number of initial guesses (0 = all test rows)");
    sweep->add_option("--chain", o.chain, "constrained variables in chain order");
    sweep->add_option("--verify", verify_tau, "simulate operation at the picks of this tau");
    auto* carbon_cmd = app.add_subcommand("carbon", "fleet lifetime CO2 reduction");
    common(carbon_cmd);
    carbon_cmd->add_option("--fleet", o.fleet, "fleet configuration (JSON)");
    carbon_cmd->add_option("--delta-pp", o.delta_pp, "efficiency gain in percentage points");
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    common(serve);
    serve->add_option("--host", o.host, "bind address");
    serve->add_option("--port", o.port, "bind port");
    serve->add_option("--token", o.token, "required X-Auth-Token value");
    serve->add_option("--store", o.store, "store directory");
    serve->add_option("--fleet", o.fleet, "fleet configuration (JSON)");
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    common(synth_cmd);
    synth_cmd->add_option("--csv", synth_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const pipeline::RunConfig c = resolve(o);
        if (ingest->parsed())
            return cmd_ingest(c);
        if (train->parsed())
            return cmd_train(c);
        if (explain->parsed())
            return cmd_explain(c, models);
        if (sweep->parsed())
            return cmd_sweep(c, models, verify_tau);
        if (carbon_cmd->parsed())
            return cmd_carbon(c);
        if (serve->parsed())
            return cmd_serve(c);
        if (synth_cmd->parsed())
            return cmd_synth(c, synth_out);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
