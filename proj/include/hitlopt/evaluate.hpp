#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitlopt/cobyla.hpp"
#include "hitlopt/matrix.hpp"
#include "hitlopt/optimizer.hpp"

namespace hitlopt::eval {

inline constexpr int kSchemaVersion = 1;

inline const std::vector<double> kDefaultQuantileLevels{0, 25, 50, 75, 95, 100};

// 0-based nearest rank ceil(q / 100 * (n - 1)).
std::size_t nearest_rank(double q, std::size_t n);

struct QuantilePick {
    double level;
    opt::SolutionRecord record;
};

struct QuantilePicks {
    std::vector<QuantilePick> picks;
    // True when the ranking was restricted to feasible records.
    bool feasible_only = false;

    const QuantilePick* at(double level) const;
    nlohmann::json to_json() const;
};

// Ranks by objective value (ties by guess id) and picks the nearest-rank
// record for every level. Failed records are ignored; when any record is
// feasible only feasible records take part. Throws EmptyInputError when
// nothing is left to rank.
QuantilePicks quantile_solutions(const std::vector<opt::SolutionRecord>& solutions,
                                 const std::vector<double>& levels = kDefaultQuantileLevels);

// Correlated pair reported in the sweep; indices into the problem variables.
struct PairSpec {
    std::size_t a;
    std::size_t b;
    std::string name_a;
    std::string name_b;

    std::string label() const { return "CvM_" + name_b; }
};

struct PairCvm {
    std::string label;
    std::string a;
    std::string b;
    double value;
};

struct DriftCvm {
    std::string variable;
    double value;
};

struct SweepEntry {
    std::string label;
    std::optional<double> tau; // empty for the baseline and the unconstrained entry
    std::vector<opt::SolutionRecord> solutions;
    std::size_t feasible_count = 0;
    std::vector<PairCvm> pair_cvm;
    // Initial-guess marginal against optimized marginal, per pair variable.
    std::vector<DriftCvm> drift_cvm;
    std::optional<QuantilePicks> picks;

    // Records, similarity values and scatter payloads; ECDF payloads are
    // added by SweepReport::to_json.
    nlohmann::json to_json(const std::vector<PairSpec>& pairs) const;
    // Scaled values of variable `var` over the successful solutions.
    std::vector<double> values(std::size_t var) const;
};

struct SweepReport {
    std::vector<std::string> variables;
    std::vector<PairSpec> pairs;
    std::vector<std::size_t> constrained; // chain order
    std::vector<double> quantile_levels;
    opt::CobylaSettings settings;
    Matrix guesses;
    SweepEntry baseline;
    std::vector<SweepEntry> entries; // ascending tau
    SweepEntry unconstrained;
    nlohmann::json metadata = nlohmann::json::object();

    const SweepEntry* entry_for(double tau) const;
    double pair_value(const SweepEntry& e, std::size_t pair_index = 0) const { return e.pair_cvm.at(pair_index).value; }
    nlohmann::json to_json() const;
};

struct SweepOptions {
    std::vector<double> taus;
    // Variables tied by the tolerance chain, in chain order.
    std::vector<std::size_t> chain;
    bool all_pairs = false;
    // Pairs reported with CvM values; defaults to the consecutive chain pairs.
    std::vector<std::pair<std::size_t, std::size_t>> report_pairs;
    std::vector<double> quantile_levels = kDefaultQuantileLevels;
    opt::CobylaSettings settings;
    int jobs = 1;
    // Called after each finished entry with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;
};

// Solves the unconstrained problem and one chain-constrained problem per tau
// from every guess row, then reports CvM similarity of each correlated pair
// (the two variables of the pair compared against each other, as in the
// baseline on the guesses) and per-variable drift from the guesses.
SweepReport sweep(const opt::OptimizationProblem& base, const Matrix& guesses, const SweepOptions& options);

// Plain CSV payloads for plotting: one row per solution with the pair
// variables of every entry.
std::string sweep_scatter_csv(const SweepReport& report);

// ---------------------------------------------------------------------------
// Verification against (simulated) operation.

struct NoiseModel {
    std::vector<double> sigma;          // per variable, engineering units
    std::vector<double> drift_per_hour; // per variable; empty means none
    double te_sigma = 0.0;
    double thr_sigma = 0.0;
};

struct GroundTruth {
    std::function<double(std::span<const double>)> te;
    std::function<double(std::span<const double>)> thr;
};

struct SimulationOptions {
    int samples_per_window = 20;
    double interval_seconds = 30.0;
    std::uint64_t seed = 0;
};

struct LogSample {
    double time;
    std::size_t instance;
    std::vector<double> values;
    double te;
    double thr;
};

struct ActualLog {
    std::vector<std::string> variables;
    double interval_seconds = 30.0;
    std::vector<LogSample> samples;

    void write_csv(std::ostream& os) const;
};

// One window per setpoint vector, back to back in time.
ActualLog simulate_plant(const std::vector<std::vector<double>>& setpoints, const std::vector<std::string>& variables,
                         const NoiseModel& noise, const GroundTruth& truth, const SimulationOptions& options);

struct VerificationInstance {
    std::string label;
    std::vector<double> setpoint; // engineering units
    double te_pred = 0.0;
    double thr_pred = 0.0;
    double te_baseline = 0.0;
    double thr_baseline = 0.0;
};

struct WindowStat {
    std::string variable;
    double setpoint;
    double mean;
    double lower;
    double upper;
    std::size_t n;
    bool inside;
};

struct InstanceVerification {
    std::string label;
    std::vector<WindowStat> variables;
    double te_actual;
    double thr_actual;
    double te_pred;
    double thr_pred;
    double te_gain;       // actual - baseline, percentage points
    double thr_reduction; // baseline - actual, kJ/kWh
};

struct VerificationReport {
    double window_seconds = 600.0;
    double ci_level = 0.95;
    std::vector<InstanceVerification> instances;
    double mean_te_gain = 0.0;
    double mean_thr_reduction = 0.0;
    // Fraction of (instance, variable) setpoints inside their window CI.
    double coverage = 0.0;

    nlohmann::json to_json() const;
};

// Normal-approximation interval mean +- 1.96 s / sqrt(n). Throws
// ValidationError for fewer than two samples.
struct MeanCi {
    double mean;
    double lower;
    double upper;
};
MeanCi mean_ci95(std::span<const double> values);

// Window statistics per instance; window i holds the log samples tagged i.
VerificationReport verification_compare(const std::vector<VerificationInstance>& instances, const ActualLog& log);

} // namespace hitlopt::eval
