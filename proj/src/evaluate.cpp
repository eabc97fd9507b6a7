#include "hitlopt/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hitlopt/error.hpp"
#include "hitlopt/stats.hpp"

namespace hitlopt::eval {

std::size_t nearest_rank(double q, std::size_t n)
{
    if (n == 0)
        throw EmptyInputError("nearest rank of an empty set");
    if (!(q >= 0.0 && q <= 100.0))
        throw ValidationError("quantile level must lie in [0, 100]");
    // Guard against q / 100 * (n - 1) landing a hair above an integer.
    const double pos = q / 100.0 * static_cast<double>(n - 1);
    const double r = std::ceil(pos - 1e-9);
    return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, r)));
}

const QuantilePick* QuantilePicks::at(double level) const
{
    for (const auto& p : picks)
        if (p.level == level)
            return &p;
    return nullptr;
}

nlohmann::json QuantilePicks::to_json() const
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : picks)
        arr.push_back({{"level", p.level}, {"record", p.record.to_json()}});
    return {{"feasible_only", feasible_only}, {"picks", arr}};
}

QuantilePicks quantile_solutions(const std::vector<opt::SolutionRecord>& solutions, const std::vector<double>& levels)
{
    std::vector<const opt::SolutionRecord*> pool;
    bool any_feasible = false;
    for (const auto& s : solutions) {
        if (s.status == "error" || std::isnan(s.objective_value))
            continue;
        any_feasible = any_feasible || s.feasible;
        pool.push_back(&s);
    }
    if (any_feasible)
        std::erase_if(pool, [](const opt::SolutionRecord* s) { return !s->feasible; });
    if (pool.empty())
        throw EmptyInputError("no solutions to rank");
    std::stable_sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) {
        if (a->objective_value != b->objective_value)
            return a->objective_value < b->objective_value;
        return a->guess_id < b->guess_id;
    });
    QuantilePicks out;
    out.feasible_only = any_feasible;
    for (double q : levels)
        out.picks.push_back({q, *pool[nearest_rank(q, pool.size())]});
    return out;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<double> SweepEntry::values(std::size_t var) const
{
    std::vector<double> v;
    v.reserve(solutions.size());
    for (const auto& s : solutions)
        if (s.status != "error")
            v.push_back(s.x_scaled[var]);
    return v;
}

nlohmann::json SweepEntry::to_json(const std::vector<PairSpec>& pairs) const
{
    nlohmann::json j;
    j["label"] = label;
    j["tau"] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
    j["feasible_count"] = feasible_count;
    nlohmann::json pc = nlohmann::json::array();
    for (const auto& p : pair_cvm)
        pc.push_back({{"label", p.label}, {"a", p.a}, {"b", p.b}, {"value", p.value}});
    j["pair_cvm"] = pc;
    nlohmann::json dc = nlohmann::json::array();
    for (const auto& d : drift_cvm)
        dc.push_back({{"variable", d.variable}, {"value", d.value}});
    j["drift_cvm"] = dc;
    j["picks"] = picks ? picks->to_json() : nlohmann::json(nullptr);
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& s : solutions)
        recs.push_back(s.to_json());
    j["solutions"] = recs;

    nlohmann::json scatter = nlohmann::json::array();
    for (const auto& p : pairs)
        scatter.push_back({{"a", p.name_a}, {"b", p.name_b}, {"x", values(p.a)}, {"y", values(p.b)}});
    j["scatter"] = scatter;
    return j;
}

const SweepEntry* SweepReport::entry_for(double tau) const
{
    for (const auto& e : entries)
        if (e.tau && std::abs(*e.tau - tau) < 1e-12)
            return &e;
    return nullptr;
}

namespace {

std::vector<std::size_t> payload_variables(const std::vector<PairSpec>& pairs, const std::vector<std::size_t>& chain)
{
    std::set<std::size_t> vars(chain.begin(), chain.end());
    for (const auto& p : pairs) {
        vars.insert(p.a);
        vars.insert(p.b);
    }
    return {vars.begin(), vars.end()};
}

nlohmann::json entry_json(const SweepEntry& e, const SweepReport& r)
{
    const auto vars = payload_variables(r.pairs, r.constrained);
    nlohmann::json j = e.to_json(r.pairs);
    nlohmann::json ecdfs = nlohmann::json::object();
    for (std::size_t v : vars)
        ecdfs[r.variables[v]] = stats::ecdf(e.values(v)).to_json();
    j["ecdf"] = ecdfs;
    return j;
}

void fill_similarity(SweepEntry& e, const SweepEntry& baseline, const std::vector<PairSpec>& pairs)
{
    for (const auto& p : pairs) {
        const auto a = e.values(p.a);
        const auto b = e.values(p.b);
        const double v = a.empty() ? std::nan("") : stats::cvm_two_sample(a, b).statistic;
        e.pair_cvm.push_back({p.label(), p.name_a, p.name_b, v});
    }
    std::set<std::size_t> seen;
    for (const auto& p : pairs) {
        for (std::size_t var : {p.a, p.b}) {
            if (!seen.insert(var).second)
                continue;
            const auto opt_vals = e.values(var);
            const double v =
                opt_vals.empty() ? std::nan("") : stats::cvm_two_sample(baseline.values(var), opt_vals).statistic;
            e.drift_cvm.push_back({var == p.a ? p.name_a : p.name_b, v});
        }
    }
}

std::string fmt_tau(double tau)
{
    std::ostringstream os;
    os << "tau=" << tau;
    return os.str();
}

} // namespace

nlohmann::json SweepReport::to_json() const
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "sweep_report";
    j["variables"] = variables;
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& p : pairs)
        pj.push_back({{"a", p.name_a}, {"b", p.name_b}, {"label", p.label()}});
    j["pairs"] = pj;
    std::vector<std::string> chain;
    for (auto c : constrained)
        chain.push_back(variables[c]);
    j["constrained"] = chain;
    j["quantile_levels"] = quantile_levels;
    j["settings"] = settings.to_json();
    j["guess_count"] = guesses.rows();
    j["baseline"] = entry_json(baseline, *this);
    nlohmann::json es = nlohmann::json::array();
    for (const auto& e : entries)
        es.push_back(entry_json(e, *this));
    j["entries"] = es;
    j["unconstrained"] = entry_json(unconstrained, *this);
    j["metadata"] = metadata;
    return j;
}

SweepReport sweep(const opt::OptimizationProblem& base, const Matrix& guesses, const SweepOptions& options)
{
    base.validate();
    if (options.taus.empty())
        throw ValidationError("sweep needs at least one tau");
    for (double t : options.taus)
        if (!(t > 0.0))
            throw ValidationError("every tau must be positive");
    if (options.chain.size() < 2)
        throw ValidationError("sweep needs at least two chained variables");
    if (guesses.rows() == 0)
        throw EmptyInputError("sweep needs at least one initial guess");
    const std::size_t n = base.objective.dimension();

    SweepReport r;
    r.variables = base.variables;
    if (r.variables.empty())
        for (std::size_t i = 0; i < n; ++i)
            r.variables.push_back("x" + std::to_string(i));
    r.constrained = options.chain;
    r.quantile_levels = options.quantile_levels;
    r.settings = options.settings;
    r.guesses = guesses;

    auto report_pairs = options.report_pairs;
    if (report_pairs.empty())
        for (std::size_t i = 0; i + 1 < options.chain.size(); ++i)
            report_pairs.emplace_back(options.chain[i], options.chain[i + 1]);
    for (auto [a, b] : report_pairs) {
        if (a >= n || b >= n)
            throw ValidationError("reported pair refers to a variable outside the problem");
        r.pairs.push_back({a, b, r.variables[a], r.variables[b]});
    }

    // Baseline: the guesses themselves.
    r.baseline.label = "baseline";
    for (std::size_t i = 0; i < guesses.rows(); ++i) {
        opt::SolutionRecord rec;
        rec.guess_id = i;
        rec.x_scaled = base.bounds.clip(guesses.row(i));
        rec.x_eng = base.scaler.size() ? base.scaler.inverse_row(rec.x_scaled) : rec.x_scaled;
        const double te = base.objective.te_model->predict(rec.x_scaled);
        const double thr = base.objective.thr_model->predict(rec.x_scaled);
        rec.te_pred = {te, te, te};
        rec.thr_pred = {thr, thr, thr};
        rec.objective_value = opt::scalarized_objective(base.objective, rec.x_scaled);
        rec.feasible = true;
        rec.status = "initial_guess";
        r.baseline.solutions.push_back(std::move(rec));
    }
    r.baseline.feasible_count = guesses.rows();

    std::vector<double> taus = options.taus;
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    // Task 0 is the unconstrained problem, task k the k-th tau.
    const std::size_t n_tasks = taus.size() + 1;
    std::vector<SweepEntry> results(n_tasks);
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, options.jobs));
    const std::size_t outer = std::min(jobs, n_tasks);
    const int inner = static_cast<int>(std::max<std::size_t>(1, jobs / outer));
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    std::exception_ptr failure;
    auto run_task = [&](std::size_t k) {
        opt::OptimizationProblem p = base;
        SweepEntry& e = results[k];
        if (k == 0) {
            p.constraints.reset();
            e.label = "unconstrained";
        } else {
            p.constraints = opt::ToleranceConstraintSet{options.chain, taus[k - 1], options.all_pairs};
            e.tau = taus[k - 1];
            e.label = fmt_tau(taus[k - 1]);
        }
        e.solutions = opt::solve_batch(p, guesses, options.settings, inner);
    };
    auto worker = [&] {
        for (std::size_t k = next++; k < n_tasks; k = next++) {
            try {
                run_task(k);
            } catch (...) {
                std::lock_guard lock(progress_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
            const std::size_t d = ++done;
            if (options.progress) {
                std::lock_guard lock(progress_mutex);
                options.progress(d, n_tasks);
            }
        }
    };
    if (outer == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < outer; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    fill_similarity(r.baseline, r.baseline, r.pairs);
    for (auto& e : results) {
        e.feasible_count = static_cast<std::size_t>(
            std::count_if(e.solutions.begin(), e.solutions.end(), [](const auto& s) { return s.feasible; }));
        fill_similarity(e, r.baseline, r.pairs);
        try {
            e.picks = quantile_solutions(e.solutions, options.quantile_levels);
        } catch (const EmptyInputError&) {
            e.picks.reset();
        }
    }
    r.unconstrained = std::move(results[0]);
    for (std::size_t k = 1; k < n_tasks; ++k)
        r.entries.push_back(std::move(results[k]));
    return r;
}

std::string sweep_scatter_csv(const SweepReport& report)
{
    std::ostringstream os;
    os.precision(17);
    os << "entry,guess_id,feasible,objective";
    const auto vars = payload_variables(report.pairs, report.constrained);
    for (auto v : vars)
        os << ',' << report.variables[v];
    os << '\n';
    auto emit = [&](const SweepEntry& e) {
        for (const auto& s : e.solutions) {
            if (s.status == "error")
                continue;
            os << e.label << ',' << s.guess_id << ',' << (s.feasible ? 1 : 0) << ',' << s.objective_value;
            for (auto v : vars)
                os << ',' << s.x_scaled[v];
            os << '\n';
        }
    };
    emit(report.baseline);
    for (const auto& e : report.entries)
        emit(e);
    emit(report.unconstrained);
    return os.str();
}

// ---------------------------------------------------------------------------
// Verification

void ActualLog::write_csv(std::ostream& os) const
{
    os.precision(17);
    os << "time,instance";
    for (const auto& v : variables)
        os << ',' << v;
    os << ",TE,THR\n";
    for (const auto& s : samples) {
        os << s.time << ',' << s.instance;
        for (double v : s.values)
            os << ',' << v;
        os << ',' << s.te << ',' << s.thr << '\n';
    }
}

ActualLog simulate_plant(const std::vector<std::vector<double>>& setpoints, const std::vector<std::string>& variables,
                         const NoiseModel& noise, const GroundTruth& truth, const SimulationOptions& options)
{
    if (options.samples_per_window < 1 || !(options.interval_seconds > 0.0))
        throw ValidationError("simulation needs a positive window and sampling interval");
    if (!truth.te || !truth.thr)
        throw ValidationError("simulation needs TE and THR ground-truth functions");
    const std::size_t m = variables.size();
    if (noise.sigma.size() != m || (!noise.drift_per_hour.empty() && noise.drift_per_hour.size() != m))
        throw ValidationError("noise model width does not match the variables");

    ActualLog log;
    log.variables = variables;
    log.interval_seconds = options.interval_seconds;
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const double window = options.samples_per_window * options.interval_seconds;
    for (std::size_t i = 0; i < setpoints.size(); ++i) {
        if (setpoints[i].size() != m)
            throw ValidationError("setpoint width does not match the variables");
        for (int j = 0; j < options.samples_per_window; ++j) {
            const double elapsed = j * options.interval_seconds;
            LogSample s;
            s.time = static_cast<double>(i) * window + elapsed;
            s.instance = i;
            s.values.resize(m);
            for (std::size_t k = 0; k < m; ++k) {
                const double drift = noise.drift_per_hour.empty() ? 0.0 : noise.drift_per_hour[k] * elapsed / 3600.0;
                s.values[k] = setpoints[i][k] + drift + noise.sigma[k] * z(rng);
            }
            s.te = truth.te(s.values) + noise.te_sigma * z(rng);
            s.thr = truth.thr(s.values) + noise.thr_sigma * z(rng);
            log.samples.push_back(std::move(s));
        }
    }
    return log;
}

MeanCi mean_ci95(std::span<const double> values)
{
    if (values.size() < 2)
        throw ValidationError("confidence interval needs at least two samples");
    const double mu = stats::mean(values);
    const double half = 1.96 * stats::stddev(values) / std::sqrt(static_cast<double>(values.size()));
    return {mu, mu - half, mu + half};
}

nlohmann::json VerificationReport::to_json() const
{
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& iv : instances) {
        nlohmann::json vars = nlohmann::json::array();
        for (const auto& w : iv.variables)
            vars.push_back({{"variable", w.variable},
                            {"setpoint", w.setpoint},
                            {"mean", w.mean},
                            {"lower", w.lower},
                            {"upper", w.upper},
                            {"n", w.n},
                            {"inside", w.inside}});
        inst.push_back({{"label", iv.label},
                        {"variables", vars},
                        {"te_actual", iv.te_actual},
                        {"thr_actual", iv.thr_actual},
                        {"te_pred", iv.te_pred},
                        {"thr_pred", iv.thr_pred},
                        {"te_gain", iv.te_gain},
                        {"thr_reduction", iv.thr_reduction}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "verification_report"},
            {"window_seconds", window_seconds},
            {"ci_level", ci_level},
            {"instances", inst},
            {"mean_te_gain", mean_te_gain},
            {"mean_thr_reduction", mean_thr_reduction},
            {"coverage", coverage}};
}

VerificationReport verification_compare(const std::vector<VerificationInstance>& instances, const ActualLog& log)
{
    if (instances.empty())
        throw EmptyInputError("verification needs at least one instance");
    std::map<std::size_t, std::vector<const LogSample*>> windows;
    for (const auto& s : log.samples)
        windows[s.instance].push_back(&s);

    VerificationReport rep;
    std::size_t inside = 0, total = 0;
    std::size_t max_n = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& in = instances[i];
        const auto it = windows.find(i);
        const std::size_t n = it == windows.end() ? 0 : it->second.size();
        max_n = std::max(max_n, n);
        InstanceVerification iv;
        iv.label = in.label;
        std::vector<double> buf(n);
        for (std::size_t k = 0; k < log.variables.size(); ++k) {
            for (std::size_t j = 0; j < n; ++j)
                buf[j] = it->second[j]->values[k];
            MeanCi ci{};
            try {
                ci = mean_ci95(buf);
            } catch (const ValidationError&) {
                throw ValidationError("instance '" + in.label + "', variable " + log.variables[k] +
                                      ": confidence interval undefined with fewer than two samples");
            }
            const double sp = in.setpoint.at(k);
            const bool ok = sp >= ci.lower && sp <= ci.upper;
            iv.variables.push_back({log.variables[k], sp, ci.mean, ci.lower, ci.upper, n, ok});
            inside += ok ? 1 : 0;
            ++total;
        }
        for (std::size_t j = 0; j < n; ++j)
            buf[j] = it->second[j]->te;
        iv.te_actual = n ? stats::mean(buf) : std::nan("");
        for (std::size_t j = 0; j < n; ++j)
            buf[j] = it->second[j]->thr;
        iv.thr_actual = n ? stats::mean(buf) : std::nan("");
        iv.te_pred = in.te_pred;
        iv.thr_pred = in.thr_pred;
        iv.te_gain = iv.te_actual - in.te_baseline;
        iv.thr_reduction = in.thr_baseline - iv.thr_actual;
        rep.mean_te_gain += iv.te_gain;
        rep.mean_thr_reduction += iv.thr_reduction;
        rep.instances.push_back(std::move(iv));
    }
    rep.mean_te_gain /= static_cast<double>(instances.size());
    rep.mean_thr_reduction /= static_cast<double>(instances.size());
    rep.coverage = total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
    rep.window_seconds = static_cast<double>(max_n) * log.interval_seconds;
    return rep;
}

} // namespace hitlopt::eval
