#include "hitlopt/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "hitlopt/error.hpp"

namespace hitlopt::surrogate {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    // splitmix64 finalizer over the combined input
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SearchSpace SearchSpace::defaults()
{
    SearchSpace s;
    s.dims = {
        {"eta", 0.01, 0.3, true, false},
        {"gamma", 0.0, 5.0, false, false},
        {"reg_lambda", 0.1, 10.0, true, false},
        {"max_depth", 2, 10, false, true},
        {"subsample", 0.5, 1.0, false, false},
        {"colsample_bytree", 0.5, 1.0, false, false},
        {"n_estimators", 50, 500, false, true},
    };
    return s;
}

namespace {

const char* const kFields[] = {"eta", "gamma", "reg_lambda", "max_depth", "subsample", "colsample_bytree", "n_estimators"};

void assign(HyperParams& hp, const std::string& name, double v)
{
    if (name == "eta")
        hp.eta = v;
    else if (name == "gamma")
        hp.gamma = v;
    else if (name == "reg_lambda")
        hp.reg_lambda = v;
    else if (name == "max_depth")
        hp.max_depth = static_cast<int>(std::lround(v));
    else if (name == "subsample")
        hp.subsample = v;
    else if (name == "colsample_bytree")
        hp.colsample_bytree = v;
    else if (name == "n_estimators")
        hp.n_estimators = static_cast<int>(std::lround(v));
    else
        throw ValidationError("unknown hyperparameter in search space: " + name);
}

// Internal coordinates: log for log-scale dimensions, identity otherwise.
double to_internal(const SearchDimension& d, double v) { return d.log_scale ? std::log(v) : v; }
double from_internal(const SearchDimension& d, double u)
{
    double v = d.log_scale ? std::exp(u) : u;
    v = std::clamp(v, d.low, d.high);
    return d.integer ? std::round(v) : v;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Truncated Gaussian mixture over [lo, hi] in internal coordinates: one
// component per observation plus a wide prior centred on the interval.
class ParzenEstimator {
public:
    ParzenEstimator(std::vector<double> obs, double lo, double hi) : lo_(lo), hi_(hi)
    {
        const double range = hi - lo;
        const double prior_mu = 0.5 * (lo + hi);
        mus_ = std::move(obs);
        mus_.push_back(prior_mu);
        std::vector<std::size_t> order(mus_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mus_[a] < mus_[b]; });

        sigmas_.assign(mus_.size(), range);
        const double min_sigma = range / std::min(100.0, static_cast<double>(mus_.size()) + 1.0);
        for (std::size_t k = 0; k < order.size(); ++k) {
            const std::size_t i = order[k];
            if (i == mus_.size() - 1)
                continue; // prior keeps the full range
            const double left = k > 0 ? mus_[i] - mus_[order[k - 1]] : mus_[i] - lo;
            const double right = k + 1 < order.size() ? mus_[order[k + 1]] - mus_[i] : hi - mus_[i];
            sigmas_[i] = std::clamp(std::max(left, right), min_sigma, range);
        }
        mass_.resize(mus_.size());
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            mass_[i] = normal_cdf((hi_ - mus_[i]) / sigmas_[i]) - normal_cdf((lo_ - mus_[i]) / sigmas_[i]);
            mass_[i] = std::max(mass_[i], 1e-12);
        }
    }

    double sample(std::mt19937_64& rng) const
    {
        std::uniform_int_distribution<std::size_t> pick(0, mus_.size() - 1);
        const std::size_t i = pick(rng);
        std::normal_distribution<double> nd(mus_[i], sigmas_[i]);
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double v = nd(rng);
            if (v >= lo_ && v <= hi_)
                return v;
        }
        return std::clamp(mus_[i], lo_, hi_);
    }

    double log_density(double x) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double z = (x - mus_[i]) / sigmas_[i];
            s += std::exp(-0.5 * z * z) / (sigmas_[i] * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
        }
        s /= static_cast<double>(mus_.size());
        return std::log(std::max(s, std::numeric_limits<double>::min()));
    }

private:
    double lo_;
    double hi_;
    std::vector<double> mus_;
    std::vector<double> sigmas_;
    std::vector<double> mass_;
};

double read_field(const HyperParams& hp, const std::string& name)
{
    if (name == "eta")
        return hp.eta;
    if (name == "gamma")
        return hp.gamma;
    if (name == "reg_lambda")
        return hp.reg_lambda;
    if (name == "max_depth")
        return hp.max_depth;
    if (name == "subsample")
        return hp.subsample;
    if (name == "colsample_bytree")
        return hp.colsample_bytree;
    return hp.n_estimators;
}

} // namespace

void SearchSpace::validate() const
{
    for (const auto& d : dims) {
        if (std::find(std::begin(kFields), std::end(kFields), d.name) == std::end(kFields))
            throw ValidationError("unknown hyperparameter in search space: " + d.name);
        if (!(d.low <= d.high))
            throw ValidationError("search bound low > high for " + d.name);
        if (d.log_scale && !(d.low > 0.0))
            throw ValidationError("log-scale search bound must be positive for " + d.name);
    }
    // Every corner of the box must be a valid parameter set.
    HyperParams lo = fixed, hi = fixed;
    for (const auto& d : dims) {
        assign(lo, d.name, d.low);
        assign(hi, d.name, d.high);
    }
    lo.validate();
    hi.validate();
}

nlohmann::json TuneResult::to_json() const
{
    nlohmann::json t = nlohmann::json::array();
    for (const auto& tr : trials)
        t.push_back({{"index", tr.index}, {"params", tr.params.to_json()}, {"validation_rmse", tr.validation_rmse}});
    return {{"best", best.to_json()}, {"best_rmse", best_rmse}, {"trials", t}};
}

TuneResult tune_tpe(const Matrix& X, std::span<const double> y, const SearchSpace& space, int budget,
                    std::uint64_t seed, const TpeOptions& options)
{
    if (budget < 1)
        throw ValidationError("tuning budget must be >= 1");
    space.validate();
    if (X.rows() != y.size())
        throw ValidationError("tune_tpe: X rows and y length differ");
    if (X.rows() < 5)
        throw ValidationError("tune_tpe: need at least 5 rows to hold out a validation set");

    // Hold-out split, fixed for the whole run.
    std::vector<std::size_t> order(X.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 split_rng(derive_seed(seed, 0xfffffffULL));
    std::shuffle(order.begin(), order.end(), split_rng);
    auto n_val = static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(X.rows())));
    n_val = std::clamp<std::size_t>(n_val, 1, X.rows() - 2);
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    const Matrix X_fit = X.select_rows(fit_idx);
    const Matrix X_val = X.select_rows(val_idx);
    std::vector<double> y_fit, y_val;
    for (auto i : fit_idx)
        y_fit.push_back(y[i]);
    for (auto i : val_idx)
        y_val.push_back(y[i]);

    const std::size_t d = space.dims.size();
    std::vector<double> lo(d), hi(d);
    for (std::size_t k = 0; k < d; ++k) {
        lo[k] = to_internal(space.dims[k], space.dims[k].low);
        hi[k] = to_internal(space.dims[k], space.dims[k].high);
    }

    TuneResult result;
    std::vector<std::vector<double>> points; // internal coordinates per trial
    for (int t = 0; t < budget; ++t) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<double> u(d);
        if (t < options.n_startup || result.trials.size() < 2) {
            for (std::size_t k = 0; k < d; ++k) {
                std::uniform_real_distribution<double> ud(lo[k], hi[k]);
                u[k] = lo[k] == hi[k] ? lo[k] : ud(rng);
            }
        } else {
            std::vector<std::size_t> rank(result.trials.size());
            std::iota(rank.begin(), rank.end(), std::size_t{0});
            std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) {
                return result.trials[a].validation_rmse < result.trials[b].validation_rmse;
            });
            const auto n_good = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(rank.size()))));

            std::vector<ParzenEstimator> good, bad;
            for (std::size_t k = 0; k < d; ++k) {
                std::vector<double> g, b;
                for (std::size_t r = 0; r < rank.size(); ++r)
                    (r < n_good ? g : b).push_back(points[rank[r]][k]);
                const double l = lo[k], h = lo[k] == hi[k] ? hi[k] + 1e-12 : hi[k];
                good.emplace_back(std::move(g), l, h);
                bad.emplace_back(std::move(b), l, h);
            }
            double best_score = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < options.n_candidates; ++c) {
                std::vector<double> cand(d);
                double score = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    cand[k] = good[k].sample(rng);
                    score += good[k].log_density(cand[k]) - bad[k].log_density(cand[k]);
                }
                if (score > best_score) {
                    best_score = score;
                    u = cand;
                }
            }
        }

        HyperParams hp = space.fixed;
        for (std::size_t k = 0; k < d; ++k) {
            const double v = from_internal(space.dims[k], u[k]);
            assign(hp, space.dims[k].name, v);
            u[k] = to_internal(space.dims[k], read_field(hp, space.dims[k].name));
        }
        const auto model = train_gbt(X_fit, y_fit, hp, derive_seed(seed, static_cast<std::uint64_t>(t) + 1000003ULL));
        const double loss = rmse(y_val, model.predict(X_val));
        result.trials.push_back({t, hp, loss});
        points.push_back(std::move(u));
    }

    const auto best = std::min_element(result.trials.begin(), result.trials.end(), [](const Trial& a, const Trial& b) {
        return a.validation_rmse < b.validation_rmse;
    });
    result.best = best->params;
    result.best_rmse = best->validation_rmse;
    return result;
}

} // namespace hitlopt::surrogate
