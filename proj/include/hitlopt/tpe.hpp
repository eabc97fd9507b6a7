#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitlopt/matrix.hpp"
#include "hitlopt/surrogate.hpp"

namespace hitlopt::surrogate {

struct SearchDimension {
    std::string name; // a HyperParams field name
    double low;
    double high;
    bool log_scale = false;
    bool integer = false;
};

struct SearchSpace {
    std::vector<SearchDimension> dims;
    // Values for fields not covered by `dims`.
    HyperParams fixed;

    // eta [0.01,0.3] log, gamma [0,5], reg_lambda [0.1,10] log,
    // max_depth {2..10}, subsample [0.5,1], colsample_bytree [0.5,1],
    // n_estimators {50..500}.
    static SearchSpace defaults();
    void validate() const;
};

struct TpeOptions {
    int n_startup = 10;      // random trials before the model kicks in
    double gamma = 0.25;     // quantile separating good from bad trials
    int n_candidates = 24;   // draws from l(x) scored per trial
    double validation_fraction = 0.2;
};

struct Trial {
    int index;
    HyperParams params;
    double validation_rmse;
};

struct TuneResult {
    HyperParams best;
    double best_rmse;
    std::vector<Trial> trials;
    nlohmann::json to_json() const;
};

// Tree-structured Parzen Estimator search minimizing validation RMSE on a
// held-out share of the provided rows. Setting options.n_startup >= budget
// turns it into plain random search.
TuneResult tune_tpe(const Matrix& X, std::span<const double> y, const SearchSpace& space, int budget,
                    std::uint64_t seed, const TpeOptions& options = {});

// Seed for trial `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

} // namespace hitlopt::surrogate
