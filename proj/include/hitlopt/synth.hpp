#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "hitlopt/data.hpp"

// Synthetic datasets with known ground truth, used for demos, benchmarks and
// the simulated plant.
namespace hitlopt::synth {

// Plant-like table on FeatureSchema::plant(). A load factor drives CFR, TAF,
// MSP, MSF, FWT and Power (one correlated cluster); MST, RHT and CV vary
// independently. TE and THR follow plant_te / plant_thr plus noise.
DataTable plant_dataset(std::size_t n, std::uint64_t seed);

// Noise-free ground truth on the nine operating variables (schema order,
// engineering units).
double plant_te(std::span<const double> operating);
double plant_thr(std::span<const double> operating);

// Friedman #1: ten U(0,1) features x1..x10 and
// y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise * N(0,1).
DataTable friedman1(std::size_t n, std::uint64_t seed, double noise = 1.0);

// Six operating features x1..x6 where x1 and x2 share a latent driver
// (correlation about 0.95) and TE / THR reward raising x1 while lowering x2.
FeatureSchema correlated_six_schema();
DataTable correlated_six(std::size_t n, std::uint64_t seed);

} // namespace hitlopt::synth
