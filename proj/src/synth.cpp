#include "hitlopt/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace hitlopt::synth {

namespace {

enum PlantVar { CFR, TAF, MSP, MST, MSF, FWT, RHT, CV, POWER };

} // namespace

double plant_te(std::span<const double> x)
{
    const double msp = x[MSP] - 14.0;
    return 38.0 + 0.16 * msp - 0.004 * (x[MSP] - 22.0) * (x[MSP] - 22.0) + 0.002 * (x[POWER] - 330.0) +
           0.01 * (x[FWT] - 250.0) + 0.03 * (x[MST] - 560.0) + 0.02 * (x[RHT] - 555.0) - 0.2 * (x[CV] - 4.0) -
           0.0015 * (x[CFR] - (120.0 + 140.0 * (x[POWER] - 330.0) / 330.0));
}

double plant_thr(std::span<const double> x)
{
    // Turbine heat rate tracks the inverse of cycle efficiency.
    return 316800.0 / plant_te(x) - 1.5 * (x[RHT] - 555.0) + 15.0 * (x[CV] - 4.0);
}

DataTable plant_dataset(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const FeatureSchema schema = FeatureSchema::plant();
    Matrix m(n, schema.size());
    for (std::size_t r = 0; r < n; ++r) {
        const double load = 0.45 + 0.55 * u(rng);
        double x[9];
        x[POWER] = 330.0 + 330.0 * load + 5.0 * z(rng);
        x[CFR] = 120.0 + 140.0 * load + 4.0 * z(rng);
        x[TAF] = 1300.0 + 1000.0 * load + 30.0 * z(rng);
        x[MSP] = 14.0 + 11.0 * load + 0.4 * z(rng);
        x[MSF] = 1000.0 + 1000.0 * load + 25.0 * z(rng);
        x[FWT] = 250.0 + 40.0 * load + 2.0 * z(rng);
        x[MST] = 560.0 + 11.0 * u(rng);
        x[RHT] = 555.0 + 14.0 * u(rng);
        x[CV] = 4.0 + 3.0 * u(rng);
        for (int k = 0; k < 9; ++k)
            m(r, k) = x[k];
        const double te = plant_te(x) + 0.08 * z(rng);
        m(r, 9) = te;
        m(r, 10) = 316800.0 / te - 1.5 * (x[RHT] - 555.0) + 15.0 * (x[CV] - 4.0) + 8.0 * z(rng);
    }
    return DataTable(schema, std::move(m), "synthetic plant seed=" + std::to_string(seed));
}

DataTable friedman1(std::size_t n, std::uint64_t seed, double noise)
{
    std::vector<VariableDef> vars;
    for (int i = 1; i <= 10; ++i)
        vars.push_back({"x" + std::to_string(i), "", Role::operating, "x" + std::to_string(i)});
    vars.push_back({"y", "", Role::performance, "y"});
    FeatureSchema schema(std::move(vars));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(n, 11);
    for (std::size_t r = 0; r < n; ++r) {
        for (int k = 0; k < 10; ++k)
            m(r, k) = u(rng);
        m(r, 10) = 10.0 * std::sin(std::numbers::pi * m(r, 0) * m(r, 1)) + 20.0 * (m(r, 2) - 0.5) * (m(r, 2) - 0.5) +
                   10.0 * m(r, 3) + 5.0 * m(r, 4) + noise * z(rng);
    }
    return DataTable(schema, std::move(m), "friedman1 seed=" + std::to_string(seed));
}

FeatureSchema correlated_six_schema()
{
    std::vector<VariableDef> vars;
    for (int i = 1; i <= 6; ++i)
        vars.push_back({"x" + std::to_string(i), "", Role::operating, "x" + std::to_string(i)});
    vars.push_back({"TE", "%", Role::performance, "Thermal efficiency"});
    vars.push_back({"THR", "kJ/kWh", Role::performance, "Turbine heat rate"});
    return FeatureSchema(std::move(vars));
}

DataTable correlated_six(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(n, 8);
    for (std::size_t r = 0; r < n; ++r) {
        const double latent = u(rng);
        double x[6];
        x[0] = latent + 0.066 * z(rng);
        x[1] = latent + 0.066 * z(rng);
        for (int k = 2; k < 6; ++k)
            x[k] = u(rng);
        for (int k = 0; k < 6; ++k)
            m(r, k) = x[k];
        m(r, 6) = 40.0 + 1.5 * (x[0] - x[1]) + 0.8 * x[2] - 0.5 * (x[3] - 0.5) * (x[3] - 0.5) + 0.3 * x[4] +
                  0.05 * z(rng);
        m(r, 7) = 8000.0 - 150.0 * (x[0] - x[1]) - 60.0 * x[2] + 40.0 * x[5] + 5.0 * z(rng);
    }
    return DataTable(correlated_six_schema(), std::move(m), "correlated six seed=" + std::to_string(seed));
}

} // namespace hitlopt::synth
