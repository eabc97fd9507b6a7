#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace hitlopt::carbon {

inline constexpr int kSchemaVersion = 1;

struct FleetPlant {
    std::string name;
    std::string country;
    double capacity_mw = 0.0;
    double capacity_factor = 0.0;
    double efficiency = 0.0;      // eta_0 as a fraction
    double remaining_life = 0.0;  // years
    double emission_factor = 0.0; // kg CO2 per kWh generated at eta_0

    void validate() const;
    nlohmann::json to_json() const;
    static FleetPlant from_json(const nlohmann::json& j);
};

// Annual generation capacity * 8760 h * capacity factor, in kWh.
double annual_generation_kwh(const FleetPlant& p);

// Lifetime CO2 saved, in tonnes, when efficiency rises by delta_pp points:
// G * EF * (1 - eta_0 / eta_1) * remaining_life / 1000. Fuel burnt, and with
// it CO2, scales with 1 / eta at fixed output.
double lifetime_reduction(const FleetPlant& p, double delta_pp);

struct PlantReduction {
    std::string name;
    std::string country;
    std::int64_t kg;
};

struct CountryTotal {
    std::string country;
    std::int64_t kg;
    std::size_t plants;
};

// Amounts are held as whole kilograms so every subtotal adds up exactly.
struct CarbonReport {
    double delta_pp = 0.0;
    std::vector<PlantReduction> plants;
    std::vector<CountryTotal> countries; // descending total, then name
    std::int64_t total_kg = 0;
    nlohmann::json reference = nlohmann::json::object();

    static double tonnes(std::int64_t kg) { return static_cast<double>(kg) / 1000.0; }
    static double megatonnes(std::int64_t kg) { return static_cast<double>(kg) / 1e9; }
    nlohmann::json to_json() const;
    // country,plants,reduction_mt rows for bar charts.
    std::string country_csv() const;
};

struct Fleet {
    std::vector<FleetPlant> plants;
    // Reference figures shipped with the configuration; display only.
    nlohmann::json reference = nlohmann::json::object();

    static Fleet from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Fleet load_fleet(const std::string& path);

// Throws EmptyInputError for an empty fleet.
CarbonReport fleet_report(const Fleet& fleet, double delta_pp);

} // namespace hitlopt::carbon
