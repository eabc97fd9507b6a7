#include "hitlopt/carbon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hitlopt/error.hpp"

namespace hitlopt::carbon {

void FleetPlant::validate() const
{
    const std::string who = "plant '" + name + "': ";
    if (!(capacity_mw > 0.0))
        throw ValidationError(who + "capacity must be positive");
    if (!(efficiency > 0.0 && efficiency < 1.0))
        throw ValidationError(who + "efficiency must lie in (0, 1)");
    if (!(capacity_factor > 0.0 && capacity_factor <= 1.0))
        throw ValidationError(who + "capacity factor must lie in (0, 1]");
    if (!(remaining_life >= 0.0))
        throw ValidationError(who + "remaining life must be non-negative");
    if (!(emission_factor > 0.0))
        throw ValidationError(who + "emission factor must be positive");
}

nlohmann::json FleetPlant::to_json() const
{
    return {{"name", name},
            {"country", country},
            {"capacity_mw", capacity_mw},
            {"capacity_factor", capacity_factor},
            {"efficiency", efficiency},
            {"remaining_life", remaining_life},
            {"emission_factor", emission_factor}};
}

FleetPlant FleetPlant::from_json(const nlohmann::json& j)
{
    try {
        FleetPlant p;
        p.name = j.at("name").get<std::string>();
        p.country = j.at("country").get<std::string>();
        p.capacity_mw = j.at("capacity_mw").get<double>();
        p.capacity_factor = j.at("capacity_factor").get<double>();
        p.efficiency = j.at("efficiency").get<double>();
        p.remaining_life = j.at("remaining_life").get<double>();
        p.emission_factor = j.at("emission_factor").get<double>();
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("fleet plant record: ") + e.what());
    }
}

double annual_generation_kwh(const FleetPlant& p) { return p.capacity_mw * 1000.0 * 8760.0 * p.capacity_factor; }

double lifetime_reduction(const FleetPlant& p, double delta_pp)
{
    p.validate();
    if (!(delta_pp >= 0.0))
        throw ValidationError("efficiency gain must be non-negative");
    const double eta1 = p.efficiency + delta_pp / 100.0;
    if (!(eta1 < 1.0))
        throw ValidationError("improved efficiency must stay below 1");
    const double baseline_kg = annual_generation_kwh(p) * p.emission_factor;
    return baseline_kg * (1.0 - p.efficiency / eta1) * p.remaining_life / 1000.0;
}

nlohmann::json CarbonReport::to_json() const
{
    nlohmann::json plants_j = nlohmann::json::array();
    for (const auto& p : plants)
        plants_j.push_back({{"name", p.name}, {"country", p.country}, {"reduction_kg", p.kg}, {"reduction_t", tonnes(p.kg)}});
    nlohmann::json countries_j = nlohmann::json::array();
    nlohmann::json bars = nlohmann::json::array();
    for (const auto& c : countries) {
        countries_j.push_back(
            {{"country", c.country}, {"plants", c.plants}, {"reduction_kg", c.kg}, {"reduction_mt", megatonnes(c.kg)}});
        bars.push_back({{"label", c.country}, {"value", megatonnes(c.kg)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "carbon_report"},
            {"delta_pp", delta_pp},
            {"plants", plants_j},
            {"countries", countries_j},
            {"total_kg", total_kg},
            {"total_mt", megatonnes(total_kg)},
            {"bar_chart", bars},
            {"reference", reference}};
}

std::string CarbonReport::country_csv() const
{
    std::ostringstream os;
    os.precision(12);
    os << "country,plants,reduction_mt\n";
    for (const auto& c : countries)
        os << c.country << ',' << c.plants << ',' << megatonnes(c.kg) << '\n';
    return os.str();
}

Fleet Fleet::from_json(const nlohmann::json& j)
{
    Fleet f;
    if (!j.contains("plants") || !j["plants"].is_array())
        throw ValidationError("fleet configuration needs a 'plants' array");
    for (const auto& p : j["plants"])
        f.plants.push_back(FleetPlant::from_json(p));
    if (j.contains("reference"))
        f.reference = j["reference"];
    return f;
}

nlohmann::json Fleet::to_json() const
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : plants)
        arr.push_back(p.to_json());
    return {{"schema_version", kSchemaVersion}, {"plants", arr}, {"reference", reference}};
}

Fleet load_fleet(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open fleet file: " + path);
    try {
        return Fleet::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("fleet file " + path + ": " + e.what());
    }
}

CarbonReport fleet_report(const Fleet& fleet, double delta_pp)
{
    if (fleet.plants.empty())
        throw EmptyInputError("fleet is empty");
    CarbonReport r;
    r.delta_pp = delta_pp;
    r.reference = fleet.reference;
    for (const auto& p : fleet.plants) {
        const auto kg = static_cast<std::int64_t>(std::llround(lifetime_reduction(p, delta_pp) * 1000.0));
        r.plants.push_back({p.name, p.country, kg});
        r.total_kg += kg;
        auto it = std::find_if(r.countries.begin(), r.countries.end(),
                               [&](const CountryTotal& c) { return c.country == p.country; });
        if (it == r.countries.end())
            r.countries.push_back({p.country, kg, 1});
        else {
            it->kg += kg;
            ++it->plants;
        }
    }
    std::sort(r.countries.begin(), r.countries.end(), [](const CountryTotal& a, const CountryTotal& b) {
        return a.kg != b.kg ? a.kg > b.kg : a.country < b.country;
    });
    return r;
}

} // namespace hitlopt::carbon
