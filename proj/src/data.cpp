#include "hitlopt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "hitlopt/error.hpp"
#include "hitlopt/kernels.hpp"

namespace hitlopt {

std::string_view to_string(Role r) noexcept
{
    return r == Role::operating ? "operating" : "performance";
}

Role role_from_string(std::string_view s)
{
    if (s == "operating")
        return Role::operating;
    if (s == "performance")
        return Role::performance;
    throw ValidationError("unknown variable role: " + std::string(s));
}

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(std::vector<VariableDef> variables) : variables_(std::move(variables))
{
    std::set<std::string> seen;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        if (v.name.empty())
            throw SchemaError("variable name must be nonempty", "");
        if (!seen.insert(v.name).second)
            throw SchemaError("duplicate variable name: " + v.name, v.name);
        (v.role == Role::operating ? operating_ : performance_).push_back(i);
    }
}

FeatureSchema FeatureSchema::plant()
{
    return FeatureSchema({
        {"CFR", "t/h", Role::operating, "Coal flow rate"},
        {"TAF", "t/h", Role::operating, "Total air flow"},
        {"MSP", "MPa", Role::operating, "Main steam pressure"},
        {"MST", "°C", Role::operating, "Main steam temperature"},
        {"MSF", "t/h", Role::operating, "Main steam flow"},
        {"FWT", "°C", Role::operating, "Feed water temperature"},
        {"RHT", "°C", Role::operating, "Reheat steam temperature"},
        {"CV", "kPa", Role::operating, "Condenser vacuum"},
        {"Power", "MW", Role::operating, "Generated power"},
        {"TE", "%", Role::performance, "Thermal efficiency"},
        {"THR", "kJ/kWh", Role::performance, "Turbine heat rate"},
    });
}

std::vector<std::string> FeatureSchema::names() const
{
    std::vector<std::string> out;
    out.reserve(variables_.size());
    for (const auto& v : variables_)
        out.push_back(v.name);
    return out;
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const
{
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].name == name)
            return i;
    return std::nullopt;
}

std::size_t FeatureSchema::index_of(std::string_view name) const
{
    if (auto i = find(name))
        return *i;
    throw SchemaError("unknown variable: " + std::string(name), std::string(name));
}

nlohmann::json FeatureSchema::to_json() const
{
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : variables_)
        vars.push_back({{"name", v.name},
                        {"unit", v.unit},
                        {"role", to_string(v.role)},
                        {"display_name", v.display_name}});
    return {{"variables", vars}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j)
{
    std::vector<VariableDef> vars;
    for (const auto& v : j.at("variables"))
        vars.push_back({v.at("name").get<std::string>(), v.value("unit", ""),
                        role_from_string(v.at("role").get<std::string>()),
                        v.value("display_name", "")});
    return FeatureSchema(std::move(vars));
}

// ---------------------------------------------------------------------------
// DataTable

DataTable::DataTable(FeatureSchema schema, Matrix values, std::string provenance)
    : schema_(std::move(schema)), values_(std::move(values)), provenance_(std::move(provenance))
{
    if (values_.rows() == 0)
        throw EmptyInputError("data table has no rows");
    if (values_.cols() != schema_.size())
        throw SchemaError("data table width does not match schema", "");
    if (values_.rows() < 2)
        throw ValidationError("data table needs at least 2 rows");
    for (std::size_t r = 0; r < values_.rows(); ++r)
        for (std::size_t c = 0; c < values_.cols(); ++c)
            if (!std::isfinite(values_(r, c)))
                throw ParseError("non-finite value", r + 1, schema_.variables()[c].name);
}

Matrix DataTable::select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const
{
    Matrix out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(i, j) = values_(rows[i], cols[j]);
    return out;
}

void DataTable::write_csv(std::ostream& os) const
{
    const auto names = schema_.names();
    for (std::size_t c = 0; c < names.size(); ++c)
        os << (c ? "," : "") << names[c];
    os << '\n';
    char buf[64];
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c = 0; c < cols(); ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, values_(r, c));
            os << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        os << '\n';
    }
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

bool blank(std::string_view line)
{
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

} // namespace

DataTable ingest_csv(std::istream& source, const FeatureSchema& schema, std::string provenance)
{
    std::string line;
    bool have_header = false;
    while (std::getline(source, line)) {
        if (!blank(line)) {
            have_header = true;
            break;
        }
    }
    if (!have_header)
        throw EmptyInputError("CSV input is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);

    const auto header = split_fields(line);
    std::vector<std::size_t> source_col(schema.size());
    for (std::size_t v = 0; v < schema.size(); ++v) {
        const auto& name = schema.variables()[v].name;
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("missing column: " + name, name);
        source_col[v] = static_cast<std::size_t>(it - header.begin());
    }

    Matrix values(0, schema.size());
    std::vector<double> row(schema.size());
    std::size_t row_no = 0;
    while (std::getline(source, line)) {
        if (blank(line))
            continue;
        ++row_no;
        const auto fields = split_fields(line);
        for (std::size_t v = 0; v < schema.size(); ++v) {
            const auto& name = schema.variables()[v].name;
            if (source_col[v] >= fields.size() || fields[source_col[v]].empty())
                throw ParseError("missing value at row " + std::to_string(row_no) + ", column " + name,
                                 row_no, name);
            const auto f = fields[source_col[v]];
            double x = 0.0;
            auto res = std::from_chars(f.data(), f.data() + f.size(), x);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(x))
                throw ParseError("non-numeric value '" + std::string(f) + "' at row " +
                                     std::to_string(row_no) + ", column " + name,
                                 row_no, name);
            row[v] = x;
        }
        values.append_row(row);
    }
    if (values.rows() == 0)
        throw EmptyInputError("CSV input has a header but no data rows");
    return DataTable(schema, std::move(values), std::move(provenance));
}

DataTable ingest_csv_file(const std::string& path, const FeatureSchema& schema)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open dataset: " + path);
    return ingest_csv(in, schema, path);
}

// ---------------------------------------------------------------------------
// ScalingParams

ScalingParams::ScalingParams(std::vector<std::string> names, std::vector<double> min,
                             std::vector<double> max)
    : names_(std::move(names)), min_(std::move(min)), max_(std::move(max))
{
    if (min_.size() != max_.size() || names_.size() != min_.size())
        throw ValidationError("scaling parameter lengths differ");
    for (std::size_t i = 0; i < min_.size(); ++i)
        if (!(min_[i] <= max_[i]))
            throw ValidationError("scaling min exceeds max for " + names_[i]);
}

double ScalingParams::scale(std::size_t var, double x) const
{
    if (degenerate(var))
        return 0.0;
    return (x - min_[var]) / (max_[var] - min_[var]);
}

double ScalingParams::inverse(std::size_t var, double scaled) const
{
    return min_[var] + scaled * (max_[var] - min_[var]);
}

std::vector<double> ScalingParams::scale_row(std::span<const double> row) const
{
    if (row.size() != size())
        throw ValidationError("row width does not match scaling parameters");
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i)
        out[i] = scale(i, row[i]);
    return out;
}

std::vector<double> ScalingParams::inverse_row(std::span<const double> row) const
{
    if (row.size() != size())
        throw ValidationError("row width does not match scaling parameters");
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i)
        out[i] = inverse(i, row[i]);
    return out;
}

Matrix ScalingParams::scale(const Matrix& m) const
{
    if (m.cols() != size())
        throw ValidationError("matrix width does not match scaling parameters");
    Matrix out(m.rows(), m.cols());
    std::vector<double> col(m.rows());
    std::vector<double> scaled(m.rows());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        for (std::size_t r = 0; r < m.rows(); ++r)
            col[r] = m(r, c);
        if (degenerate(c))
            std::fill(scaled.begin(), scaled.end(), 0.0);
        else
            kernels::affine(col, min_[c], 1.0 / (max_[c] - min_[c]), scaled);
        for (std::size_t r = 0; r < m.rows(); ++r)
            out(r, c) = scaled[r];
    }
    return out;
}

Matrix ScalingParams::inverse(const Matrix& m) const
{
    if (m.cols() != size())
        throw ValidationError("matrix width does not match scaling parameters");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out(r, c) = inverse(c, m(r, c));
    return out;
}

ScalingParams ScalingParams::subset(std::span<const std::size_t> vars) const
{
    std::vector<std::string> n;
    std::vector<double> lo, hi;
    for (auto v : vars) {
        n.push_back(names_.at(v));
        lo.push_back(min_.at(v));
        hi.push_back(max_.at(v));
    }
    return ScalingParams(std::move(n), std::move(lo), std::move(hi));
}

nlohmann::json ScalingParams::to_json() const
{
    return {{"names", names_}, {"min", min_}, {"max", max_}};
}

ScalingParams ScalingParams::from_json(const nlohmann::json& j)
{
    return ScalingParams(j.at("names").get<std::vector<std::string>>(),
                         j.at("min").get<std::vector<double>>(),
                         j.at("max").get<std::vector<double>>());
}

std::string ScalingParams::hash() const { return fnv1a_hex(to_json().dump()); }

ScalingParams fit_scaler(const DataTable& table, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw ValidationError("cannot fit scaler on an empty index set");
    std::vector<double> lo(table.cols()), hi(table.cols());
    std::vector<double> col(indices.size());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        for (std::size_t i = 0; i < indices.size(); ++i)
            col[i] = table.values()(indices[i], c);
        const auto mm = kernels::minmax(col);
        lo[c] = mm.min;
        hi[c] = mm.max;
    }
    return ScalingParams(table.schema().names(), std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------------------
// Splits

nlohmann::json DataSplits::to_json() const
{
    return {{"schema_version", 1},
            {"seed", seed},
            {"train", train},
            {"test", test},
            {"calibration", calibration}};
}

DataSplits DataSplits::from_json(const nlohmann::json& j)
{
    DataSplits s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::size_t>>();
    s.test = j.at("test").get<std::vector<std::size_t>>();
    s.calibration = j.value("calibration", std::vector<std::size_t>{});
    return s;
}

DataSplits split(std::size_t n_rows, double train_fraction, double calibration_fraction,
                 std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("train fraction must lie in (0,1)");
    if (!(calibration_fraction >= 0.0 && calibration_fraction < 1.0))
        throw ValidationError("calibration fraction must lie in [0,1)");
    if (!(train_fraction + calibration_fraction < 1.0))
        throw ValidationError("train and calibration fractions leave no test rows");

    const auto n = static_cast<double>(n_rows);
    // The epsilon keeps products such as 0.7 * 100 from flooring to 69.
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * n + 1e-9));
    const auto n_cal = static_cast<std::size_t>(std::floor(calibration_fraction * n + 1e-9));
    if (n_train < 1 || n_train + n_cal >= n_rows || (calibration_fraction > 0.0 && n_cal < 1))
        throw ValidationError("too few rows (" + std::to_string(n_rows) +
                              ") to give every partition at least one row");

    std::vector<std::size_t> order(n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    DataSplits s;
    s.seed = seed;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.calibration.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                         order.begin() + static_cast<std::ptrdiff_t>(n_train + n_cal));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_cal), order.end());
    return s;
}

std::string fnv1a_hex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

} // namespace hitlopt
