#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hitlopt/matrix.hpp"

namespace hitlopt {

enum class Role { operating, performance };

std::string_view to_string(Role r) noexcept;
Role role_from_string(std::string_view s);

struct VariableDef {
    std::string name;
    std::string unit;
    Role role = Role::operating;
    std::string display_name;
};

// Ordered set of variables. The order is the column order of every DataTable
// built against the schema and the order of the tolerance constraint chain.
class FeatureSchema {
public:
    explicit FeatureSchema(std::vector<VariableDef> variables);

    // Nine operating variables (CFR, TAF, MSP, MST, MSF, FWT, RHT, CV, Power)
    // followed by the two performance variables TE and THR.
    static FeatureSchema plant();

    const std::vector<VariableDef>& variables() const noexcept { return variables_; }
    std::size_t size() const noexcept { return variables_.size(); }
    std::size_t operating_count() const noexcept { return operating_.size(); }
    std::size_t performance_count() const noexcept { return performance_.size(); }
    const std::vector<std::size_t>& operating_indices() const noexcept { return operating_; }
    const std::vector<std::size_t>& performance_indices() const noexcept { return performance_; }
    std::vector<std::string> names() const;

    std::optional<std::size_t> find(std::string_view name) const;
    // Throws SchemaError naming the variable when absent.
    std::size_t index_of(std::string_view name) const;

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);

private:
    std::vector<VariableDef> variables_;
    std::vector<std::size_t> operating_;
    std::vector<std::size_t> performance_;
};

// Immutable table of finite observations in schema column order.
class DataTable {
public:
    DataTable(FeatureSchema schema, Matrix values, std::string provenance = {});

    const FeatureSchema& schema() const noexcept { return schema_; }
    const Matrix& values() const noexcept { return values_; }
    std::size_t rows() const noexcept { return values_.rows(); }
    std::size_t cols() const noexcept { return values_.cols(); }
    const std::string& provenance() const noexcept { return provenance_; }

    std::span<const double> row(std::size_t r) const { return values_.row(r); }
    std::vector<double> column(std::size_t c) const { return values_.column(c); }
    std::vector<double> column(std::string_view name) const { return values_.column(schema_.index_of(name)); }

    // Columns `cols` of rows `rows` as a new matrix.
    Matrix select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;

    void write_csv(std::ostream& os) const;

private:
    FeatureSchema schema_;
    Matrix values_;
    std::string provenance_;
};

// Parses comma-delimited text with a header row. Columns may appear in any
// order; extra columns are ignored. Throws SchemaError, ParseError or
// EmptyInputError.
DataTable ingest_csv(std::istream& source, const FeatureSchema& schema, std::string provenance = {});
DataTable ingest_csv_file(const std::string& path, const FeatureSchema& schema);

// Per-variable min/max scaling, (x - min) / (max - min). A constant column
// (max == min) scales every value to 0.
class ScalingParams {
public:
    ScalingParams() = default;
    ScalingParams(std::vector<std::string> names, std::vector<double> min, std::vector<double> max);

    std::size_t size() const noexcept { return min_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<double>& min() const noexcept { return min_; }
    const std::vector<double>& max() const noexcept { return max_; }
    bool degenerate(std::size_t var) const { return !(max_[var] > min_[var]); }

    double scale(std::size_t var, double x) const;
    double inverse(std::size_t var, double scaled) const;

    std::vector<double> scale_row(std::span<const double> row) const;
    std::vector<double> inverse_row(std::span<const double> row) const;
    Matrix scale(const Matrix& m) const;
    Matrix inverse(const Matrix& m) const;

    // Restriction to a subset of variables, in the given order.
    ScalingParams subset(std::span<const std::size_t> vars) const;

    nlohmann::json to_json() const;
    static ScalingParams from_json(const nlohmann::json& j);
    // Stable content hash of the parameters (hex FNV-1a of the JSON form).
    std::string hash() const;

private:
    std::vector<std::string> names_;
    std::vector<double> min_;
    std::vector<double> max_;
};

ScalingParams fit_scaler(const DataTable& table, std::span<const std::size_t> indices);

struct DataSplits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> calibration;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static DataSplits from_json(const nlohmann::json& j);
};

// Shuffles 0..n_rows-1 with `seed` and cuts floor(train_fraction*n) training
// rows, floor(calibration_fraction*n) calibration rows and the remainder as
// test rows.
DataSplits split(std::size_t n_rows, double train_fraction, double calibration_fraction,
                 std::uint64_t seed);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace hitlopt
