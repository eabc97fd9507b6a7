#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"

#include "hitlopt/data.hpp"
#include "hitlopt/error.hpp"

using namespace hitlopt;

namespace {

const char* kHeader = "CFR,TAF,MSP,MST,MSF,FWT,RHT,CV,Power,TE,THR\n";

std::string plant_csv(int rows)
{
    std::string s = kHeader;
    for (int r = 0; r < rows; ++r)
        s += std::to_string(200 + r) + ",2000,24,566,1800,280,566,5,600,41.5,8200\n";
    return s;
}

DataTable small_table(std::vector<double> a, std::vector<double> b)
{
    FeatureSchema schema({{"a", "", Role::operating, ""}, {"b", "", Role::operating, ""}});
    Matrix m(a.size(), 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        m(i, 0) = a[i];
        m(i, 1) = b[i];
    }
    return DataTable(schema, m);
}

} // namespace

TEST_CASE("plant schema has nine operating and two performance variables in fixed order")
{
    const auto s = FeatureSchema::plant();
    CHECK(s.operating_count() == 9);
    CHECK(s.performance_count() == 2);
    const std::vector<std::string> want{"CFR", "TAF", "MSP", "MST", "MSF", "FWT", "RHT", "CV", "Power", "TE", "THR"};
    CHECK(s.names() == want);
    CHECK(FeatureSchema::from_json(s.to_json()).names() == want);
}

TEST_CASE("schema rejects empty and duplicate names")
{
    CHECK_THROWS_AS(FeatureSchema({{"", "", Role::operating, ""}}), SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"a", "", Role::operating, ""}, {"a", "", Role::performance, ""}}), SchemaError);
    CHECK_THROWS_AS(role_from_string("input"), ValidationError);
}

TEST_CASE("ingest parses a valid CSV")
{
    std::istringstream in(plant_csv(3));
    const auto t = ingest_csv(in, FeatureSchema::plant());
    CHECK(t.rows() == 3);
    CHECK(t.values()(2, 0) == 202.0);
}

TEST_CASE("ingest reorders columns to schema order and ignores extras")
{
    std::istringstream in("THR,extra,TE,Power,CV,RHT,FWT,MSF,MST,MSP,TAF,CFR\n"
                          "8000,x,40,600,5,566,280,1800,566,24,2000,210\n"
                          "8100,y,41,610,5,566,281,1810,566,24,2010,211\n");
    const auto t = ingest_csv(in, FeatureSchema::plant());
    CHECK(t.values()(0, 0) == 210.0);
    CHECK(t.values()(1, 10) == 8100.0);
}

TEST_CASE("missing column raises a schema error naming it")
{
    std::istringstream in("CFR,TAF,MST,MSF,FWT,RHT,CV,Power,TE,THR\n1,2,3,4,5,6,7,8,9,10\n");
    try {
        ingest_csv(in, FeatureSchema::plant());
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.column() == "MSP");
    }
}

TEST_CASE("non-numeric cell raises a parse error with row and column")
{
    std::string s = plant_csv(1);
    s += "abc,2000,24,566,1800,280,566,5,600,41.5,8200\n";
    std::istringstream in(s);
    try {
        ingest_csv(in, FeatureSchema::plant());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == "CFR");
    }
}

TEST_CASE("missing cell and empty input")
{
    std::string s = plant_csv(1);
    s += "1,2000,,566,1800,280,566,5,600,41.5,8200\n";
    std::istringstream in(s);
    CHECK_THROWS_AS(ingest_csv(in, FeatureSchema::plant()), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(ingest_csv(empty, FeatureSchema::plant()), EmptyInputError);
    std::istringstream header_only(kHeader);
    CHECK_THROWS_AS(ingest_csv(header_only, FeatureSchema::plant()), EmptyInputError);
}

TEST_CASE("fit_scaler examples")
{
    const auto t = small_table({2, 4, 6}, {5, 5, 5});
    const std::vector<std::size_t> all{0, 1, 2};
    const auto sp = fit_scaler(t, all);
    CHECK(sp.min()[0] == 2.0);
    CHECK(sp.max()[0] == 6.0);
    CHECK(sp.min()[1] == 5.0);
    CHECK(sp.max()[1] == 5.0);
    CHECK(sp.degenerate(1));
    CHECK(sp.scale(1, 5.0) == 0.0);
    CHECK(sp.scale(1, 123.0) == 0.0);
    const std::vector<std::size_t> first_two{0, 1};
    CHECK(fit_scaler(t, first_two).max()[0] == 4.0);
    CHECK_THROWS_AS(fit_scaler(t, std::vector<std::size_t>{}), ValidationError);
}

TEST_CASE("scale and inverse examples, no clipping")
{
    const ScalingParams sp({"v"}, {2.0}, {6.0});
    CHECK(sp.scale(0, 2.0) == 0.0);
    CHECK(sp.scale(0, 6.0) == 1.0);
    CHECK(sp.scale(0, 4.0) == 0.5);
    CHECK(sp.inverse(0, 0.0) == 2.0);
    CHECK(sp.inverse(0, 1.0) == 6.0);
    CHECK(sp.inverse(0, 0.5) == 4.0);
    CHECK(sp.scale(0, 8.0) == 1.5);
    CHECK(sp.scale(0, 0.0) == -0.5);
}

TEST_CASE("scaling round-trips and is monotone")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int k = 0; k < 200; ++k) {
        double lo = u(rng), hi = u(rng);
        if (lo > hi)
            std::swap(lo, hi);
        if (lo == hi)
            continue;
        const ScalingParams sp({"v"}, {lo}, {hi});
        const double a = u(rng), b = u(rng);
        CHECK(std::abs(sp.inverse(0, sp.scale(0, a)) - a) <= 1e-10 * std::max(1.0, std::abs(a)));
        if (a < b)
            CHECK(sp.scale(0, a) < sp.scale(0, b));
        const double inside = lo + (hi - lo) * std::abs(std::sin(a));
        const double s = sp.scale(0, inside);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("scaler serialization and hash are stable")
{
    const ScalingParams sp({"a", "b"}, {1, 2}, {3, 4});
    const auto back = ScalingParams::from_json(sp.to_json());
    CHECK(back.names() == sp.names());
    CHECK(back.hash() == sp.hash());
    CHECK(ScalingParams({"a", "b"}, {1, 2}, {3, 5}).hash() != sp.hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("split examples")
{
    const auto s = split(10, 0.8, 0.0, 1);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    CHECK(s.calibration.empty());
    const auto a = split(100, 0.7, 0.1, 7), b = split(100, 0.7, 0.1, 7);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.calibration == b.calibration);
    CHECK(a.train.size() == 70);
    CHECK(a.calibration.size() == 10);
    CHECK(a.test.size() == 20);
    std::set<std::size_t> seen;
    for (const auto* part : {&a.train, &a.test, &a.calibration})
        for (auto i : *part) {
            CHECK(i < 100);
            CHECK(seen.insert(i).second);
        }
    CHECK(split(100, 0.7, 0.1, 8).train != a.train);
    const auto rt = DataSplits::from_json(a.to_json());
    CHECK(rt.train == a.train);
    CHECK(rt.seed == 7);
}

TEST_CASE("split errors")
{
    CHECK_THROWS_AS(split(2, 0.8, 0.1, 1), ValidationError);
    CHECK_THROWS_AS(split(10, 0.0, 0.1, 1), ValidationError);
    CHECK_THROWS_AS(split(10, 0.8, 0.2, 1), ValidationError);
}

TEST_CASE("table invariants")
{
    FeatureSchema schema({{"a", "", Role::operating, ""}});
    CHECK_THROWS_AS(DataTable(schema, Matrix(1, 1, 1.0)), ValidationError);
    Matrix bad(2, 1, 1.0);
    bad(1, 0) = std::nan("");
    CHECK_THROWS_AS(DataTable(schema, bad), ParseError);
    const auto t = small_table({1, 2}, {3, 4});
    std::ostringstream out;
    t.write_csv(out);
    std::istringstream in(out.str());
    const auto back = ingest_csv(in, t.schema());
    CHECK(back.values().data() == t.values().data());
}
