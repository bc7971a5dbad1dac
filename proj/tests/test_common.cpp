#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"

#include "edr/common.hpp"
#include "edr/csv.hpp"

using namespace edr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "edr_test_common";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("iso timestamps round trip at millisecond precision") {
    const Timestamp t = from_epoch_ms(1'700'000'123'456);
    CHECK(format_iso(t) == "2023-11-14T22:15:23.456Z");
    CHECK(parse_iso(format_iso(t)) == t);
    CHECK(parse_iso("2023-11-14 22:15:23") == from_epoch_ms(1'700'000'123'000));
    CHECK(parse_iso("2023-11-14T22:15:23.4Z") == from_epoch_ms(1'700'000'123'400));
    CHECK(format_iso(from_epoch_ms(0)) == "1970-01-01T00:00:00.000Z");

    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto ms = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
        CHECK(parse_iso(format_iso(from_epoch_ms(ms))) == from_epoch_ms(ms));
    }
}

TEST_CASE("malformed timestamps are data errors") {
    CHECK_THROWS_AS(parse_iso("2023-11-14"), DataError);
    CHECK_THROWS_AS(parse_iso("2023-02-30T00:00:00"), DataError);
    CHECK_THROWS_AS(parse_iso("2023-11-14T25:00:00"), DataError);
    CHECK_THROWS_AS(parse_iso("2023-11-14T10:00:00+01"), DataError);
    CHECK_THROWS_AS(parse_iso("2023-11-14T10:00:00."), DataError);
}

TEST_CASE("stable_hash is 64-bit FNV-1a") {
    CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
    CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(stable_hash("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("mix64 matches the splitmix64 reference stream") {
    // splitmix64 with state 0: first output
    CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
    CHECK(mix64(1) != mix64(2));
}

TEST_CASE("trim") {
    CHECK(trim("  a b \t\r\n") == "a b");
    CHECK(trim("") == "");
    CHECK(trim("   ") == "");
}

TEST_CASE("format_double is the shortest round-trip form") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e-5) == "1e-05");
    CHECK(format_double(20.0) == "20");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(rng) / std::pow(10.0, i % 12);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("csv writer and reader agree") {
    const auto path = scratch("t.csv");
    {
        CsvWriter w(path, {"name", "value", "maybe"});
        w.field(std::string("a")).field(1.5).field(std::optional<double>{}).end_row();
        w.field(std::string("b")).field(-2.25).field(std::optional<double>{3.0}).end_row();
    }
    const auto t = read_csv(path);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.column("value") == 1);
    CHECK_FALSE(t.find_column("nope").has_value());
    CHECK_THROWS_AS(t.column("nope"), DataError);
    CHECK(t.rows[0][2].empty());
    CHECK(parse_cell_double(t.rows[1][1], "value") == -2.25);
    CHECK(parse_cell_double(t.rows[1][2], "maybe") == 3.0);
    CHECK_THROWS_AS(parse_cell_double("1.5x", "value"), DataError);
    CHECK(parse_cell_int("42", "n") == 42);
    CHECK_THROWS_AS(parse_cell_int("4.2", "n"), DataError);
}

TEST_CASE("csv rows must match the header width") {
    const auto path = scratch("ragged.csv");
    std::ofstream(path) << "a,b\n1,2\n3\n";
    CHECK_THROWS_AS(read_csv(path), DataError);
    CHECK_THROWS_AS(read_csv(scratch("missing.csv")), DataError);
}

TEST_CASE("prerequisite errors name the producing command") {
    const PrerequisiteError e("run/checkpoint/model.json", "train");
    CHECK(std::string(e.what()).find("`train`") != std::string::npos);
    CHECK(e.producer() == "train");
}
