#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "edr/csv.hpp"
#include "edr/waveform_io.hpp"

using namespace edr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "edr_test_waveform" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

WaveformRecord random_record(std::mt19937_64& rng, std::int16_t lo, std::int16_t hi) {
    WaveformRecord r;
    r.name = "r" + std::to_string(rng() % 100000);
    r.patient_id = r.name;
    r.sample_rate = 120.0;
    r.start_time = from_epoch_ms(1'600'000'000'000 + static_cast<std::int64_t>(rng() % 1'000'000) * 1000);
    std::uniform_int_distribution<int> v(lo, hi);
    const std::size_t n = 1 + rng() % 500;
    for (int l = 0; l < 3; ++l) {
        Lead lead;
        lead.name = std::string("L") + char('A' + l);
        lead.gain = 200.0;
        lead.adu.resize(n);
        for (auto& a : lead.adu) a = static_cast<std::int16_t>(v(rng));
        if (n > 3) lead.adu[n / 2] = kMissingAdu;
        r.leads.push_back(lead);
    }
    return r;
}

}  // namespace

TEST_CASE("format 212 packs two 12-bit samples into three bytes") {
    RecordHeader h;
    h.record_name = "x";
    h.sample_rate = 100;
    h.n_samples = 1;
    h.signals = {SignalSpec{"x.dat", SampleFormat::Fmt212, 200, 0, "mV", 0, "A"},
                 SignalSpec{"x.dat", SampleFormat::Fmt212, 200, 0, "mV", 0, "B"}};
    const std::vector<std::uint8_t> bytes{0x23, 0xF1, 0xFF};
    const auto d = decode_samples(bytes, h);
    REQUIRE(d.length() == 1);
    CHECK(d.samples[0][0] == 0x123);
    CHECK(d.samples[1][0] == -1);
    CHECK(encode_samples(d, SampleFormat::Fmt212) == bytes);
}

TEST_CASE("format 212 sentinel decodes as missing") {
    RecordHeader h;
    h.record_name = "x";
    h.sample_rate = 100;
    h.signals = {SignalSpec{"x.dat", SampleFormat::Fmt212, 200, 0, "mV", 0, "A"}};
    // -2048 then 5
    const std::vector<std::uint8_t> bytes{0x00, 0x08, 0x05};
    const auto d = decode_samples(bytes, h);
    REQUIRE(d.length() == 2);
    CHECK(d.mask[0][0] == 1);
    CHECK(d.mask[0][1] == 0);
    CHECK(d.samples[0][1] == 5);
}

TEST_CASE("truncated and oversized payloads are rejected") {
    RecordHeader h;
    h.record_name = "x";
    h.sample_rate = 100;
    h.n_samples = 4;
    h.signals = {SignalSpec{"x.dat", SampleFormat::Fmt16, 200, 0, "mV", 0, "A"}};
    CHECK_THROWS_AS(decode_samples(std::vector<std::uint8_t>(6), h), DataError);
    CHECK_THROWS_AS(decode_samples(std::vector<std::uint8_t>(10), h), DataError);
    CHECK_NOTHROW(decode_samples(std::vector<std::uint8_t>(8), h));
}

TEST_CASE("header parsing") {
    const auto h = parse_header("rec01 2 250 1500 10:20:30 14/11/2023\n"
                                "# comment line\n"
                                "rec01.dat 212 200(10)/mV 12 0 7 0 0 II\n"
                                "rec01.dat 212 100/uV 12 0 0 0 0 V\n");
    CHECK(h.record_name == "rec01");
    CHECK(h.sample_rate == 250.0);
    CHECK(h.n_samples == 1500);
    REQUIRE(h.base_time.has_value());
    CHECK(format_iso(*h.base_time) == "2023-11-14T10:20:30.000Z");
    REQUIRE(h.n_signals() == 2);
    CHECK(h.signals[0].baseline == 10);
    CHECK(h.signals[0].lead_name == "II");
    // microvolt gains are rescaled to adu per mV
    CHECK(h.signals[1].units == "mV");
    CHECK(h.signals[1].gain == 100000.0);
    CHECK(parse_header(format_header(h)) == h);
}

TEST_CASE("malformed headers name the problem") {
    CHECK_THROWS_AS(parse_header(""), DataError);
    CHECK_THROWS_AS(parse_header("rec 2 250 10\nrec.dat 16 200/mV 16 0 0 0 0 I\n"), DataError);
    try {
        parse_header("rec 1 250 10\nrec.dat 99 200/mV 16 0 0 0 0 I\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("physical conversion") {
    const std::vector<double> mv{0.0, 1.0, -0.5, std::nan(""), 1e9};
    const Lead lead = Lead::from_physical("II", mv, 200.0, 5);
    CHECK(lead.adu[0] == 5);
    CHECK(lead.adu[1] == 205);
    CHECK(lead.adu[2] == -95);
    CHECK(lead.missing(3));
    CHECK(lead.adu[4] == 32767);
    CHECK(lead.millivolts(1) == doctest::Approx(1.0));
    CHECK(std::isnan(lead.millivolts(3)));
    CHECK(to_adu(0.0049, 200.0, 0) == 1);
}

TEST_CASE("wfdb write and read agree in both formats") {
    std::mt19937_64 rng(7);
    const auto dir = scratch_dir("wfdb");
    for (auto fmt : {SampleFormat::Fmt16, SampleFormat::Fmt212}) {
        const auto rec = fmt == SampleFormat::Fmt16 ? random_record(rng, -32767, 32767) : random_record(rng, -2047, 2047);
        const auto header = write_wfdb(rec, dir, fmt);
        CHECK(read_wfdb(header) == rec);
    }
}

TEST_CASE("native container round trip and version check") {
    std::mt19937_64 rng(8);
    const auto dir = scratch_dir("native");
    const auto rec = random_record(rng, -32767, 32767);
    write_native(rec, dir / "a.json");
    CHECK(read_native(dir / "a.json") == rec);

    std::ifstream in(dir / "a.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 12, "\"version\": 9");
    std::ofstream(dir / "a.json") << text;
    CHECK_THROWS_AS(read_native(dir / "a.json"), DataError);
}

TEST_CASE("external format 212 record decodes like the reference decoder") {
    const fs::path data = EDR_TEST_DATA;
    const auto rec = read_wfdb(data / "ext212.hea");
    const auto ref = read_csv(data / "ext212_ref.csv");
    REQUIRE(rec.leads.size() == 2);
    REQUIRE(rec.n_samples() == ref.rows.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ref.rows.size(); ++i)
        for (std::size_t l = 0; l < 2; ++l)
            mismatches += rec.leads[l].adu[i] != parse_cell_int(ref.rows[i][l], "adu");
    CHECK(mismatches == 0);
    CHECK(rec.leads[0].name == "II");
    CHECK(rec.sample_rate == 250.0);
}
