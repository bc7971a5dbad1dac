#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "edr/csv.hpp"
#include "edr/evalstats.hpp"

using namespace edr;
namespace fs = std::filesystem;

TEST_CASE("pairwise sum") {
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
    std::vector<double> v(1000, 0.1);
    CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
    // 1 + many tiny values, where naive left-to-right summation loses them
    std::vector<double> w(1 << 20, 1e-16);
    w[0] = 1.0;
    CHECK(pairwise_sum(w) > 1.0 + 1e-10);
}

TEST_CASE("mae and r2") {
    const std::vector<double> p{11, 19, 30}, l{10, 20, 30};
    CHECK(mae(p, l) == doctest::Approx(2.0 / 3));
    // SS_res 2, SS_tot 200
    CHECK(r2(p, l) == doctest::Approx(0.99));
    CHECK(r2(l, l) == 1.0);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(mae(p, std::vector<double>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(r2(p, std::vector<double>{5, 5, 5}), std::domain_error);
}

TEST_CASE("density histogram") {
    const std::vector<double> l{10.2, 10.7, 49.9, 5.0, 20.5}, p{10.9, 11.1, 55.0, 12.0, 20.5};
    const auto h = density_histogram(p, l);
    CHECK(h.bins == 40);
    CHECK(h.total == 5);
    CHECK(h.out_of_range == 2);
    CHECK(h.count(0, 0) == 1);
    CHECK(h.count(0, 1) == 1);
    // label 5 is clamped into bin 0
    CHECK(h.count(0, 2) == 1);
    CHECK(h.count(39, 39) == 1);
    CHECK(h.count(10, 10) == 1);
    CHECK(h.display(0, 1) == doctest::Approx(std::log10(2.0)));
    CHECK(h.bin_start(5) == 15.0);
}

TEST_CASE("rr histogram") {
    const auto h = rr_histogram(std::vector<double>{0.0, 0.99, 15.5, 99.9, 100.0, -0.1}, "ImP");
    CHECK(h.counts.size() == 100);
    CHECK(h.count(0) == 2);
    CHECK(h.count(15) == 1);
    CHECK(h.count(99) == 1);
    CHECK(h.out_of_range == 2);
    CHECK(h.count(-1) == 0);
}

TEST_CASE("evaluate splits metrics by label source") {
    std::vector<MinuteExample> ex(4);
    std::vector<double> preds{12, 18, 30, 30};
    const double labels[] = {10, 20, 30, 30};
    for (int i = 0; i < 4; ++i) {
        ex[i].label = labels[i];
        ex[i].source = i < 2 ? LabelSource::ImP : LabelSource::Capnography;
        ex[i].patient_id = "p";
    }
    const auto r = evaluate(ex, preds);
    CHECK(r.n_examples == 4);
    CHECK(r.mae_bpm == doctest::Approx(1.0));
    REQUIRE(r.per_source.size() == 2);
    for (const auto& s : r.per_source) {
        if (s.n == 2 && s.mae == 0.0) CHECK_FALSE(s.r2.has_value());
    }
    const auto j = r.to_json();
    CHECK(j.at("n_examples") == 4);

    const fs::path dir = fs::temp_directory_path() / "edr_test_eval";
    fs::remove_all(dir);
    write_eval_report(r, ex, preds, dir);
    CHECK(fs::exists(dir / "eval_report.json"));
    CHECK(read_csv(dir / "predictions.csv").rows.size() == 4);
    const auto dens = read_csv(dir / "density_histogram.csv");
    CHECK(dens.find_column("display").has_value());
}

TEST_CASE("rolling average needs half the window") {
    RrTimeline t;
    const Timestamp t0 = from_epoch_ms(0);
    for (int m = 0; m < 30; ++m)
        if (m < 10 || m >= 25) t.points.push_back({t0 + kMinute * m, static_cast<double>(m)});
    add_rolling_average(t, 15, 0.5);
    // minute 0 sees minutes 0..7: 8 of 15 values
    REQUIRE(t.points[0].rolling_bpm);
    CHECK(*t.points[0].rolling_bpm == doctest::Approx(3.5));
    // minute 9 sees 2..9 plus nothing after: 8 values
    CHECK(t.points[9].rolling_bpm.has_value());
    // minute 25 sees 25..29 only: 5 values
    CHECK_FALSE(t.points[10].rolling_bpm.has_value());
}

TEST_CASE("timeline csv round trip") {
    RrTimeline t;
    t.patient_id = "P9";
    const Timestamp t0 = from_epoch_ms(1'700'000'000'000);
    t.points.push_back({t0, 14.25, 15.0, std::nullopt});
    t.points.push_back({t0 + kMinute * 3, 16.5, std::nullopt, 15.5});
    const fs::path p = fs::temp_directory_path() / "edr_test_timeline.csv";
    write_timeline_csv(t, p);
    const auto back = read_timeline_csv(p, "P9");
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[1].minute == t.points[1].minute);
    CHECK(back.points[0].label_bpm == t.points[0].label_bpm);
    CHECK(back.points[1].rolling_bpm == t.points[1].rolling_bpm);
    CHECK_FALSE(back.points[1].label_bpm.has_value());

    std::swap(t.points[0], t.points[1]);
    write_timeline_csv(t, p);
    CHECK_THROWS_AS(read_timeline_csv(p, "P9"), DataError);
}

TEST_CASE("annotation prefers lead II and attaches labels") {
    const auto state = nn::build_model(nn::ModelSpec::desk(), 1);
    const Timestamp t0 = from_epoch_ms(0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<EcgMinute> minutes;
    for (const char* lead : {"V", "II"})
        for (int m = 0; m < 3; ++m) {
            if (std::string(lead) == "II" && m == 1) continue;
            EcgMinute e{"P", lead, t0 + kMinute * m, std::vector<double>(kMinuteSamples)};
            for (auto& v : e.samples) v = n(rng);
            minutes.push_back(e);
        }
    std::vector<RrSample> labels;
    for (int i = 0; i < 30; ++i) labels.push_back({t0 + seconds_ms(2.0 * i), 16.0});
    const auto tl = annotate_timeline(state, minutes, labels);
    REQUIRE(tl.points.size() == 3);
    REQUIRE(tl.points[0].label_bpm);
    CHECK(*tl.points[0].label_bpm == 16.0);
    CHECK_FALSE(tl.points[2].label_bpm.has_value());

    // minute 0 from II equals a direct prediction on that minute
    MinuteExample ex;
    ex.ecg.assign(minutes[3].samples.begin(), minutes[3].samples.end());
    CHECK(tl.points[0].pred_bpm == doctest::Approx(nn::predict(state, std::vector<MinuteExample>{ex})[0]).epsilon(1e-6));
}
