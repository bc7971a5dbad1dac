#include <cmath>
#include <complex>
#include <filesystem>

#include "doctest.h"

#include "edr/curation.hpp"
#include "edr/synthgen.hpp"

using namespace edr;

namespace {

struct Peak {
    double t;
    double amp;
};

// Local maxima of lead II above half the largest sample.
std::vector<Peak> r_peaks(const WaveformRecord& rec) {
    const auto x = rec.leads[1].physical();
    double top = 0;
    for (double v : x) top = std::max(top, v);
    std::vector<Peak> out;
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        if (x[i] > 0.5 * top && x[i] >= x[i - 1] && x[i] > x[i + 1]) out.push_back({static_cast<double>(i) / rec.sample_rate, x[i]});
    return out;
}

// Frequency (Hz) with the largest non-uniform DFT power of the mean-removed
// peak amplitudes, scanned over [0.1, 0.9] Hz.
double envelope_peak_hz(const std::vector<Peak>& peaks) {
    double mean = 0;
    for (const auto& p : peaks) mean += p.amp;
    mean /= static_cast<double>(peaks.size());
    double best_f = 0, best_p = -1;
    for (double f = 0.1; f <= 0.9; f += 0.0005) {
        std::complex<double> acc = 0;
        for (const auto& p : peaks) acc += (p.amp - mean) * std::polar(1.0, -2 * M_PI * f * p.t);
        if (std::norm(acc) > best_p) {
            best_p = std::norm(acc);
            best_f = f;
        }
    }
    return best_f;
}

}  // namespace

TEST_CASE("amplitude envelope peaks at the respiration frequency") {
    SynthParams p;
    p.resp_rate = 15;
    p.am_depth = 0.2;
    p.noise_std_mv = 0;
    p.seed = 4;
    const auto rec = synth_ecg(p, 120.0).record;
    CHECK(envelope_peak_hz(r_peaks(rec)) == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("respiration rate is identifiable from the envelope") {
    for (double rr : {10.0, 13.5, 18.0, 24.0, 30.0}) {
        SynthParams p;
        p.resp_rate = rr;
        p.am_depth = 0.1;
        p.noise_std_mv = 0.05;
        p.seed = static_cast<std::uint64_t>(rr * 10);
        const auto rec = synth_ecg(p, 120.0).record;
        CHECK(std::fabs(60.0 * envelope_peak_hz(r_peaks(rec)) - rr) < 0.5);
    }
}

TEST_CASE("no modulation gives equal R amplitudes") {
    SynthParams p;
    p.am_depth = 0;
    p.rsa_depth = 0;
    p.baseline_wander_mv = 0;
    p.noise_std_mv = 0;
    const auto out = synth_ecg(p, 60.0);
    for (const auto& b : out.beats) CHECK(std::fabs(b.qrs_scale - 1.0) < 1e-9);
}

TEST_CASE("generation is deterministic in the seed") {
    SynthParams p;
    p.seed = 99;
    CHECK(synth_ecg(p, 90.0).record == synth_ecg(p, 90.0).record);
    SynthParams q = p;
    q.seed = 100;
    CHECK_FALSE(synth_ecg(q, 90.0).record == synth_ecg(p, 90.0).record);
}

TEST_CASE("truth stream follows the programmed minute rates") {
    SynthParams p;
    p.minute_rates = {12.0, 25.0, 17.5};
    const auto out = synth_ecg(p, 180.0);
    REQUIRE(out.rr_truth.size() == 90);
    for (std::size_t k = 0; k < out.rr_truth.size(); ++k) CHECK(out.rr_truth[k].bpm == p.minute_rates[k / 30]);
    CHECK(out.record.leads.size() == 4);
    CHECK(out.record.n_samples() == 180 * 120);
}

TEST_CASE("invalid parameters") {
    SynthParams p;
    p.resp_rate = 0;
    CHECK_THROWS_AS(synth_ecg(p, 60.0), UsageError);
    p.resp_rate = 15;
    CHECK_THROWS_AS(synth_ecg(p, 30.0), UsageError);
    p.am_depth = 0.6;
    CHECK_THROWS_AS(synth_ecg(p, 60.0), UsageError);
}

TEST_CASE("schedules") {
    const auto ramp = Schedule::ramp(0.2, 10);
    CHECK(ramp.rate(15, 0) == doctest::Approx(1.2 * ramp.rate(15, 12)));
    CHECK(ramp.rate(15, 5) == doctest::Approx(16.5));
    const auto step = Schedule::step(0.3, 4);
    CHECK(step.rate(10, 4.5) == 10);
    CHECK(step.rate(10, 3) == doctest::Approx(13));
    CHECK(Schedule::parse("ramp:20:10").rate(15, 0) == doctest::Approx(18));
    CHECK(Schedule::parse(ramp.describe()).rate(15, 3) == doctest::Approx(ramp.rate(15, 3)));
    CHECK(Schedule::parse("flat").kind == ScheduleKind::Flat);
    CHECK_THROWS_AS(Schedule::parse("wiggle:1:2"), UsageError);
}

TEST_CASE("flat cohort labels pass curation") {
    const auto cohort = synth_cohort(4, Schedule::flat(), 3);
    std::size_t accepted = 0, total = 0;
    for (const auto& patient : cohort) {
        CHECK(patient.n_minutes() >= 37 * 60);
        const auto rec = patient.render(0, 30);
        for (std::size_t m = 0; m < 30; ++m) {
            const auto lab = aggregate_label(rec.rr_truth, rec.record.start_time + kMinute * static_cast<std::int64_t>(m));
            if (!lab) continue;
            ++total;
            accepted += accept_label(*lab).accepted;
        }
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(accepted) / static_cast<double>(total) > 0.99);
}

TEST_CASE("cohort dropout masks whole minutes") {
    CohortOptions all_gone;
    all_gone.dropout_low = all_gone.dropout_high = 1.0;
    const auto cohort = synth_cohort(2, Schedule::flat(), 1, all_gone);
    for (const auto& p : cohort) CHECK(p.truth_timeline().points.empty());

    CohortOptions some;
    some.dropout_low = some.dropout_high = 0.2;
    const auto c2 = synth_cohort(3, Schedule::ramp(0.2, 10), 1, some);
    for (const auto& p : c2) {
        const double kept = static_cast<double>(p.truth_timeline().points.size()) / static_cast<double>(p.n_minutes());
        CHECK(kept == doctest::Approx(0.8).epsilon(0.05));
        const auto rec = p.render(0, 5);
        const auto minutes = extract_minutes(rec.record, 0);
        std::size_t present = 0;
        for (std::size_t m = 0; m < 5; ++m) present += p.minute_present[m];
        CHECK(minutes.size() == present);
    }
    CHECK(synth_cohort(3, Schedule::flat(), 7)[1].baseline_bpm == synth_cohort(3, Schedule::flat(), 7)[1].baseline_bpm);
}
