#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "edr/curation.hpp"
#include "edr/timeline.hpp"
#include "edr/waveform_io.hpp"

namespace edr {

inline const std::array<std::string, 4> kSynthLeadNames{"I", "II", "III", "V"};

struct SynthParams {
    double heart_rate = 75.0;      // bpm
    double resp_rate = 15.0;       // bpm, used when minute_rates is empty
    double am_depth = 0.2;         // QRS amplitude modulation, [0, 0.5]
    double rsa_depth = 0.05;       // beat-interval modulation, [0, 0.2]
    double baseline_wander_mv = 0.1;
    double noise_std_mv = 0.05;
    std::array<double, 4> lead_gains{1.0, 1.3, 0.7, 1.6};
    std::uint64_t seed = 0;
    double sample_rate = 120.0;
    double adc_gain = 1000.0;  // adu per mV of the emitted record
    /// Optional programmed RR per minute (bpm); the rate is constant inside
    /// each minute so minute labels are exact.
    std::vector<double> minute_rates;

    void validate() const;
    double rate_at(double t_s) const;
};

struct Beat {
    double time_s = 0;
    double qrs_scale = 1;  // multiplies the R amplitude of every lead
};

struct SynthRecord {
    WaveformRecord record;
    std::vector<RrSample> rr_truth;  // 0.5 Hz
    SynthParams params;
    std::vector<Beat> beats;
};

/// Sum-of-Gaussians P-QRS-T beat train with respiration-driven QRS
/// amplitude modulation, beat-interval modulation and baseline wander.
SynthRecord synth_ecg(const SynthParams& params, double duration_s, const std::string& patient_id = "synth",
                      Timestamp start = Timestamp{});

enum class ScheduleKind { Flat, Ramp, Step };

struct Schedule {
    ScheduleKind kind = ScheduleKind::Flat;
    double delta = 0.0;  // fractional change at the event, 0.2 = +20%
    double hours = 0.0;  // ramp length, or step lead time before the event

    static Schedule flat() { return {}; }
    static Schedule ramp(double delta, double hours) { return {ScheduleKind::Ramp, delta, hours}; }
    static Schedule step(double delta, double at_hour) { return {ScheduleKind::Step, delta, at_hour}; }
    /// Programmed rate `hours_before` hours ahead of the event.
    double rate(double baseline_bpm, double hours_before) const;
    std::string describe() const;
    static Schedule parse(const std::string& text);
};

struct CohortOptions {
    double hours = 37.0;            // telemetry span ending at the event
    double dropout_low = 0.1;       // per-patient dropout drawn from [low, high]
    double dropout_high = 0.3;
    double baseline_low = 12.0;     // per-patient baseline RR, bpm
    double baseline_high = 20.0;
    double jitter_bpm = 1.0;        // uniform per-minute jitter
    double heart_rate_low = 70.0;
    double heart_rate_high = 100.0;
    Timestamp origin = from_epoch_ms(1'700'000'000'000);
};

struct CohortPatient {
    std::string patient_id;
    Timestamp record_start{};
    Timestamp event_time{};
    Schedule schedule;
    double baseline_bpm = 0;
    double dropout = 0;
    SynthParams params;                      // minute_rates spans the record
    std::vector<std::uint8_t> minute_present;

    std::size_t n_minutes() const { return minute_present.size(); }
    /// Per-minute ground truth over present minutes.
    RrTimeline truth_timeline() const;
    /// ECG for minutes [first, first + count); dropped minutes are masked.
    SynthRecord render(std::size_t first_minute, std::size_t count) const;
};

std::vector<CohortPatient> synth_cohort(std::size_t n_patients, const Schedule& schedule, std::uint64_t seed,
                                        const CohortOptions& options = {});

/// Patients with independent per-minute RR drawn uniformly, for training sets.
struct PopulationOptions {
    double rr_low = 10.0;
    double rr_high = 30.0;
    double heart_rate_low = 70.0;
    double heart_rate_high = 100.0;
    double gain_jitter = 0.5;  // lead gains scaled by U[1 - j, 1 + j]
    SynthParams base;
};

SynthRecord synth_population_patient(std::size_t index, std::size_t minutes, std::uint64_t seed,
                                     const PopulationOptions& options = {});

void write_truth_csv(const SynthRecord& record, const std::filesystem::path& path);
std::vector<RrSample> read_truth_csv(const std::filesystem::path& path, Timestamp start);

}  // namespace edr
