#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "edr/common.hpp"
#include "edr/timeline.hpp"

namespace edr::clinical {

enum class EventKind { RapidResponseIntubation, Reintubation };
enum class Location { ICU, Floor };

std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);
std::string to_string(Location l);
Location location_from_string(const std::string& s);

struct ClinicalEvent {
    std::string patient_id;
    Timestamp event_time{};  // after backward adjustment and grace subtraction
    EventKind kind = EventKind::RapidResponseIntubation;
    Location location = Location::Floor;
    std::optional<Timestamp> surgery_end;
};

struct ChartEntry {
    Timestamp time{};
    std::string oxygen_device;
};

/// A machine-annotated ventilator value (vent_rate or set_tv).
struct DeviceEntry {
    Timestamp time{};
    std::string key;
    double value = 0;
};

struct IntubationRules {
    std::set<std::string> non_invasive{"None_(Room_air)", "Nasal_cannula", "Aerosol_mask", "Face_tent"};
    std::string ventilator = "Ventilator";
    std::set<std::string> machine_keys{"vent_rate", "set_tv"};
    Milliseconds lookback = kHour;
    Milliseconds grace = 5 * kMinute;
};

/// First non-invasive to ventilator transition in `chart`, moved back to the
/// earliest machine value within `lookback` before it, minus the grace period.
/// Throws DataError when either series is out of time order.
std::optional<ClinicalEvent> detect_intubation(const std::string& patient_id, std::span<const ChartEntry> chart,
                                               std::span<const DeviceEntry> device,
                                               EventKind kind = EventKind::RapidResponseIntubation,
                                               Location location = Location::Floor, const IntubationRules& rules = {});

struct BloodGas {
    std::optional<double> ph;
    std::optional<double> po2;   // mmHg
    std::optional<double> pco2;  // mmHg
    Timestamp draw_time{};
};

/// pO2 < 100 or pCO2 > 50 or pH < 7.3; nullopt when any value is missing.
std::optional<bool> resp_failure(const BloodGas& bg);

struct HourlyBin {
    int lead_time_h = 0;
    std::optional<double> mean_rr;
    std::size_t n_minutes = 0;
};

struct BinOptions {
    int horizon_h = 36;
    std::size_t min_minutes = 20;  // a bin needs strictly more than this
    bool use_labels = false;       // label_bpm instead of pred_bpm
    /// Minutes before this time are ignored (e.g. an earlier ventilated period).
    std::optional<Timestamp> exclude_before;
};

/// Bin t covers [event - t h, event - (t - 1) h) for t = 1..horizon_h.
std::vector<HourlyBin> hourly_bins(const RrTimeline& timeline, Timestamp event_time, const BinOptions& options = {});

struct BarRatio {
    int lead_time_h = 0;
    std::optional<double> ratio;
};

/// ratio(t) = mean(t) / mean(t + ref_offset_h) for t = 1..(horizon - ref_offset).
std::vector<BarRatio> baseline_ratios(std::span<const HourlyBin> bins, int ref_offset_h = 12);

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
/// Throws std::domain_error for df <= 0 or non-finite input.
double student_t_sf(double t, double df);
/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

std::string stars(double p);

struct TTest {
    double t = 0;
    double df = 0;
    double p = 1;  // two-sided
    std::string stars;
};

std::optional<TTest> one_sample_ttest(std::span<const double> xs, double mu = 1.0);
std::optional<TTest> welch_ttest(std::span<const double> a, std::span<const double> b);

struct ControlCandidate {
    std::string patient_id;
    Timestamp surgery_end{};
    Timestamp telemetry_start{};
    Timestamp telemetry_end{};
};

struct MatchedControl {
    std::string patient_id;
    std::string case_id;
    Timestamp pseudo_event_time{};
    Milliseconds elapsed{};  // since surgery
};

struct MatchResult {
    std::vector<MatchedControl> controls;
    std::vector<std::string> warnings;
    double achieved_ratio = 0;
};

struct MatchOptions {
    std::size_t ratio = 5;
    Milliseconds coverage = 36 * kHour;  // telemetry needed before the pseudo-event
    bool reuse_across_cases = false;
};

/// Cases without surgery_end are skipped with a warning.
MatchResult match_controls(std::span<const ClinicalEvent> cases, std::span<const ControlCandidate> pool,
                           std::uint64_t seed, const MatchOptions& options = {});

struct PatientBins {
    std::string patient_id;
    std::vector<HourlyBin> bins;
};

struct Trajectories {
    std::vector<std::string> persistently_low;
    std::vector<std::string> rapid_rise;
};

struct TrajectoryRules {
    int window_h = 24;
    double low_bpm = 18.0;
    double rise_bpm = 14.0;
};

Trajectories select_extreme_trajectories(std::span<const PatientBins> cohort, const TrajectoryRules& rules = {});

struct Bar {
    int lead_time_h = 0;
    std::size_t n = 0;
    std::optional<double> mean_ratio;
    std::size_t n_control = 0;
    std::optional<double> mean_control_ratio;
    std::optional<TTest> test;
};

struct CohortResult {
    int ref_offset_h = 12;
    bool two_sample = false;
    std::vector<Bar> bars;  // lead_time 1 first
    std::string diagnostic;
};

/// One-sample test of case ratios against 1.0, or Welch against the control
/// ratios when `controls` is non-empty. One result per ref offset.
std::vector<CohortResult> cohort_analysis(std::span<const PatientBins> cases, std::span<const PatientBins> controls,
                                          std::span<const int> ref_offsets);

struct ManifestRow {
    std::string patient_id;
    Timestamp event_time{};
    EventKind kind = EventKind::RapidResponseIntubation;
    std::optional<Timestamp> surgery_end;
};

/// Columns patient_id, event_time_iso, kind, surgery_end_iso (optional).
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(std::span<const ManifestRow> rows, const std::filesystem::path& path);

void write_events_csv(std::span<const ClinicalEvent> events, const std::filesystem::path& path);
void write_results_csv(const CohortResult& result, const std::filesystem::path& path);
void write_bins_csv(std::span<const PatientBins> cohort, const std::filesystem::path& path);
void write_controls_csv(const MatchResult& result, const std::filesystem::path& path);

/// Long-format chart table (patient_id, time_iso, key, value); key
/// "oxygen_device" rows carry a device name, machine keys a number.
struct ChartTable {
    std::map<std::string, std::vector<ChartEntry>> chart;
    std::map<std::string, std::vector<DeviceEntry>> device;
};
ChartTable read_chart_csv(const std::filesystem::path& path);

}  // namespace edr::clinical
