#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "edr/common.hpp"
#include "edr/waveform_io.hpp"

namespace edr {

inline constexpr double kTargetRate = 120.0;
inline constexpr std::size_t kMinuteSamples = 7200;

/// Acceptance thresholds. Defaults are the published curation constants.
struct CurationRules {
    double max_abs_mv = 60.0;    // samples strictly beyond this are removed
    double flat_ptp_mv = 0.01;   // peak-to-peak below this marks a flat minute
    double min_rr_floor = 0.0;   // min_rr must be strictly above
    double mean_rr_low = 10.0;   // inclusive
    double mean_rr_high = 50.0;  // inclusive
    double max_spread = 10.0;    // max - min strictly below
    double max_std = 2.0;        // population std strictly below
};

enum class LabelSource { ImP, Capnography, Synthetic };
std::string to_string(LabelSource s);
LabelSource label_source_from_string(const std::string& s);

struct EcgMinute {
    std::string patient_id;
    std::string lead_name;
    Timestamp start_time{};
    std::vector<double> samples;  // kMinuteSamples values at 120 Hz, mV
};

struct RrSample {
    Timestamp time{};
    double bpm = 0;
};

struct MinuteLabel {
    Timestamp start_time{};
    double mean_rr = 0;
    double min_rr = 0;
    double max_rr = 0;
    double std_rr = 0;  // population
    std::size_t n_samples = 0;
    LabelSource source = LabelSource::ImP;
};

/// Why a minute or a (lead, minute) pair did not become an example.
enum class RejectCode { None, Masked, Flat, Unlabeled, MinNonpositive, MeanOutOfRange, Spread, Std };
std::string to_string(RejectCode code);

struct LabelDecision {
    bool accepted = false;
    RejectCode reason = RejectCode::None;
};

struct MinuteRejection {
    std::string patient_id;
    Timestamp minute{};
    std::string lead;  // empty for label-level rejections
    RejectCode code = RejectCode::None;
};

struct MinuteExample {
    std::string patient_id;
    std::string lead_name;
    Timestamp start_time{};
    LabelSource source = LabelSource::ImP;
    double label = 0;        // minute-mean RR, bpm
    std::vector<float> ecg;  // kMinuteSamples raw mV; z-normalized when consumed
};

/// Masks every sample with |v| above the limit; other mask bits are kept.
std::vector<std::uint8_t> remove_out_of_range(std::span<const double> samples, std::vector<std::uint8_t> mask,
                                              const CurationRules& rules = {});

bool detect_flat(std::span<const double> minute, const CurationRules& rules = {});

/// Anti-aliased decimation or interpolation to 120 Hz; a 120 Hz input is
/// returned unchanged. Throws DataError for src_rate below 120 Hz.
std::vector<double> resample_to_120hz(std::span<const double> samples, double src_rate);

/// Mean 0, population std 1. Throws NumericError for a zero-variance input.
std::vector<double> znormalize(std::span<const double> segment);
void znormalize(std::span<const float> segment, std::span<float> out);

/// Minutes on the grid start_time + k*60 s that hold no masked sample and
/// are not flat. Out-of-range removal is applied first.
std::vector<EcgMinute> extract_minutes(const WaveformRecord& record, std::size_t lead, const CurationRules& rules = {},
                                       std::vector<MinuteRejection>* rejected = nullptr);

/// Label for [minute_start, minute_start + 60 s); nullopt when the window
/// holds no sample. `series` must be sorted by time.
std::optional<MinuteLabel> aggregate_label(std::span<const RrSample> series, Timestamp minute_start,
                                           LabelSource source = LabelSource::ImP);

/// Rules are checked in order: min > floor, mean range, spread, std.
LabelDecision accept_label(const MinuteLabel& label, const CurationRules& rules = {});

struct AlignResult {
    std::vector<MinuteExample> examples;
    std::vector<MinuteRejection> rejections;
    std::vector<std::string> warnings;
};

/// Pairs each ECG minute with the accepted label of the same minute. One
/// example per lead; examples come out ordered by (patient, time, lead).
AlignResult align(std::span<const EcgMinute> minutes, std::span<const RrSample> series, LabelSource source,
                  const CurationRules& rules = {});

enum class SplitName { Train = 0, Tune = 1, Test = 2 };
std::string to_string(SplitName s);
SplitName split_from_string(const std::string& s);

struct SplitFractions {
    double train = 0.8;
    double tune = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    SplitName name = SplitName::Train;
    std::vector<MinuteExample> examples;
    std::set<std::string> patient_ids;
};

struct DatasetSplits {
    std::array<DatasetSplit, 3> parts{DatasetSplit{SplitName::Train, {}, {}}, DatasetSplit{SplitName::Tune, {}, {}},
                                      DatasetSplit{SplitName::Test, {}, {}}};
    std::vector<std::string> warnings;

    DatasetSplit& operator[](SplitName s) { return parts[static_cast<std::size_t>(s)]; }
    const DatasetSplit& operator[](SplitName s) const { return parts[static_cast<std::size_t>(s)]; }
};

/// Split bucket as a pure function of (patient id, seed).
SplitName assign_split(const std::string& patient_id, std::uint64_t seed, const SplitFractions& fractions = {});

DatasetSplits split_by_patient(std::vector<MinuteExample> examples, const SplitFractions& fractions,
                               std::uint64_t seed);

// On-disk curated dataset: manifest.csv + segments.f32 + dataset.json.

struct StoredExample {
    MinuteExample example;
    std::optional<SplitName> split;
};

void write_dataset(const std::filesystem::path& dir, std::span<const StoredExample> examples);
std::vector<StoredExample> read_dataset(const std::filesystem::path& dir);
/// Rewrites only the manifest of an existing dataset with split assignments.
void write_manifest(const std::filesystem::path& dir, std::span<const StoredExample> examples);

void write_rejection_log(const std::filesystem::path& dir, std::span<const MinuteRejection> rejections);

}  // namespace edr
