#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "edr/curation.hpp"
#include "edr/nn/train.hpp"
#include "edr/timeline.hpp"

namespace edr {

/// Pairwise (cascade) summation; the result depends only on the values and
/// their order.
double pairwise_sum(std::span<const double> values);

/// Mean absolute error. Throws std::invalid_argument on empty or unequal input.
double mae(std::span<const double> preds, std::span<const double> labels);
/// 1 - SS_res / SS_tot. Throws std::domain_error when the labels have no variance.
double r2(std::span<const double> preds, std::span<const double> labels);

/// Counts over (label bin, pred bin); values outside [lo, hi] are clamped
/// into the edge bins and tallied in out_of_range.
struct DensityHistogram {
    double lo = 10.0;
    double hi = 50.0;
    double width = 1.0;
    std::size_t bins = 0;
    std::vector<std::size_t> counts;  // bins x bins, row = label bin
    std::size_t out_of_range = 0;
    std::size_t total = 0;

    std::size_t count(std::size_t label_bin, std::size_t pred_bin) const { return counts[label_bin * bins + pred_bin]; }
    /// log10(count + 1)
    double display(std::size_t label_bin, std::size_t pred_bin) const;
    double bin_start(std::size_t bin) const { return lo + width * static_cast<double>(bin); }
};

DensityHistogram density_histogram(std::span<const double> preds, std::span<const double> labels, double lo = 10.0,
                                   double hi = 50.0, double width = 1.0);

/// Bin k holds values in [k, k + 1) for k in [0, n_bins); others go to out_of_range.
struct RrHistogram {
    std::string source;
    std::vector<std::size_t> counts;
    std::size_t out_of_range = 0;

    std::size_t count(long bin) const {
        return bin >= 0 && static_cast<std::size_t>(bin) < counts.size() ? counts[static_cast<std::size_t>(bin)] : 0;
    }
};

RrHistogram rr_histogram(std::span<const double> values, const std::string& source, std::size_t n_bins = 100);

struct SourceMetrics {
    std::string source;
    std::size_t n = 0;
    double mae = 0;
    std::optional<double> r2;  // absent when labels are constant
};

struct EvalReport {
    std::size_t n_examples = 0;
    double mae_bpm = 0;
    std::optional<double> r2;
    std::vector<SourceMetrics> per_source;
    DensityHistogram histogram;

    nlohmann::json to_json() const;
};

EvalReport evaluate(std::span<const MinuteExample> examples, std::span<const double> preds);

/// eval_report.json, density_histogram.csv and predictions.csv in `dir`.
void write_eval_report(const EvalReport& report, std::span<const MinuteExample> examples,
                       std::span<const double> preds, const std::filesystem::path& dir);
void write_rr_histogram(const RrHistogram& hist, const std::filesystem::path& path);

struct AnnotateOptions {
    std::vector<std::string> lead_priority{"II", "I", "III", "V"};
    std::size_t rolling_minutes = 15;
    double min_occupancy = 0.5;
    nn::Precision precision = nn::Precision::Float32;
};

/// One prediction per minute from the first lead in priority order that has
/// a usable minute; leads outside the list follow in name order. Minutes with
/// an accepted label in `labels` carry it.
RrTimeline annotate_timeline(const nn::ModelState& model, std::span<const EcgMinute> minutes,
                             std::span<const RrSample> labels = {}, const AnnotateOptions& options = {});
/// Extracts usable minutes from every lead of the records first.
RrTimeline annotate_records(const nn::ModelState& model, std::span<const WaveformRecord> records,
                            std::span<const RrSample> labels = {}, const AnnotateOptions& options = {});

/// Centered mean over `window` minutes, set only where at least
/// min_occupancy of the window holds values.
void add_rolling_average(RrTimeline& timeline, std::size_t window = 15, double min_occupancy = 0.5);

/// Columns minute_iso, pred_bpm, label_bpm, rolling_bpm (blank when absent).
void write_timeline_csv(const RrTimeline& timeline, const std::filesystem::path& path);
RrTimeline read_timeline_csv(const std::filesystem::path& path, const std::string& patient_id);

}  // namespace edr
