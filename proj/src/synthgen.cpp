#include "edr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "edr/csv.hpp"

namespace edr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wavelet {
    double offset_s;
    double amplitude_mv;
    double width_s;
    bool qrs;
};

// P, Q, R, S, T at fixed offsets from the R peak.
constexpr std::array<Wavelet, 5> kMorphology{{
    {-0.200, 0.15, 0.025, false},
    {-0.025, -0.15, 0.010, true},
    {0.000, 1.00, 0.012, true},
    {0.025, -0.25, 0.010, true},
    {0.300, 0.30, 0.050, false},
}};

// Respiration phase (radians, without initial offset) at time t for a
// piecewise-constant per-minute rate.
class Phase {
public:
    explicit Phase(const SynthParams& p) : params_(p) {
        cumulative_.push_back(0.0);
        for (double r : p.minute_rates) cumulative_.push_back(cumulative_.back() + r);
    }

    double operator()(double t) const {
        if (params_.minute_rates.empty()) return kTwoPi * params_.resp_rate / 60.0 * t;
        const double minutes = std::max(t, 0.0) / 60.0;
        const auto m = std::min(static_cast<std::size_t>(minutes), params_.minute_rates.size() - 1);
        const double breaths = cumulative_[m] + params_.minute_rates[m] * (minutes - static_cast<double>(m));
        // Before t = 0 extrapolate with the first rate.
        const double before = t < 0 ? params_.minute_rates.front() / 60.0 * t : 0.0;
        return kTwoPi * (breaths + before);
    }

private:
    const SynthParams& params_;
    std::vector<double> cumulative_;
};

}  // namespace

void SynthParams::validate() const {
    if (!(heart_rate > 0)) throw UsageError("heart_rate must be positive");
    if (minute_rates.empty() && !(resp_rate > 0)) throw UsageError("resp_rate must be positive");
    for (double r : minute_rates)
        if (!(r > 0)) throw UsageError("resp_rate must be positive");
    if (am_depth < 0 || am_depth > 0.5) throw UsageError("am_depth must be in [0, 0.5]");
    if (rsa_depth < 0 || rsa_depth > 0.2) throw UsageError("rsa_depth must be in [0, 0.2]");
    if (baseline_wander_mv < 0 || noise_std_mv < 0) throw UsageError("wander and noise must be non-negative");
    if (!(sample_rate >= kTargetRate)) throw UsageError("synthetic sample rate must be at least 120 Hz");
    if (!(adc_gain > 0)) throw UsageError("adc_gain must be positive");
}

double SynthParams::rate_at(double t_s) const {
    if (minute_rates.empty()) return resp_rate;
    const auto m = static_cast<std::size_t>(std::max(t_s, 0.0) / 60.0);
    return minute_rates[std::min(m, minute_rates.size() - 1)];
}

SynthRecord synth_ecg(const SynthParams& params, double duration_s, const std::string& patient_id, Timestamp start) {
    params.validate();
    if (duration_s < 60.0) throw UsageError("duration must be at least 60 s");
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double resp_offset = kTwoPi * unit(rng);
    const double wander_offset = kTwoPi * unit(rng);
    const double ibi = 60.0 / params.heart_rate;
    const Phase phase(params);

    SynthRecord out;
    out.params = params;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * params.sample_rate));
    const double fs = params.sample_rate;

    // Beat train, starting one interval before t = 0 so the record opens
    // mid-rhythm.
    for (double t = -ibi * unit(rng); t < duration_s + 0.5;) {
        const double resp = std::sin(phase(t) + resp_offset);
        out.beats.push_back({t, 1.0 + params.am_depth * resp});
        t += ibi * (1.0 + params.rsa_depth * resp);
    }

    std::vector<double> base(n, 0.0);
    for (const Beat& beat : out.beats) {
        for (const Wavelet& w : kMorphology) {
            const double centre = beat.time_s + w.offset_s;
            const double amp = w.qrs ? w.amplitude_mv * beat.qrs_scale : w.amplitude_mv;
            const auto lo = static_cast<std::ptrdiff_t>(std::floor((centre - 6 * w.width_s) * fs));
            const auto hi = static_cast<std::ptrdiff_t>(std::ceil((centre + 6 * w.width_s) * fs));
            for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= std::min<std::ptrdiff_t>(hi, std::ptrdiff_t(n) - 1); ++i) {
                const double z = (static_cast<double>(i) / fs - centre) / w.width_s;
                base[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * z * z);
            }
        }
    }
    std::vector<double> wander(n);
    for (std::size_t i = 0; i < n; ++i)
        wander[i] = params.baseline_wander_mv * std::sin(phase(static_cast<double>(i) / fs) + wander_offset);

    out.record.name = patient_id;
    out.record.patient_id = patient_id;
    out.record.sample_rate = fs;
    out.record.start_time = start;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> lead(n);
    for (std::size_t l = 0; l < kSynthLeadNames.size(); ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            const double noise = params.noise_std_mv > 0 ? params.noise_std_mv * gauss(rng) : 0.0;
            lead[i] = params.lead_gains[l] * base[i] + wander[i] + noise;
        }
        out.record.leads.push_back(Lead::from_physical(kSynthLeadNames[l], lead, params.adc_gain));
    }

    for (std::size_t k = 0;; ++k) {
        const double t = 2.0 * static_cast<double>(k);
        if (t >= duration_s) break;
        out.rr_truth.push_back({start + seconds_ms(t), params.rate_at(t)});
    }
    return out;
}

double Schedule::rate(double baseline_bpm, double hours_before) const {
    switch (kind) {
        case ScheduleKind::Flat: return baseline_bpm;
        case ScheduleKind::Ramp:
            if (hours_before >= hours) return baseline_bpm;
            return baseline_bpm * (1.0 + delta * (hours - std::max(hours_before, 0.0)) / hours);
        case ScheduleKind::Step: return hours_before > hours ? baseline_bpm : baseline_bpm * (1.0 + delta);
    }
    return baseline_bpm;
}

std::string Schedule::describe() const {
    std::ostringstream s;
    switch (kind) {
        case ScheduleKind::Flat: return "flat";
        case ScheduleKind::Ramp: s << "ramp(" << delta * 100 << "%;" << hours << "h)"; break;
        case ScheduleKind::Step: s << "step(" << delta * 100 << "%;" << hours << "h)"; break;
    }
    return s.str();
}

Schedule Schedule::parse(const std::string& text) {
    if (text == "flat") return flat();
    double pct = 0, h = 0;
    char kind[8] = {};
    if (std::sscanf(text.c_str(), "%4[a-z](%lf%%;%lfh)", kind, &pct, &h) == 3 ||
        std::sscanf(text.c_str(), "%4[a-z]:%lf:%lf", kind, &pct, &h) == 3) {
        if (std::string(kind) == "ramp" && h > 0) return ramp(pct / 100.0, h);
        if (std::string(kind) == "step" && h >= 0) return step(pct / 100.0, h);
    }
    throw UsageError("bad schedule '" + text + "' (flat | ramp:PCT:HOURS | step:PCT:AT_HOUR)");
}

std::vector<CohortPatient> synth_cohort(std::size_t n_patients, const Schedule& schedule, std::uint64_t seed,
                                        const CohortOptions& options) {
    if (n_patients == 0) throw UsageError("cohort needs at least one patient");
    std::vector<CohortPatient> out;
    out.reserve(n_patients);
    const auto n_minutes = static_cast<std::size_t>(std::llround(options.hours * 60.0));
    for (std::size_t p = 0; p < n_patients; ++p) {
        std::mt19937_64 rng(mix64(seed * 0x9e3779b97f4a7c15ULL + p));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        CohortPatient patient;
        char id[32];
        std::snprintf(id, sizeof id, "P%05zu", p);
        patient.patient_id = id;
        patient.schedule = schedule;
        patient.record_start = options.origin + kHour * static_cast<std::int64_t>(p % 97) + kMinute * static_cast<std::int64_t>(p % 53);
        patient.event_time = patient.record_start + kMinute * static_cast<std::int64_t>(n_minutes);
        patient.baseline_bpm = options.baseline_low + (options.baseline_high - options.baseline_low) * unit(rng);
        patient.dropout = options.dropout_low + (options.dropout_high - options.dropout_low) * unit(rng);
        patient.params.heart_rate = options.heart_rate_low + (options.heart_rate_high - options.heart_rate_low) * unit(rng);
        patient.params.seed = rng();
        patient.params.minute_rates.resize(n_minutes);
        patient.minute_present.resize(n_minutes);
        for (std::size_t m = 0; m < n_minutes; ++m) {
            const double hours_before = (static_cast<double>(n_minutes - m) - 0.5) / 60.0;
            const double jitter = options.jitter_bpm * (2.0 * unit(rng) - 1.0);
            patient.params.minute_rates[m] = std::max(1.0, schedule.rate(patient.baseline_bpm, hours_before) + jitter);
            patient.minute_present[m] = unit(rng) >= patient.dropout;
        }
        out.push_back(std::move(patient));
    }
    return out;
}

RrTimeline CohortPatient::truth_timeline() const {
    RrTimeline tl;
    tl.patient_id = patient_id;
    for (std::size_t m = 0; m < n_minutes(); ++m) {
        if (!minute_present[m]) continue;
        const double rate = params.minute_rates[m];
        tl.points.push_back({record_start + kMinute * static_cast<std::int64_t>(m), rate, rate, std::nullopt});
    }
    return tl;
}

SynthRecord CohortPatient::render(std::size_t first_minute, std::size_t count) const {
    if (first_minute + count > n_minutes() || count == 0) throw UsageError("render window outside the cohort record");
    SynthParams p = params;
    p.minute_rates.assign(params.minute_rates.begin() + static_cast<std::ptrdiff_t>(first_minute),
                          params.minute_rates.begin() + static_cast<std::ptrdiff_t>(first_minute + count));
    p.seed = mix64(params.seed ^ (first_minute + 1));
    const Timestamp start = record_start + kMinute * static_cast<std::int64_t>(first_minute);
    SynthRecord rec = synth_ecg(p, 60.0 * static_cast<double>(count), patient_id, start);
    const auto per_minute = static_cast<std::size_t>(std::llround(60.0 * p.sample_rate));
    for (std::size_t m = 0; m < count; ++m) {
        if (minute_present[first_minute + m]) continue;
        for (auto& lead : rec.record.leads)
            std::fill(lead.adu.begin() + static_cast<std::ptrdiff_t>(m * per_minute),
                      lead.adu.begin() + static_cast<std::ptrdiff_t>((m + 1) * per_minute), kMissingAdu);
    }
    std::erase_if(rec.rr_truth, [&](const RrSample& s) {
        const auto m = static_cast<std::size_t>((s.time - start) / kMinute);
        return !minute_present[first_minute + m];
    });
    return rec;
}

SynthRecord synth_population_patient(std::size_t index, std::size_t minutes, std::uint64_t seed,
                                     const PopulationOptions& options) {
    std::mt19937_64 rng(mix64(seed ^ mix64(index + 0x5bd1e995ULL)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SynthParams p = options.base;
    p.heart_rate = options.heart_rate_low + (options.heart_rate_high - options.heart_rate_low) * unit(rng);
    for (auto& g : p.lead_gains) g *= 1.0 + options.gain_jitter * (2.0 * unit(rng) - 1.0);
    p.minute_rates.resize(minutes);
    for (auto& r : p.minute_rates) r = options.rr_low + (options.rr_high - options.rr_low) * unit(rng);
    p.seed = rng();
    char id[32];
    std::snprintf(id, sizeof id, "S%05zu", index);
    const Timestamp start = from_epoch_ms(1'600'000'000'000) + kHour * static_cast<std::int64_t>(24 * index);
    return synth_ecg(p, 60.0 * static_cast<double>(minutes), id, start);
}

void write_truth_csv(const SynthRecord& record, const std::filesystem::path& path) {
    CsvWriter csv(path, {"time_s", "rr_bpm"});
    for (const auto& s : record.rr_truth)
        csv.field(static_cast<double>((s.time - record.record.start_time).count()) / 1000.0).field(s.bpm).end_row();
}

std::vector<RrSample> read_truth_csv(const std::filesystem::path& path, Timestamp start) {
    const auto table = read_csv(path);
    const auto ct = table.column("time_s"), cr = table.column("rr_bpm");
    std::vector<RrSample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back({start + seconds_ms(std::stod(row[ct])), std::stod(row[cr])});
    return out;
}

}  // namespace edr
