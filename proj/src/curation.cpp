#include "edr/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

#include "json.hpp"

#include "edr/csv.hpp"

namespace edr {

std::string to_string(LabelSource s) {
    switch (s) {
        case LabelSource::ImP: return "ImP";
        case LabelSource::Capnography: return "capnography";
        case LabelSource::Synthetic: return "synthetic";
    }
    return "?";
}

LabelSource label_source_from_string(const std::string& s) {
    if (s == "ImP" || s == "imp") return LabelSource::ImP;
    if (s == "capnography") return LabelSource::Capnography;
    if (s == "synthetic") return LabelSource::Synthetic;
    throw DataError("unknown label source '" + s + "'");
}

std::string to_string(RejectCode code) {
    switch (code) {
        case RejectCode::None: return "none";
        case RejectCode::Masked: return "masked";
        case RejectCode::Flat: return "flat";
        case RejectCode::Unlabeled: return "unlabeled";
        case RejectCode::MinNonpositive: return "min_nonpositive";
        case RejectCode::MeanOutOfRange: return "mean_out_of_range";
        case RejectCode::Spread: return "spread";
        case RejectCode::Std: return "std";
    }
    return "?";
}

std::vector<std::uint8_t> remove_out_of_range(std::span<const double> samples, std::vector<std::uint8_t> mask,
                                              const CurationRules& rules) {
    mask.resize(samples.size(), 0);
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (std::abs(samples[i]) > rules.max_abs_mv) mask[i] = 1;
    return mask;
}

bool detect_flat(std::span<const double> minute, const CurationRules& rules) {
    if (minute.empty()) return true;
    const auto [lo, hi] = std::minmax_element(minute.begin(), minute.end());
    return (*hi - *lo) < rules.flat_ptp_mv;
}

namespace {

// Hamming-windowed sinc low-pass with unit DC gain; cutoff in Hz.
std::vector<double> lowpass_taps(double src_rate, double cutoff_hz, double transition_hz) {
    auto n = static_cast<std::size_t>(std::ceil(3.3 * src_rate / transition_hz));
    if (n % 2 == 0) ++n;
    const double fc = cutoff_hz / src_rate;
    const double mid = static_cast<double>(n / 2);
    std::vector<double> h(n);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = static_cast<double>(i) - mid;
        const double sinc = m == 0 ? 2 * fc : std::sin(2 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
        const double w = 0.54 - 0.46 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
        h[i] = sinc * w;
        sum += h[i];
    }
    for (auto& v : h) v /= sum;
    return h;
}

// Zero-phase filtered value at index `at`, edges extended by replication.
double filtered_at(std::span<const double> x, std::span<const double> taps, std::ptrdiff_t at) {
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto last = static_cast<std::ptrdiff_t>(x.size()) - 1;
    double acc = 0;
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(taps.size()); ++k) {
        const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(at + k - half, 0, last);
        acc += taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
    }
    return acc;
}

}  // namespace

std::vector<double> resample_to_120hz(std::span<const double> samples, double src_rate) {
    if (!(src_rate >= kTargetRate)) throw DataError("upsampling unsupported (source rate below 120 Hz)");
    if (src_rate == kTargetRate) return {samples.begin(), samples.end()};
    const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * kTargetRate / src_rate));
    std::vector<double> out(n_out);
    if (samples.empty()) return out;
    const auto taps = lowpass_taps(src_rate, 0.45 * kTargetRate, 6.0);
    const double ratio = src_rate / kTargetRate;
    const double k_int = std::round(ratio);
    if (std::abs(ratio - k_int) < 1e-9) {
        const auto k = static_cast<std::ptrdiff_t>(k_int);
        for (std::size_t j = 0; j < n_out; ++j) out[j] = filtered_at(samples, taps, static_cast<std::ptrdiff_t>(j) * k);
        return out;
    }
    const auto last = static_cast<std::ptrdiff_t>(samples.size()) - 1;
    for (std::size_t j = 0; j < n_out; ++j) {
        const double pos = std::min(static_cast<double>(j) * ratio, static_cast<double>(last));
        const auto i0 = static_cast<std::ptrdiff_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i0);
        const double a = filtered_at(samples, taps, i0);
        out[j] = frac == 0 ? a : a + frac * (filtered_at(samples, taps, std::min(i0 + 1, last)) - a);
    }
    return out;
}

std::vector<double> znormalize(std::span<const double> segment) {
    if (segment.empty()) throw NumericError("flat segment reached normalization");
    double mean = 0;
    for (double v : segment) mean += v;
    mean /= static_cast<double>(segment.size());
    double ss = 0;
    for (double v : segment) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(segment.size()));
    if (!(sd > 0) || !std::isfinite(sd)) throw NumericError("flat segment reached normalization");
    std::vector<double> out(segment.size());
    for (std::size_t i = 0; i < segment.size(); ++i) out[i] = (segment[i] - mean) / sd;
    // Second pass removes the residual rounding offset of the mean.
    double resid = 0;
    for (double v : out) resid += v;
    resid /= static_cast<double>(out.size());
    for (double& v : out) v -= resid;
    return out;
}

void znormalize(std::span<const float> segment, std::span<float> out) {
    if (segment.empty() || out.size() != segment.size()) throw NumericError("flat segment reached normalization");
    double mean = 0;
    for (float v : segment) mean += v;
    mean /= static_cast<double>(segment.size());
    double ss = 0;
    for (float v : segment) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(segment.size()));
    if (!(sd > 0) || !std::isfinite(sd)) throw NumericError("flat segment reached normalization");
    for (std::size_t i = 0; i < segment.size(); ++i) out[i] = static_cast<float>((segment[i] - mean) / sd);
}

std::vector<EcgMinute> extract_minutes(const WaveformRecord& record, std::size_t lead_index, const CurationRules& rules,
                                       std::vector<MinuteRejection>* rejected) {
    const Lead& lead = record.leads.at(lead_index);
    const auto physical = lead.physical();
    const auto mask = remove_out_of_range(physical, lead.mask(), rules);
    const double per_minute = 60.0 * record.sample_rate;
    std::vector<EcgMinute> out;
    for (std::int64_t k = 0;; ++k) {
        const auto begin = static_cast<std::size_t>(std::llround(static_cast<double>(k) * per_minute));
        const auto end = static_cast<std::size_t>(std::llround(static_cast<double>(k + 1) * per_minute));
        if (end > physical.size()) break;
        const Timestamp start = record.start_time + kMinute * k;
        auto reject = [&](RejectCode code) {
            if (rejected) rejected->push_back({record.patient_id, start, lead.name, code});
        };
        if (std::any_of(mask.begin() + static_cast<std::ptrdiff_t>(begin), mask.begin() + static_cast<std::ptrdiff_t>(end),
                        [](std::uint8_t m) { return m != 0; })) {
            reject(RejectCode::Masked);
            continue;
        }
        auto samples = resample_to_120hz(std::span(physical).subspan(begin, end - begin), record.sample_rate);
        if (samples.size() != kMinuteSamples) {
            reject(RejectCode::Masked);
            continue;
        }
        if (detect_flat(samples, rules)) {
            reject(RejectCode::Flat);
            continue;
        }
        out.push_back({record.patient_id, lead.name, start, std::move(samples)});
    }
    return out;
}

std::optional<MinuteLabel> aggregate_label(std::span<const RrSample> series, Timestamp minute_start, LabelSource source) {
    const Timestamp minute_end = minute_start + kMinute;
    auto lo = std::lower_bound(series.begin(), series.end(), minute_start,
                               [](const RrSample& s, Timestamp t) { return s.time < t; });
    auto hi = std::lower_bound(lo, series.end(), minute_end, [](const RrSample& s, Timestamp t) { return s.time < t; });
    if (lo == hi) return std::nullopt;
    MinuteLabel label;
    label.start_time = minute_start;
    label.source = source;
    label.n_samples = static_cast<std::size_t>(hi - lo);
    label.min_rr = lo->bpm;
    label.max_rr = lo->bpm;
    double sum = 0;
    for (auto it = lo; it != hi; ++it) {
        sum += it->bpm;
        label.min_rr = std::min(label.min_rr, it->bpm);
        label.max_rr = std::max(label.max_rr, it->bpm);
    }
    label.mean_rr = sum / static_cast<double>(label.n_samples);
    double ss = 0;
    for (auto it = lo; it != hi; ++it) ss += (it->bpm - label.mean_rr) * (it->bpm - label.mean_rr);
    label.std_rr = std::sqrt(ss / static_cast<double>(label.n_samples));
    // Keep min <= mean <= max exact under rounding.
    label.mean_rr = std::clamp(label.mean_rr, label.min_rr, label.max_rr);
    return label;
}

LabelDecision accept_label(const MinuteLabel& label, const CurationRules& rules) {
    if (!(label.min_rr > rules.min_rr_floor)) return {false, RejectCode::MinNonpositive};
    if (!(label.mean_rr >= rules.mean_rr_low && label.mean_rr <= rules.mean_rr_high)) return {false, RejectCode::MeanOutOfRange};
    if (!(label.max_rr - label.min_rr < rules.max_spread)) return {false, RejectCode::Spread};
    if (!(label.std_rr < rules.max_std)) return {false, RejectCode::Std};
    return {true, RejectCode::None};
}

AlignResult align(std::span<const EcgMinute> minutes, std::span<const RrSample> series, LabelSource source,
                  const CurationRules& rules) {
    AlignResult result;
    if (minutes.empty()) return result;
    std::vector<RrSample> sorted(series.begin(), series.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const RrSample& a, const RrSample& b) { return a.time < b.time; });

    Timestamp ecg_lo = minutes.front().start_time, ecg_hi = ecg_lo;
    for (const auto& m : minutes) {
        ecg_lo = std::min(ecg_lo, m.start_time);
        ecg_hi = std::max(ecg_hi, m.start_time + kMinute);
    }
    if (sorted.empty() || sorted.back().time < ecg_lo || sorted.front().time >= ecg_hi) {
        result.warnings.push_back("clock mismatch: RR series does not overlap the ECG minutes of patient '" +
                                  minutes.front().patient_id + "'");
        return result;
    }

    std::vector<const EcgMinute*> order;
    order.reserve(minutes.size());
    for (const auto& m : minutes) order.push_back(&m);
    std::sort(order.begin(), order.end(), [](const EcgMinute* a, const EcgMinute* b) {
        return std::tie(a->patient_id, a->start_time, a->lead_name) < std::tie(b->patient_id, b->start_time, b->lead_name);
    });

    std::map<std::pair<std::string, Timestamp>, std::optional<MinuteLabel>> labels;
    for (const EcgMinute* m : order) {
        const auto key = std::make_pair(m->patient_id, m->start_time);
        auto it = labels.find(key);
        if (it == labels.end()) {
            std::optional<MinuteLabel> label = aggregate_label(sorted, m->start_time, source);
            if (!label) {
                result.rejections.push_back({m->patient_id, m->start_time, "", RejectCode::Unlabeled});
            } else if (auto decision = accept_label(*label, rules); !decision.accepted) {
                result.rejections.push_back({m->patient_id, m->start_time, "", decision.reason});
                label.reset();
            }
            it = labels.emplace(key, label).first;
        }
        if (!it->second) continue;
        MinuteExample ex;
        ex.patient_id = m->patient_id;
        ex.lead_name = m->lead_name;
        ex.start_time = m->start_time;
        ex.source = source;
        ex.label = it->second->mean_rr;
        ex.ecg.assign(m->samples.begin(), m->samples.end());
        result.examples.push_back(std::move(ex));
    }
    return result;
}

std::string to_string(SplitName s) {
    switch (s) {
        case SplitName::Train: return "train";
        case SplitName::Tune: return "tune";
        case SplitName::Test: return "test";
    }
    return "?";
}

SplitName split_from_string(const std::string& s) {
    if (s == "train") return SplitName::Train;
    if (s == "tune") return SplitName::Tune;
    if (s == "test") return SplitName::Test;
    throw DataError("unknown split '" + s + "'");
}

SplitName assign_split(const std::string& patient_id, std::uint64_t seed, const SplitFractions& f) {
    const std::uint64_t h = mix64(stable_hash(patient_id) ^ mix64(seed));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    const double total = f.train + f.tune + f.test;
    if (u < f.train / total) return SplitName::Train;
    if (u < (f.train + f.tune) / total) return SplitName::Tune;
    return SplitName::Test;
}

DatasetSplits split_by_patient(std::vector<MinuteExample> examples, const SplitFractions& fractions, std::uint64_t seed) {
    const double total = fractions.train + fractions.tune + fractions.test;
    if (fractions.train < 0 || fractions.tune < 0 || fractions.test < 0 || std::abs(total - 1.0) > 1e-9)
        throw UsageError("split fractions must be non-negative and sum to 1");
    DatasetSplits out;
    std::set<std::string> patients;
    for (const auto& ex : examples) {
        if (ex.patient_id.empty()) throw DataError("example without patient id");
        patients.insert(ex.patient_id);
    }
    const bool single = patients.size() == 1;
    if (single) out.warnings.push_back("single patient: all examples assigned to train");
    for (auto& ex : examples) {
        const SplitName s = single ? SplitName::Train : assign_split(ex.patient_id, seed, fractions);
        out[s].patient_ids.insert(ex.patient_id);
        out[s].examples.push_back(std::move(ex));
    }
    return out;
}

namespace {

constexpr const char* kSegmentsFile = "segments.f32";

void write_manifest_rows(const std::filesystem::path& dir, std::span<const StoredExample> examples) {
    CsvWriter csv(dir / "manifest.csv", {"index", "patient_id", "lead", "start_time_iso", "label_bpm", "source", "split"});
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i].example;
        csv.field(i).field(ex.patient_id).field(ex.lead_name).field(format_iso(ex.start_time)).field(ex.label);
        csv.field(to_string(ex.source)).field(examples[i].split ? to_string(*examples[i].split) : std::string{});
        csv.end_row();
    }
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, std::span<const StoredExample> examples) {
    std::filesystem::create_directories(dir);
    std::ofstream blob(dir / kSegmentsFile, std::ios::binary);
    if (!blob) throw DataError("cannot write '" + (dir / kSegmentsFile).string() + "'");
    for (const auto& stored : examples) {
        const auto& ecg = stored.example.ecg;
        if (ecg.size() != kMinuteSamples) throw DataError("example segment is not 7200 samples");
        std::vector<std::uint8_t> raw(ecg.size() * 4);
        for (std::size_t k = 0; k < ecg.size(); ++k) {
            std::uint32_t u;
            std::memcpy(&u, &ecg[k], 4);
            for (int b = 0; b < 4; ++b) raw[4 * k + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(u >> (8 * b));
        }
        blob.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
    if (!blob) throw DataError("segment write failed");
    nlohmann::json meta{{"format", "edr-dataset"},
                        {"version", 1},
                        {"n_examples", examples.size()},
                        {"segment_length", kMinuteSamples},
                        {"sample_rate", kTargetRate},
                        {"dtype", "float32-le"},
                        {"units", "mV"}};
    std::ofstream(dir / "dataset.json") << meta.dump(2) << "\n";
    write_manifest_rows(dir, examples);
}

void write_manifest(const std::filesystem::path& dir, std::span<const StoredExample> examples) {
    write_manifest_rows(dir, examples);
}

std::vector<StoredExample> read_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.csv")) throw PrerequisiteError((dir / "manifest.csv").string(), "curate");
    const CsvTable table = read_csv(dir / "manifest.csv");
    const auto blob = read_file_bytes(dir / kSegmentsFile);
    const std::size_t seg_bytes = kMinuteSamples * 4;
    if (blob.size() % seg_bytes) throw DataError("segments file is not a whole number of 7200-sample segments");
    const std::size_t n_blob = blob.size() / seg_bytes;
    const auto c_index = table.column("index"), c_pid = table.column("patient_id"), c_lead = table.column("lead"),
               c_time = table.column("start_time_iso"), c_label = table.column("label_bpm"), c_src = table.column("source"),
               c_split = table.column("split");
    std::vector<StoredExample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        StoredExample s;
        const auto index = std::stoull(row[c_index]);
        if (index >= n_blob) throw DataError("manifest index " + row[c_index] + " beyond segments file");
        s.example.patient_id = row[c_pid];
        s.example.lead_name = row[c_lead];
        s.example.start_time = parse_iso(row[c_time]);
        s.example.label = std::stod(row[c_label]);
        s.example.source = label_source_from_string(row[c_src]);
        if (!row[c_split].empty()) s.split = split_from_string(row[c_split]);
        s.example.ecg.resize(kMinuteSamples);
        const std::uint8_t* p = blob.data() + index * seg_bytes;
        for (std::size_t k = 0; k < kMinuteSamples; ++k) {
            std::uint32_t u = 0;
            for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[4 * k + static_cast<std::size_t>(b)]) << (8 * b);
            std::memcpy(&s.example.ecg[k], &u, 4);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_rejection_log(const std::filesystem::path& dir, std::span<const MinuteRejection> rejections) {
    std::filesystem::create_directories(dir);
    {
        CsvWriter csv(dir / "rejections.csv", {"patient_id", "minute_iso", "lead", "reason_code"});
        for (const auto& r : rejections)
            csv.field(r.patient_id).field(format_iso(r.minute)).field(r.lead).field(to_string(r.code)).end_row();
    }
    std::map<std::string, long long> counts;
    for (const auto& r : rejections) ++counts[to_string(r.code)];
    CsvWriter csv(dir / "rejection_counts.csv", {"reason_code", "count"});
    for (const auto& [code, n] : counts) csv.field(code).field(n).end_row();
}

}  // namespace edr
