#include "edr/clinical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "edr/csv.hpp"
#include "edr/evalstats.hpp"

namespace edr::clinical {

std::string to_string(EventKind k) {
    return k == EventKind::Reintubation ? "reintubation" : "rapid_response_intubation";
}

EventKind event_kind_from_string(const std::string& s) {
    if (s == "reintubation") return EventKind::Reintubation;
    if (s == "rapid_response_intubation" || s == "rapid_response") return EventKind::RapidResponseIntubation;
    throw DataError("unknown event kind '" + s + "'");
}

std::string to_string(Location l) { return l == Location::ICU ? "ICU" : "floor"; }

Location location_from_string(const std::string& s) {
    if (s == "ICU" || s == "icu") return Location::ICU;
    if (s == "floor") return Location::Floor;
    throw DataError("unknown location '" + s + "'");
}

std::optional<ClinicalEvent> detect_intubation(const std::string& patient_id, std::span<const ChartEntry> chart,
                                               std::span<const DeviceEntry> device, EventKind kind, Location location,
                                               const IntubationRules& rules) {
    for (std::size_t i = 1; i < chart.size(); ++i)
        if (chart[i].time < chart[i - 1].time) throw DataError(patient_id + ": chart series out of time order");
    for (std::size_t i = 1; i < device.size(); ++i)
        if (device[i].time < device[i - 1].time) throw DataError(patient_id + ": device series out of time order");

    for (std::size_t i = 1; i < chart.size(); ++i) {
        if (chart[i].oxygen_device != rules.ventilator || !rules.non_invasive.count(chart[i - 1].oxygen_device))
            continue;
        const Timestamp transition = chart[i].time;
        Timestamp onset = transition;
        for (const auto& d : device) {
            if (d.time > transition) break;
            if (d.time >= transition - rules.lookback && rules.machine_keys.count(d.key)) {
                onset = d.time;
                break;
            }
        }
        return ClinicalEvent{patient_id, onset - rules.grace, kind, location, std::nullopt};
    }
    return std::nullopt;
}

std::optional<bool> resp_failure(const BloodGas& bg) {
    if (!bg.ph || !bg.po2 || !bg.pco2) return std::nullopt;
    return *bg.po2 < 100.0 || *bg.pco2 > 50.0 || *bg.ph < 7.3;
}

std::vector<HourlyBin> hourly_bins(const RrTimeline& timeline, Timestamp event_time, const BinOptions& options) {
    if (options.horizon_h < 1) throw UsageError("horizon must be at least one hour");
    const auto horizon = static_cast<std::size_t>(options.horizon_h);
    std::vector<std::vector<double>> values(horizon);
    const std::int64_t hour = kHour.count();
    for (const auto& p : timeline.points) {
        if (options.exclude_before && p.minute < *options.exclude_before) continue;
        const std::int64_t dt = (event_time - p.minute).count();
        if (dt <= 0) continue;
        const auto t = static_cast<std::size_t>((dt + hour - 1) / hour);
        if (t > horizon) continue;
        const std::optional<double> v = options.use_labels ? p.label_bpm : std::optional<double>(p.pred_bpm);
        if (v) values[t - 1].push_back(*v);
    }
    std::vector<HourlyBin> bins(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        bins[t].lead_time_h = static_cast<int>(t + 1);
        bins[t].n_minutes = values[t].size();
        if (values[t].size() > options.min_minutes)
            bins[t].mean_rr = pairwise_sum(values[t]) / static_cast<double>(values[t].size());
    }
    return bins;
}

std::vector<BarRatio> baseline_ratios(std::span<const HourlyBin> bins, int ref_offset_h) {
    if (ref_offset_h < 1) throw UsageError("ref offset must be at least one hour");
    std::map<int, const HourlyBin*> by_lead;
    int horizon = 0;
    for (const auto& b : bins) {
        by_lead[b.lead_time_h] = &b;
        horizon = std::max(horizon, b.lead_time_h);
    }
    std::vector<BarRatio> out;
    for (int t = 1; t + ref_offset_h <= horizon; ++t) {
        BarRatio r{t, std::nullopt};
        auto a = by_lead.find(t);
        auto b = by_lead.find(t + ref_offset_h);
        if (a != by_lead.end() && b != by_lead.end() && a->second->mean_rr && b->second->mean_rr)
            r.ratio = *a->second->mean_rr / *b->second->mean_rr;
        out.push_back(r);
    }
    return out;
}

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double step = d * c;
        h *= step;
        if (std::fabs(step - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

// x and y = 1 - x are passed separately so neither loses precision.
double ibeta(double a, double b, double x, double y) {
    if (x <= 0) return 0.0;
    if (y <= 0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log(y) + std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_cf(a, b, x) / a;
    return 1.0 - std::exp(log_front) * beta_cf(b, a, y) / b;
}

double mean_of(std::span<const double> xs) { return pairwise_sum(xs) / static_cast<double>(xs.size()); }

double sample_var(std::span<const double> xs, double mean) {
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
    return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

TTest finish(double t, double df) {
    TTest r;
    r.t = t;
    r.df = df;
    r.p = std::min(1.0, 2.0 * student_t_sf(std::fabs(t), df));
    r.stars = stars(r.p);
    return r;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw std::domain_error("incomplete beta needs a, b > 0");
    if (!(x >= 0 && x <= 1)) throw std::domain_error("incomplete beta needs x in [0, 1]");
    return ibeta(a, b, x, 1.0 - x);
}

double student_t_sf(double t, double df) {
    if (!(df > 0) || !std::isfinite(df)) throw std::domain_error("student_t_sf needs finite df > 0");
    if (std::isnan(t)) throw std::domain_error("student_t_sf of NaN");
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double t2 = t * t;
    const double tail = 0.5 * ibeta(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2));
    return t >= 0 ? tail : 1.0 - tail;
}

std::string stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

std::optional<TTest> one_sample_ttest(std::span<const double> xs, double mu) {
    if (xs.size() < 2) return std::nullopt;
    const double m = mean_of(xs);
    const double var = sample_var(xs, m);
    if (!(var > 0)) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    return finish((m - mu) / std::sqrt(var / n), n - 1.0);
}

std::optional<TTest> welch_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) return std::nullopt;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double sa = sample_var(a, ma) / na;
    const double sb = sample_var(b, mb) / nb;
    const double se2 = sa + sb;
    if (!(se2 > 0)) return std::nullopt;
    const double df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    return finish((ma - mb) / std::sqrt(se2), df);
}

MatchResult match_controls(std::span<const ClinicalEvent> cases, std::span<const ControlCandidate> pool,
                           std::uint64_t seed, const MatchOptions& options) {
    MatchResult result;
    std::set<std::string> case_ids;
    for (const auto& c : cases) case_ids.insert(c.patient_id);

    std::vector<const ControlCandidate*> candidates;
    for (const auto& p : pool)
        if (!case_ids.count(p.patient_id)) candidates.push_back(&p);
    std::sort(candidates.begin(), candidates.end(), [](const ControlCandidate* x, const ControlCandidate* y) {
        return x->patient_id < y->patient_id;
    });
    if (candidates.empty()) result.warnings.push_back("control pool is empty");

    std::vector<const ClinicalEvent*> ordered;
    for (const auto& c : cases) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(), [](const ClinicalEvent* x, const ClinicalEvent* y) {
        return x->patient_id != y->patient_id ? x->patient_id < y->patient_id : x->event_time < y->event_time;
    });

    std::mt19937_64 rng(seed);
    std::set<std::string> used;
    std::size_t matched_cases = 0;
    for (const auto* c : ordered) {
        if (!c->surgery_end) {
            result.warnings.push_back(c->patient_id + ": no surgery end time, skipped");
            continue;
        }
        ++matched_cases;
        const Milliseconds elapsed = c->event_time - *c->surgery_end;
        std::vector<const ControlCandidate*> eligible;
        std::set<std::string> seen;
        for (const auto* p : candidates) {
            if (!options.reuse_across_cases && used.count(p->patient_id)) continue;
            if (seen.count(p->patient_id)) continue;
            const Timestamp pseudo = p->surgery_end + elapsed;
            if (p->telemetry_start <= pseudo - options.coverage && p->telemetry_end >= pseudo) {
                eligible.push_back(p);
                seen.insert(p->patient_id);
            }
        }
        const std::size_t take = std::min(options.ratio, eligible.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (eligible.size() - i));
            std::swap(eligible[i], eligible[j]);
            const auto* p = eligible[i];
            result.controls.push_back({p->patient_id, c->patient_id, p->surgery_end + elapsed, elapsed});
            used.insert(p->patient_id);
        }
        if (take < options.ratio)
            result.warnings.push_back(c->patient_id + ": matched " + std::to_string(take) + " of " +
                                      std::to_string(options.ratio) + " controls");
    }
    result.achieved_ratio =
        matched_cases ? static_cast<double>(result.controls.size()) / static_cast<double>(matched_cases) : 0.0;
    return result;
}

Trajectories select_extreme_trajectories(std::span<const PatientBins> cohort, const TrajectoryRules& rules) {
    Trajectories out;
    for (const auto& patient : cohort) {
        std::map<int, double> means;  // lead time -> mean
        for (const auto& b : patient.bins)
            if (b.lead_time_h >= 1 && b.lead_time_h <= rules.window_h && b.mean_rr) means[b.lead_time_h] = *b.mean_rr;
        if (means.empty()) continue;
        bool low = true;
        double lowest = std::numeric_limits<double>::infinity();
        double rise = -std::numeric_limits<double>::infinity();
        // largest lead time first, i.e. chronological
        for (auto it = means.rbegin(); it != means.rend(); ++it) {
            low = low && it->second < rules.low_bpm;
            rise = std::max(rise, it->second - lowest);
            lowest = std::min(lowest, it->second);
        }
        if (low) out.persistently_low.push_back(patient.patient_id);
        if (rise > rules.rise_bpm) out.rapid_rise.push_back(patient.patient_id);
    }
    return out;
}

namespace {

std::vector<const PatientBins*> sorted_by_id(std::span<const PatientBins> cohort) {
    std::vector<const PatientBins*> v;
    for (const auto& p : cohort) v.push_back(&p);
    std::stable_sort(v.begin(), v.end(),
                     [](const PatientBins* a, const PatientBins* b) { return a->patient_id < b->patient_id; });
    return v;
}

// ratios[patient][t - 1]
std::vector<std::vector<BarRatio>> all_ratios(const std::vector<const PatientBins*>& cohort, int ref) {
    std::vector<std::vector<BarRatio>> out;
    for (const auto* p : cohort) out.push_back(baseline_ratios(p->bins, ref));
    return out;
}

std::vector<double> bar_values(const std::vector<std::vector<BarRatio>>& ratios, std::size_t t) {
    std::vector<double> v;
    for (const auto& r : ratios)
        if (t < r.size() && r[t].ratio) v.push_back(*r[t].ratio);
    return v;
}

}  // namespace

std::vector<CohortResult> cohort_analysis(std::span<const PatientBins> cases, std::span<const PatientBins> controls,
                                          std::span<const int> ref_offsets) {
    const auto case_order = sorted_by_id(cases);
    const auto control_order = sorted_by_id(controls);
    int horizon = 0;
    for (const auto* p : case_order)
        for (const auto& b : p->bins) horizon = std::max(horizon, b.lead_time_h);

    std::vector<CohortResult> results;
    for (int ref : ref_offsets) {
        CohortResult res;
        res.ref_offset_h = ref;
        res.two_sample = !controls.empty();
        const auto case_ratios = all_ratios(case_order, ref);
        const auto control_ratios = all_ratios(control_order, ref);
        bool any = false;
        for (int t = 1; t + ref <= horizon; ++t) {
            const auto idx = static_cast<std::size_t>(t - 1);
            Bar bar;
            bar.lead_time_h = t;
            const auto a = bar_values(case_ratios, idx);
            bar.n = a.size();
            if (!a.empty()) bar.mean_ratio = mean_of(a);
            if (res.two_sample) {
                const auto b = bar_values(control_ratios, idx);
                bar.n_control = b.size();
                if (!b.empty()) bar.mean_control_ratio = mean_of(b);
                bar.test = welch_ttest(a, b);
            } else {
                bar.test = one_sample_ttest(a, 1.0);
            }
            any = any || bar.test.has_value();
            res.bars.push_back(std::move(bar));
        }
        if (res.bars.empty())
            res.diagnostic = "ref offset " + std::to_string(ref) + " h leaves no bars within the " +
                             std::to_string(horizon) + " h horizon";
        else if (!any)
            res.diagnostic = "every bar is absent: fewer than two ratios or zero variance at each lead time";
        results.push_back(std::move(res));
    }
    return results;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    const auto cp = table.column("patient_id");
    const auto ce = table.column("event_time_iso");
    const auto ck = table.find_column("kind");
    const auto cs = table.find_column("surgery_end_iso");
    std::vector<ManifestRow> rows;
    for (const auto& r : table.rows) {
        ManifestRow m;
        m.patient_id = r[cp];
        m.event_time = parse_iso(r[ce]);
        if (ck && !r[*ck].empty()) m.kind = event_kind_from_string(r[*ck]);
        if (cs && !r[*cs].empty()) m.surgery_end = parse_iso(r[*cs]);
        rows.push_back(std::move(m));
    }
    return rows;
}

void write_manifest(std::span<const ManifestRow> rows, const std::filesystem::path& path) {
    CsvWriter w(path, {"patient_id", "event_time_iso", "kind", "surgery_end_iso"});
    for (const auto& r : rows) {
        w.field(r.patient_id).field(format_iso(r.event_time)).field(to_string(r.kind));
        w.field(r.surgery_end ? format_iso(*r.surgery_end) : std::string()).end_row();
    }
}

void write_events_csv(std::span<const ClinicalEvent> events, const std::filesystem::path& path) {
    CsvWriter w(path, {"patient_id", "event_time_iso", "kind", "location"});
    for (const auto& e : events)
        w.field(e.patient_id).field(format_iso(e.event_time)).field(to_string(e.kind)).field(to_string(e.location)).end_row();
}

void write_results_csv(const CohortResult& result, const std::filesystem::path& path) {
    CsvWriter w(path, {"lead_time_h", "mean_ratio", "N", "t", "df", "p", "stars", "N_control", "mean_control_ratio"});
    for (const auto& b : result.bars) {
        w.field(b.lead_time_h).field(b.mean_ratio).field(b.n);
        if (b.test)
            w.field(b.test->t).field(b.test->df).field(b.test->p).field(b.test->stars);
        else
            w.field(std::string()).field(std::string()).field(std::string()).field(std::string());
        if (result.two_sample)
            w.field(b.n_control).field(b.mean_control_ratio);
        else
            w.field(std::string()).field(std::string());
        w.end_row();
    }
}

void write_bins_csv(std::span<const PatientBins> cohort, const std::filesystem::path& path) {
    CsvWriter w(path, {"patient_id", "lead_time_h", "mean_rr", "n_minutes"});
    for (const auto* p : sorted_by_id(cohort))
        for (const auto& b : p->bins) w.field(p->patient_id).field(b.lead_time_h).field(b.mean_rr).field(b.n_minutes).end_row();
}

void write_controls_csv(const MatchResult& result, const std::filesystem::path& path) {
    CsvWriter w(path, {"patient_id", "case_id", "pseudo_event_time_iso", "elapsed_h"});
    for (const auto& c : result.controls)
        w.field(c.patient_id).field(c.case_id).field(format_iso(c.pseudo_event_time))
            .field(static_cast<double>(c.elapsed.count()) / static_cast<double>(kHour.count()))
            .end_row();
}

ChartTable read_chart_csv(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    const auto cp = table.column("patient_id");
    const auto ct = table.column("time_iso");
    const auto ck = table.column("key");
    const auto cv = table.column("value");
    ChartTable out;
    for (const auto& r : table.rows) {
        const Timestamp t = parse_iso(r[ct]);
        if (r[ck] == "oxygen_device")
            out.chart[r[cp]].push_back({t, r[cv]});
        else
            out.device[r[cp]].push_back({t, r[ck], parse_cell_double(r[cv], "value")});
    }
    return out;
}

}  // namespace edr::clinical
