#include "edr/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "edr/csv.hpp"

namespace edr {

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

void check_pairs(std::span<const double> preds, std::span<const double> labels) {
    if (preds.empty()) throw std::invalid_argument("metrics need at least one prediction");
    if (preds.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
}

}  // namespace

double mae(std::span<const double> preds, std::span<const double> labels) {
    check_pairs(preds, labels);
    std::vector<double> err(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) err[i] = std::fabs(preds[i] - labels[i]);
    return pairwise_sum(err) / static_cast<double>(err.size());
}

double r2(std::span<const double> preds, std::span<const double> labels) {
    check_pairs(preds, labels);
    const double mean = pairwise_sum(labels) / static_cast<double>(labels.size());
    std::vector<double> res(preds.size()), tot(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        res[i] = (labels[i] - preds[i]) * (labels[i] - preds[i]);
        tot[i] = (labels[i] - mean) * (labels[i] - mean);
    }
    const double ss_tot = pairwise_sum(tot);
    if (!(ss_tot > 0)) throw std::domain_error("R2 undefined: labels have zero variance");
    return 1.0 - pairwise_sum(res) / ss_tot;
}

double DensityHistogram::display(std::size_t label_bin, std::size_t pred_bin) const {
    return std::log10(static_cast<double>(count(label_bin, pred_bin)) + 1.0);
}

DensityHistogram density_histogram(std::span<const double> preds, std::span<const double> labels, double lo, double hi,
                                   double width) {
    if (preds.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
    if (!(hi > lo) || !(width > 0)) throw std::invalid_argument("histogram range must be non-empty");
    DensityHistogram h;
    h.lo = lo;
    h.hi = hi;
    h.width = width;
    h.bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    h.counts.assign(h.bins * h.bins, 0);
    auto bin = [&](double v, bool& clamped) {
        if (v < lo || v > hi || !std::isfinite(v)) clamped = true;
        if (!(v >= lo)) return std::size_t{0};
        const auto k = static_cast<std::size_t>(std::floor((v - lo) / width));
        return std::min(k, h.bins - 1);
    };
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool clamped = false;
        const std::size_t lb = bin(labels[i], clamped);
        const std::size_t pb = bin(preds[i], clamped);
        ++h.counts[lb * h.bins + pb];
        if (clamped) ++h.out_of_range;
        ++h.total;
    }
    return h;
}

RrHistogram rr_histogram(std::span<const double> values, const std::string& source, std::size_t n_bins) {
    RrHistogram h;
    h.source = source;
    h.counts.assign(n_bins, 0);
    for (double v : values) {
        const double k = std::floor(v);
        if (std::isfinite(v) && k >= 0 && k < static_cast<double>(n_bins))
            ++h.counts[static_cast<std::size_t>(k)];
        else
            ++h.out_of_range;
    }
    return h;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : per_source) {
        nlohmann::json j = {{"source", s.source}, {"n", s.n}, {"mae_bpm", s.mae}};
        j["r2"] = s.r2 ? nlohmann::json(*s.r2) : nlohmann::json();
        sources.push_back(j);
    }
    return {{"n_examples", n_examples},
            {"mae_bpm", mae_bpm},
            {"r2", r2 ? nlohmann::json(*r2) : nlohmann::json()},
            {"per_source", sources},
            {"histogram",
             {{"lo", histogram.lo},
              {"hi", histogram.hi},
              {"width", histogram.width},
              {"bins", histogram.bins},
              {"total", histogram.total},
              {"out_of_range", histogram.out_of_range}}}};
}

EvalReport evaluate(std::span<const MinuteExample> examples, std::span<const double> preds) {
    if (examples.size() != preds.size()) throw std::invalid_argument("one prediction per example required");
    std::vector<double> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(e.label);

    EvalReport r;
    r.n_examples = examples.size();
    r.mae_bpm = mae(preds, labels);
    try {
        r.r2 = edr::r2(preds, labels);
    } catch (const std::domain_error&) {
    }
    r.histogram = density_histogram(preds, labels);

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_source;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        auto& [p, l] = by_source[to_string(examples[i].source)];
        p.push_back(preds[i]);
        l.push_back(labels[i]);
    }
    for (const auto& [name, pl] : by_source) {
        SourceMetrics m;
        m.source = name;
        m.n = pl.first.size();
        m.mae = mae(pl.first, pl.second);
        try {
            m.r2 = edr::r2(pl.first, pl.second);
        } catch (const std::domain_error&) {
        }
        r.per_source.push_back(m);
    }
    return r;
}

void write_eval_report(const EvalReport& report, std::span<const MinuteExample> examples, std::span<const double> preds,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "eval_report.json");
        if (!out) throw DataError("cannot write " + (dir / "eval_report.json").string());
        out << report.to_json().dump(2) << '\n';
    }
    {
        const auto& h = report.histogram;
        CsvWriter w(dir / "density_histogram.csv", {"label_bin", "pred_bin", "count", "display"});
        for (std::size_t a = 0; a < h.bins; ++a)
            for (std::size_t b = 0; b < h.bins; ++b)
                w.field(h.bin_start(a)).field(h.bin_start(b)).field(h.count(a, b)).field(h.display(a, b)).end_row();
    }
    CsvWriter w(dir / "predictions.csv", {"patient_id", "lead", "start_time_iso", "source", "label_bpm", "pred_bpm"});
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        w.field(e.patient_id).field(e.lead_name).field(format_iso(e.start_time)).field(to_string(e.source));
        w.field(e.label).field(preds[i]).end_row();
    }
}

void write_rr_histogram(const RrHistogram& hist, const std::filesystem::path& path) {
    CsvWriter w(path, {"source", "bin_bpm", "count"});
    for (std::size_t k = 0; k < hist.counts.size(); ++k) w.field(hist.source).field(k).field(hist.counts[k]).end_row();
}

namespace {

std::size_t lead_rank(const std::string& lead, const std::vector<std::string>& priority) {
    auto it = std::find(priority.begin(), priority.end(), lead);
    return it == priority.end() ? priority.size() : static_cast<std::size_t>(it - priority.begin());
}

}  // namespace

RrTimeline annotate_timeline(const nn::ModelState& model, std::span<const EcgMinute> minutes,
                             std::span<const RrSample> labels, const AnnotateOptions& options) {
    RrTimeline tl;
    if (minutes.empty()) return tl;
    tl.patient_id = minutes.front().patient_id;

    std::map<std::int64_t, const EcgMinute*> chosen;
    for (const auto& m : minutes) {
        if (m.patient_id != tl.patient_id) throw DataError("annotate_timeline expects minutes of a single patient");
        auto [it, inserted] = chosen.emplace(epoch_ms(m.start_time), &m);
        if (inserted) continue;
        const auto* cur = it->second;
        const auto rm = lead_rank(m.lead_name, options.lead_priority);
        const auto rc = lead_rank(cur->lead_name, options.lead_priority);
        if (rm < rc || (rm == rc && m.lead_name < cur->lead_name)) it->second = &m;
    }

    std::vector<MinuteExample> batch;
    batch.reserve(chosen.size());
    for (const auto& [ms, m] : chosen) {
        MinuteExample e;
        e.patient_id = m->patient_id;
        e.lead_name = m->lead_name;
        e.start_time = m->start_time;
        e.ecg.assign(m->samples.begin(), m->samples.end());
        batch.push_back(std::move(e));
    }
    const auto preds = nn::predict(model, batch, options.precision);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        TimelinePoint p;
        p.minute = batch[i].start_time;
        p.pred_bpm = preds[i];
        if (!labels.empty()) {
            if (auto lab = aggregate_label(labels, p.minute); lab && accept_label(*lab).accepted) p.label_bpm = lab->mean_rr;
        }
        tl.points.push_back(p);
    }
    add_rolling_average(tl, options.rolling_minutes, options.min_occupancy);
    return tl;
}

RrTimeline annotate_records(const nn::ModelState& model, std::span<const WaveformRecord> records,
                            std::span<const RrSample> labels, const AnnotateOptions& options) {
    std::vector<EcgMinute> minutes;
    for (const auto& rec : records)
        for (std::size_t lead = 0; lead < rec.leads.size(); ++lead) {
            auto m = extract_minutes(rec, lead);
            std::move(m.begin(), m.end(), std::back_inserter(minutes));
        }
    RrTimeline tl = annotate_timeline(model, minutes, labels, options);
    if (tl.patient_id.empty() && !records.empty()) tl.patient_id = records.front().patient_id;
    return tl;
}

void add_rolling_average(RrTimeline& timeline, std::size_t window, double min_occupancy) {
    auto& pts = timeline.points;
    const auto half = static_cast<std::int64_t>(window / 2) * kMinute.count();
    const double need = min_occupancy * static_cast<double>(window);
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::int64_t t = epoch_ms(pts[i].minute);
        while (epoch_ms(pts[lo].minute) < t - half) ++lo;
        while (hi < pts.size() && epoch_ms(pts[hi].minute) <= t + half) ++hi;
        const std::size_t n = hi - lo;
        if (static_cast<double>(n) >= need && n > 0) {
            std::vector<double> v;
            v.reserve(n);
            for (std::size_t k = lo; k < hi; ++k) v.push_back(pts[k].pred_bpm);
            pts[i].rolling_bpm = pairwise_sum(v) / static_cast<double>(n);
        } else {
            pts[i].rolling_bpm.reset();
        }
    }
}

void write_timeline_csv(const RrTimeline& timeline, const std::filesystem::path& path) {
    CsvWriter w(path, {"minute_iso", "pred_bpm", "label_bpm", "rolling_bpm"});
    for (const auto& p : timeline.points)
        w.field(format_iso(p.minute)).field(p.pred_bpm).field(p.label_bpm).field(p.rolling_bpm).end_row();
}

RrTimeline read_timeline_csv(const std::filesystem::path& path, const std::string& patient_id) {
    const auto table = read_csv(path);
    const auto cm = table.column("minute_iso");
    const auto cp = table.column("pred_bpm");
    const auto cl = table.find_column("label_bpm");
    const auto cr = table.find_column("rolling_bpm");
    RrTimeline tl;
    tl.patient_id = patient_id;
    for (const auto& row : table.rows) {
        TimelinePoint p;
        p.minute = parse_iso(row[cm]);
        p.pred_bpm = parse_cell_double(row[cp], "pred_bpm");
        if (cl && !row[*cl].empty()) p.label_bpm = parse_cell_double(row[*cl], "label_bpm");
        if (cr && !row[*cr].empty()) p.rolling_bpm = parse_cell_double(row[*cr], "rolling_bpm");
        if (!tl.points.empty() && p.minute <= tl.points.back().minute)
            throw DataError(path.string() + ": minutes must be strictly increasing");
        tl.points.push_back(p);
    }
    return tl;
}

}  // namespace edr
