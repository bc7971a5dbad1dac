// edr: command-line driver for the ECG respiratory-rate pipeline.
//
//   synth -> curate -> split -> train -> evaluate | annotate
//   cohort (from timelines, a chart export, or --simulate)
//   gradcheck, config
//
// Every command writes <out>/manifests/<command>.json.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "edr/clinical.hpp"
#include "edr/common.hpp"
#include "edr/csv.hpp"
#include "edr/curation.hpp"
#include "edr/evalstats.hpp"
#include "edr/nn/checkpoint.hpp"
#include "edr/nn/gradcheck.hpp"
#include "edr/nn/model.hpp"
#include "edr/nn/train.hpp"
#include "edr/run_config.hpp"
#include "edr/synthgen.hpp"
#include "edr/waveform_io.hpp"

#ifndef EDR_VERSION
#define EDR_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace edr;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumeric = 4 };

struct Context {
    RunConfig config;
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json extra = nlohmann::json::object();

    fs::path out() const { return config.out; }
    fs::path records_dir() const { return config.records.empty() ? out() / "records" : config.records; }
    fs::path dataset_dir() const { return out() / "dataset"; }
    fs::path checkpoint_dir() const { return out() / "checkpoint"; }
};

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<fs::path> record_headers(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw PrerequisiteError(dir.string(), "synth");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".hea") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw PrerequisiteError((dir / "*.hea").string(), "synth");
    return out;
}

fs::path labels_for(const fs::path& header) {
    return header.parent_path() / (header.stem().string() + "_rr.csv");
}

// --- synth ---------------------------------------------------------------

void write_cohort(const std::vector<CohortPatient>& patients, const fs::path& dir, const std::string& manifest_name) {
    fs::create_directories(dir / "timelines");
    std::vector<clinical::ManifestRow> rows;
    for (const auto& p : patients) {
        write_timeline_csv(p.truth_timeline(), dir / "timelines" / (p.patient_id + ".csv"));
        rows.push_back({p.patient_id, p.event_time, clinical::EventKind::RapidResponseIntubation, std::nullopt});
    }
    clinical::write_manifest(rows, dir / manifest_name);
}

std::vector<CohortPatient> simulate_cohort(const RunConfig& c, const std::string& schedule, std::uint64_t seed,
                                           const std::string& id_prefix) {
    CohortOptions opts;
    opts.dropout_low = opts.dropout_high = c.cohort.dropout;
    opts.hours = c.cohort.horizon_h + 1.0;
    auto patients = synth_cohort(c.cohort.patients, Schedule::parse(schedule), seed, opts);
    for (auto& p : patients) p.patient_id = id_prefix + p.patient_id.substr(1);
    return patients;
}

int cmd_synth(Context& ctx, bool cohort, bool with_controls) {
    const auto& c = ctx.config;
    if (cohort) {
        const fs::path dir = ctx.out() / "cohort_input";
        const auto cases = simulate_cohort(c, c.cohort.schedule, c.seed, "P");
        write_cohort(cases, dir, "manifest.csv");
        if (with_controls) write_cohort(simulate_cohort(c, "flat", mix64(c.seed + 1), "C"), dir, "controls.csv");
        log("wrote " + std::to_string(cases.size()) + " cohort timelines to " + dir.string());
        return kOk;
    }
    PopulationOptions po;
    po.rr_low = c.synth.rr_low;
    po.rr_high = c.synth.rr_high;
    po.base.am_depth = c.synth.am_depth;
    po.base.rsa_depth = c.synth.rsa_depth;
    po.base.noise_std_mv = c.synth.noise_mv;
    const fs::path dir = ctx.records_dir();
    fs::create_directories(dir);
    for (std::size_t i = 0; i < c.synth.patients; ++i) {
        const auto rec = synth_population_patient(i, c.synth.minutes, c.seed, po);
        const auto header = write_wfdb(rec.record, dir, SampleFormat::Fmt16);
        write_truth_csv(rec, labels_for(header));
    }
    log("wrote " + std::to_string(c.synth.patients) + " records of " + std::to_string(c.synth.minutes) +
        " minutes to " + dir.string());
    return kOk;
}

// --- curate / split ------------------------------------------------------

int cmd_curate(Context& ctx) {
    const auto& rules = ctx.config.curation;
    std::vector<StoredExample> stored;
    std::vector<MinuteRejection> rejections;
    std::size_t unlabeled_records = 0;
    for (const auto& header : record_headers(ctx.records_dir())) {
        const WaveformRecord rec = read_wfdb(header);
        if (!fs::exists(labels_for(header))) {
            ++unlabeled_records;
            continue;
        }
        const auto series = read_truth_csv(labels_for(header), rec.start_time);
        std::vector<EcgMinute> minutes;
        for (std::size_t lead = 0; lead < rec.leads.size(); ++lead) {
            auto m = extract_minutes(rec, lead, rules, &rejections);
            std::move(m.begin(), m.end(), std::back_inserter(minutes));
        }
        auto aligned = align(minutes, series, LabelSource::Synthetic, rules);
        for (auto& e : aligned.examples) stored.push_back({std::move(e), std::nullopt});
        rejections.insert(rejections.end(), aligned.rejections.begin(), aligned.rejections.end());
        for (const auto& w : aligned.warnings) log("warning: " + w);
    }
    if (unlabeled_records) log("warning: " + std::to_string(unlabeled_records) + " records without *_rr.csv labels skipped");
    if (stored.empty()) throw DataError("curation produced no examples");
    write_dataset(ctx.dataset_dir(), stored);
    write_rejection_log(ctx.dataset_dir(), rejections);
    ctx.extra["examples"] = stored.size();
    ctx.extra["rejections"] = rejections.size();
    log("curated " + std::to_string(stored.size()) + " examples, " + std::to_string(rejections.size()) + " rejections");
    return kOk;
}

int cmd_split(Context& ctx) {
    auto stored = read_dataset(ctx.dataset_dir());
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::set<std::string>> patients;
    for (auto& s : stored) {
        s.split = assign_split(s.example.patient_id, ctx.config.seed, ctx.config.split);
        ++counts[to_string(*s.split)];
        patients[to_string(*s.split)].insert(s.example.patient_id);
    }
    write_manifest(ctx.dataset_dir(), stored);
    for (const char* name : {"train", "tune", "test"}) {
        log(std::string(name) + ": " + std::to_string(counts[name]) + " examples, " +
            std::to_string(patients[name].size()) + " patients");
        if (!counts[name]) log(std::string("warning: split '") + name + "' is empty");
        ctx.extra[name] = counts[name];
    }
    return kOk;
}

// --- train / evaluate / annotate -------------------------------------------

std::vector<MinuteExample> split_examples(std::vector<StoredExample>& stored, SplitName which) {
    std::vector<MinuteExample> out;
    for (auto& s : stored) {
        if (!s.split) throw PrerequisiteError("split assignments in dataset/manifest.csv", "split");
        if (*s.split == which) out.push_back(std::move(s.example));
    }
    return out;
}

int cmd_train(Context& ctx) {
    auto stored = read_dataset(ctx.dataset_dir());
    auto stored_copy = stored;
    const auto train_set = split_examples(stored, SplitName::Train);
    const auto tune_set = split_examples(stored_copy, SplitName::Tune);
    stored.clear();
    stored_copy.clear();

    nn::TrainConfig tc = ctx.config.train;
    tc.seed = ctx.config.seed;
    tc.snapshot_dir = ctx.out() / "snapshot";
    tc.on_epoch = [](const nn::EpochRecord& r) {
        log("epoch " + std::to_string(r.epoch) + " lr " + format_double(r.learning_rate) + " train_mse " +
            fixed(r.train_mse, 4) + " tune_mse " + fixed(r.tune_mse, 4) + " (" + fixed(r.seconds, 1) + " s)");
    };
    const auto spec = ctx.config.model_spec();
    log("training " + spec.name + " (" + std::to_string(nn::count_params(spec)) + " params) on " +
        std::to_string(train_set.size()) + " examples");
    const auto result = nn::train(train_set, tune_set, spec, tc);

    nlohmann::json metrics = {{"best_epoch", result.best_epoch}, {"train_examples", train_set.size()},
                              {"tune_examples", tune_set.size()}};
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& r : result.curve)
        curve.push_back({{"epoch", r.epoch}, {"learning_rate", r.learning_rate}, {"train_mse", r.train_mse},
                         {"tune_mse", r.tune_mse}, {"train_segments", r.train_segments}});
    metrics["curve"] = curve;
    nn::save_checkpoint(result.best_state, ctx.checkpoint_dir(), metrics);
    nn::write_loss_curve(result.curve, ctx.out() / "loss_curve.csv");
    ctx.extra["best_epoch"] = result.best_epoch;
    log("checkpoint (epoch " + std::to_string(result.best_epoch) + ") written to " + ctx.checkpoint_dir().string());
    return kOk;
}

int cmd_evaluate(Context& ctx, const std::string& split) {
    const auto state = nn::load_checkpoint(ctx.checkpoint_dir());
    auto stored = read_dataset(ctx.dataset_dir());
    const auto examples = split_examples(stored, split_from_string(split));
    if (examples.empty()) throw DataError("split '" + split + "' holds no examples");
    const auto preds = nn::predict(state, examples, ctx.config.train.precision);
    const auto report = evaluate(examples, preds);
    write_eval_report(report, examples, preds, ctx.out() / "eval");
    ctx.extra["report"] = report.to_json();
    log(split + ": n=" + std::to_string(report.n_examples) + " MAE " + fixed(report.mae_bpm) + " bpm, R2 " +
        (report.r2 ? fixed(*report.r2) : std::string("undefined")));
    return kOk;
}

int cmd_annotate(Context& ctx, const std::string& patient) {
    const auto state = nn::load_checkpoint(ctx.checkpoint_dir());
    std::vector<WaveformRecord> records;
    std::vector<RrSample> labels;
    for (const auto& header : record_headers(ctx.records_dir())) {
        auto rec = read_wfdb(header);
        if (rec.patient_id != patient) continue;
        if (fs::exists(labels_for(header))) {
            auto s = read_truth_csv(labels_for(header), rec.start_time);
            labels.insert(labels.end(), s.begin(), s.end());
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError("no records for patient '" + patient + "' in " + ctx.records_dir().string());
    std::sort(labels.begin(), labels.end(), [](const RrSample& a, const RrSample& b) { return a.time < b.time; });
    AnnotateOptions opts;
    opts.rolling_minutes = ctx.config.annotate.rolling_minutes;
    opts.min_occupancy = ctx.config.annotate.min_occupancy;
    opts.precision = ctx.config.train.precision;
    const auto tl = annotate_records(state, records, labels, opts);
    fs::create_directories(ctx.out() / "annotate");
    const fs::path path = ctx.out() / "annotate" / (patient + "_timeline.csv");
    write_timeline_csv(tl, path);
    log("annotated " + std::to_string(tl.points.size()) + " minutes -> " + path.string());
    return kOk;
}

// --- cohort ----------------------------------------------------------------

struct CohortOptionsCli {
    bool simulate = false;
    bool with_controls = false;
    std::string manifest;
    std::string controls;
    std::string timelines;
    std::string chart;
    std::string pool;
};

std::vector<clinical::PatientBins> bins_from_disk(const std::vector<clinical::ManifestRow>& rows,
                                                  const fs::path& timeline_dir, const clinical::BinOptions& opts) {
    std::vector<clinical::PatientBins> out;
    for (const auto& r : rows) {
        const fs::path p = timeline_dir / (r.patient_id + ".csv");
        if (!fs::exists(p)) throw PrerequisiteError(p.string(), "annotate");
        out.push_back({r.patient_id, clinical::hourly_bins(read_timeline_csv(p, r.patient_id), r.event_time, opts)});
    }
    return out;
}

std::vector<clinical::ControlCandidate> read_pool(const fs::path& path) {
    const auto t = read_csv(path);
    const auto cp = t.column("patient_id"), cs = t.column("surgery_end_iso"), c0 = t.column("telemetry_start_iso"),
               c1 = t.column("telemetry_end_iso");
    std::vector<clinical::ControlCandidate> out;
    for (const auto& r : t.rows) out.push_back({r[cp], parse_iso(r[cs]), parse_iso(r[c0]), parse_iso(r[c1])});
    return out;
}

int cmd_cohort(Context& ctx, const CohortOptionsCli& o) {
    const auto& c = ctx.config;
    const fs::path dir = ctx.out() / "cohort";
    fs::create_directories(dir);
    clinical::BinOptions bopts;
    bopts.horizon_h = c.cohort.horizon_h;
    bopts.min_minutes = c.cohort.min_minutes;
    bopts.use_labels = c.cohort.use_labels;

    std::vector<clinical::PatientBins> cases, controls;
    if (o.simulate) {
        for (const auto& p : simulate_cohort(c, c.cohort.schedule, c.seed, "P"))
            cases.push_back({p.patient_id, clinical::hourly_bins(p.truth_timeline(), p.event_time, bopts)});
        if (o.with_controls)
            for (const auto& p : simulate_cohort(c, "flat", mix64(c.seed + 1), "C"))
                controls.push_back({p.patient_id, clinical::hourly_bins(p.truth_timeline(), p.event_time, bopts)});
    } else {
        std::vector<clinical::ManifestRow> rows;
        if (!o.chart.empty()) {
            clinical::IntubationRules rules;
            rules.grace = seconds_ms(c.cohort.grace_min * 60.0);
            const auto table = clinical::read_chart_csv(o.chart);
            std::vector<clinical::ClinicalEvent> events;
            for (const auto& [pid, chart] : table.chart) {
                auto it = table.device.find(pid);
                const std::vector<clinical::DeviceEntry> none;
                const auto& dev = it == table.device.end() ? none : it->second;
                if (auto e = clinical::detect_intubation(pid, chart, dev, clinical::EventKind::RapidResponseIntubation,
                                                         clinical::Location::Floor, rules))
                    events.push_back(*e);
            }
            clinical::write_events_csv(events, dir / "events.csv");
            log("detected " + std::to_string(events.size()) + " intubation events");
            for (const auto& e : events) rows.push_back({e.patient_id, e.event_time, e.kind, e.surgery_end});
        }
        const fs::path manifest = o.manifest.empty() ? ctx.out() / "cohort_input" / "manifest.csv" : fs::path(o.manifest);
        if (rows.empty()) {
            if (!fs::exists(manifest)) throw PrerequisiteError(manifest.string(), "synth --cohort");
            rows = clinical::read_manifest(manifest);
        }
        const fs::path timelines = o.timelines.empty() ? manifest.parent_path() / "timelines" : fs::path(o.timelines);
        cases = bins_from_disk(rows, timelines, bopts);

        std::vector<clinical::ManifestRow> control_rows;
        if (!o.pool.empty()) {
            std::vector<clinical::ClinicalEvent> events;
            for (const auto& r : rows) events.push_back({r.patient_id, r.event_time, r.kind, clinical::Location::Floor, r.surgery_end});
            clinical::MatchOptions mopts;
            mopts.ratio = c.cohort.control_ratio;
            mopts.coverage = kHour * static_cast<std::int64_t>(c.cohort.horizon_h);
            const auto match = clinical::match_controls(events, read_pool(o.pool), c.seed, mopts);
            for (const auto& w : match.warnings) log("warning: " + w);
            clinical::write_controls_csv(match, dir / "controls.csv");
            ctx.extra["achieved_control_ratio"] = match.achieved_ratio;
            for (const auto& m : match.controls)
                control_rows.push_back({m.patient_id, m.pseudo_event_time, clinical::EventKind::Reintubation, std::nullopt});
        } else if (!o.controls.empty()) {
            control_rows = clinical::read_manifest(o.controls);
        }
        if (!control_rows.empty()) controls = bins_from_disk(control_rows, timelines, bopts);
    }

    clinical::write_bins_csv(cases, dir / "bins.csv");
    const auto extremes = clinical::select_extreme_trajectories(cases);
    {
        CsvWriter w(dir / "extremes.csv", {"patient_id", "category"});
        for (const auto& p : extremes.persistently_low) w.field(p).field(std::string("persistently_low")).end_row();
        for (const auto& p : extremes.rapid_rise) w.field(p).field(std::string("rapid_rise")).end_row();
    }
    const auto results = clinical::cohort_analysis(cases, controls, c.cohort.ref_offsets);
    for (const auto& r : results) {
        clinical::write_results_csv(r, dir / ("results_ref" + std::to_string(r.ref_offset_h) + ".csv"));
        if (!r.diagnostic.empty()) log("ref " + std::to_string(r.ref_offset_h) + " h: " + r.diagnostic);
        std::string line = "ref " + std::to_string(r.ref_offset_h) + " h:";
        for (std::size_t i = 0; i < std::min<std::size_t>(r.bars.size(), 12); ++i) {
            const auto& b = r.bars[i];
            line += " t" + std::to_string(b.lead_time_h) + "=" + (b.mean_ratio ? fixed(*b.mean_ratio) : "-") +
                    (b.test ? b.test->stars : "");
        }
        log(line);
    }
    ctx.extra["cases"] = cases.size();
    ctx.extra["controls"] = controls.size();
    return kOk;
}

// --- gradcheck -------------------------------------------------------------

int cmd_gradcheck(Context& ctx, std::size_t per_tensor, bool linear, double threshold) {
    nn::GradCheckOptions opts;
    opts.per_tensor = per_tensor;
    opts.seed = ctx.config.seed;
    auto spec = ctx.config.model_spec();
    const auto r = linear ? nn::grad_check_linear(spec.input_length, opts) : nn::grad_check(spec, opts);
    nlohmann::json j = {{"spec", linear ? std::string("linear") : spec.name},
                        {"max_rel_error", r.max_rel_error},
                        {"worst", r.worst},
                        {"checked", r.checked},
                        {"threshold", threshold},
                        {"pass", r.max_rel_error < threshold}};
    fs::create_directories(ctx.out());
    std::ofstream(ctx.out() / "gradcheck.json") << j.dump(2) << '\n';
    ctx.extra["gradcheck"] = j;
    log("gradcheck " + j["spec"].get<std::string>() + ": max relative error " + format_double(r.max_rel_error) +
        " at " + r.worst + " over " + std::to_string(r.checked) + " entries");
    return r.max_rel_error < threshold ? kOk : kNumeric;
}

void write_run_manifest(const Context& ctx, double seconds, int status) {
    nlohmann::json j;
    j["command"] = ctx.command;
    j["argv"] = ctx.argv;
    j["seed"] = ctx.config.seed;
    j["config"] = ctx.config.to_json();
    j["versions"] = {{"edr", EDR_VERSION}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}};
    j["wall_seconds"] = seconds;
    j["exit_status"] = status;
    j["results"] = ctx.extra;
    fs::create_directories(ctx.out() / "manifests");
    std::ofstream(ctx.out() / "manifests" / (ctx.command + ".json")) << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECG-derived respiratory rate pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", EDR_VERSION);

    std::string config_path, out, spec, lead_policy;
    std::optional<std::uint64_t> seed;
    std::optional<int> ref_offset;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--out", out, "Artifact directory");
    app.add_option("--spec", spec, "Model spec: desk, paper, tiny or a JSON file");
    app.add_option("--ref-offset", ref_offset, "Baseline offset in hours for cohort ratios");
    app.add_option("--lead-policy", lead_policy, "random or all");
    app.add_option("--set", sets, "Override a config key: section.key=value");

    Context ctx;
    auto* synth = app.add_subcommand("synth", "Generate synthetic records with RR truth");
    bool synth_cohort_flag = false, synth_controls = false;
    synth->add_flag("--cohort", synth_cohort_flag, "Write cohort timelines and a manifest instead of records");
    synth->add_flag("--controls", synth_controls, "With --cohort, also write a flat control cohort");
    app.add_subcommand("curate", "Records and labels to a curated dataset");
    app.add_subcommand("split", "Assign patient-level train/tune/test splits");
    app.add_subcommand("train", "Train the regressor");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Metrics and histograms on one split");
    std::string eval_split = "test";
    evaluate_cmd->add_option("--split", eval_split, "train, tune or test");
    auto* annotate = app.add_subcommand("annotate", "Minute-by-minute timeline for one patient");
    std::string patient;
    annotate->add_option("--patient", patient, "Patient id")->required();
    auto* cohort = app.add_subcommand("cohort", "Pre-event respiratory-rate statistics");
    CohortOptionsCli co;
    cohort->add_flag("--simulate", co.simulate, "Use a synthetic cohort with known RR");
    cohort->add_flag("--with-controls", co.with_controls, "With --simulate, compare against a flat control cohort");
    cohort->add_option("--manifest", co.manifest, "Case manifest CSV");
    cohort->add_option("--controls", co.controls, "Control manifest CSV");
    cohort->add_option("--timelines", co.timelines, "Directory of <patient_id>.csv timelines");
    cohort->add_option("--chart", co.chart, "Chart export to detect intubation events from");
    cohort->add_option("--pool", co.pool, "Control candidates CSV for matching");
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    std::size_t per_tensor = 4;
    bool linear = false;
    double threshold = 1e-4;
    gradcheck->add_option("--per-tensor", per_tensor, "Entries per tensor, 0 for all");
    gradcheck->add_flag("--linear", linear, "Check a single linear layer instead");
    gradcheck->add_option("--threshold", threshold, "Pass threshold on the max relative error");
    app.add_subcommand("config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    int status = kOk;
    try {
        ctx.command = app.get_subcommands().front()->get_name();
        ctx.argv.assign(argv, argv + argc);
        if (!config_path.empty()) ctx.config = RunConfig::load(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + s + "'");
            ctx.config.set(s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) ctx.config.set("run.seed", std::to_string(*seed));
        if (!out.empty()) ctx.config.set("run.out", out);
        if (!spec.empty()) ctx.config.set("model.spec", spec);
        if (ref_offset) ctx.config.set("cohort.ref_offsets", std::to_string(*ref_offset));
        if (!lead_policy.empty()) ctx.config.set("train.lead_policy", lead_policy);

        const std::string& cmd = ctx.command;
        if (cmd == "config") {
            std::cout << ctx.config.to_ini();
            return kOk;
        }
        if (cmd == "synth") status = cmd_synth(ctx, synth_cohort_flag, synth_controls);
        else if (cmd == "curate") status = cmd_curate(ctx);
        else if (cmd == "split") status = cmd_split(ctx);
        else if (cmd == "train") status = cmd_train(ctx);
        else if (cmd == "evaluate") status = cmd_evaluate(ctx, eval_split);
        else if (cmd == "annotate") status = cmd_annotate(ctx, patient);
        else if (cmd == "cohort") status = cmd_cohort(ctx, co);
        else if (cmd == "gradcheck") status = cmd_gradcheck(ctx, per_tensor, linear, threshold);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const PrerequisiteError& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = kData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        status = kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        status = kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = kFailure;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_run_manifest(ctx, seconds, status);
    } catch (const std::exception& e) {
        std::cerr << "warning: could not write run manifest: " << e.what() << '\n';
    }
    return status;
}
