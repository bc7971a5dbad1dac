#include "edr/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "edr/csv.hpp"

namespace edr {

namespace {

struct Field {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw UsageError(key + ": expected a number, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(key + ": expected true or false, got '" + v + "'");
}

template <typename M>
Field dbl(std::string key, M RunConfig::*section, double M::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { c.*section.*member = to_double(key, v); },
            [=](const RunConfig& c) { return format_double(c.*section.*member); }};
}

template <typename M, typename I>
Field integer(std::string key, M RunConfig::*section, I M::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { c.*section.*member = static_cast<I>(to_u64(key, v)); },
            [=](const RunConfig& c) { return std::to_string(c.*section.*member); }};
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

const std::vector<Field>& registry() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f;
        f.push_back({"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }});
        f.push_back({"run.out", [](RunConfig& c, const std::string& v) { c.out = v; },
                     [](const RunConfig& c) { return c.out.string(); }});
        f.push_back({"paths.records", [](RunConfig& c, const std::string& v) { c.records = v; },
                     [](const RunConfig& c) { return c.records.string(); }});

        f.push_back(dbl("curation.max_abs_mv", &RunConfig::curation, &CurationRules::max_abs_mv));
        f.push_back(dbl("curation.flat_ptp_mv", &RunConfig::curation, &CurationRules::flat_ptp_mv));
        f.push_back(dbl("curation.min_rr_floor", &RunConfig::curation, &CurationRules::min_rr_floor));
        f.push_back(dbl("curation.mean_rr_low", &RunConfig::curation, &CurationRules::mean_rr_low));
        f.push_back(dbl("curation.mean_rr_high", &RunConfig::curation, &CurationRules::mean_rr_high));
        f.push_back(dbl("curation.max_spread", &RunConfig::curation, &CurationRules::max_spread));
        f.push_back(dbl("curation.max_std", &RunConfig::curation, &CurationRules::max_std));

        f.push_back(dbl("split.train", &RunConfig::split, &SplitFractions::train));
        f.push_back(dbl("split.tune", &RunConfig::split, &SplitFractions::tune));
        f.push_back(dbl("split.test", &RunConfig::split, &SplitFractions::test));

        f.push_back({"model.spec", [](RunConfig& c, const std::string& v) { c.model = v; },
                     [](const RunConfig& c) { return c.model; }});
        f.push_back({"model.dropout", [](RunConfig& c, const std::string& v) { c.dropout = to_double("model.dropout", v); },
                     [](const RunConfig& c) { return format_double(c.dropout); }});

        f.push_back(integer("train.epochs", &RunConfig::train, &nn::TrainConfig::epochs));
        f.push_back(integer("train.batch_size", &RunConfig::train, &nn::TrainConfig::batch_size));
        f.push_back(dbl("train.learning_rate", &RunConfig::train, &nn::TrainConfig::learning_rate));
        f.push_back(dbl("train.lr_decay", &RunConfig::train, &nn::TrainConfig::lr_decay));
        f.push_back(dbl("train.weight_decay", &RunConfig::train, &nn::TrainConfig::weight_decay));
        f.push_back(dbl("train.beta1", &RunConfig::train, &nn::TrainConfig::beta1));
        f.push_back(dbl("train.beta2", &RunConfig::train, &nn::TrainConfig::beta2));
        f.push_back(dbl("train.adam_eps", &RunConfig::train, &nn::TrainConfig::adam_eps));
        f.push_back({"train.lead_policy",
                     [](RunConfig& c, const std::string& v) { c.train.lead_policy = nn::lead_policy_from_string(v); },
                     [](const RunConfig& c) { return nn::to_string(c.train.lead_policy); }});
        f.push_back({"train.precision",
                     [](RunConfig& c, const std::string& v) { c.train.precision = nn::precision_from_string(v); },
                     [](const RunConfig& c) { return nn::to_string(c.train.precision); }});

        f.push_back(integer("synth.patients", &RunConfig::synth, &SynthSection::patients));
        f.push_back(integer("synth.minutes", &RunConfig::synth, &SynthSection::minutes));
        f.push_back(dbl("synth.rr_low", &RunConfig::synth, &SynthSection::rr_low));
        f.push_back(dbl("synth.rr_high", &RunConfig::synth, &SynthSection::rr_high));
        f.push_back(dbl("synth.am_depth", &RunConfig::synth, &SynthSection::am_depth));
        f.push_back(dbl("synth.rsa_depth", &RunConfig::synth, &SynthSection::rsa_depth));
        f.push_back(dbl("synth.noise_mv", &RunConfig::synth, &SynthSection::noise_mv));

        f.push_back({"cohort.horizon_h",
                     [](RunConfig& c, const std::string& v) {
                         c.cohort.horizon_h = static_cast<int>(to_u64("cohort.horizon_h", v));
                     },
                     [](const RunConfig& c) { return std::to_string(c.cohort.horizon_h); }});
        f.push_back({"cohort.ref_offsets",
                     [](RunConfig& c, const std::string& v) {
                         std::vector<int> out;
                         std::stringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ','))
                             out.push_back(static_cast<int>(to_u64("cohort.ref_offsets", trim(item))));
                         if (out.empty()) throw UsageError("cohort.ref_offsets: empty list");
                         c.cohort.ref_offsets = out;
                     },
                     [](const RunConfig& c) { return join_ints(c.cohort.ref_offsets); }});
        f.push_back(integer("cohort.control_ratio", &RunConfig::cohort, &CohortSection::control_ratio));
        f.push_back(dbl("cohort.grace_min", &RunConfig::cohort, &CohortSection::grace_min));
        f.push_back(integer("cohort.min_minutes", &RunConfig::cohort, &CohortSection::min_minutes));
        f.push_back({"cohort.use_labels",
                     [](RunConfig& c, const std::string& v) { c.cohort.use_labels = to_bool("cohort.use_labels", v); },
                     [](const RunConfig& c) { return std::string(c.cohort.use_labels ? "true" : "false"); }});
        f.push_back(integer("cohort.patients", &RunConfig::cohort, &CohortSection::patients));
        f.push_back({"cohort.schedule", [](RunConfig& c, const std::string& v) { c.cohort.schedule = v; },
                     [](const RunConfig& c) { return c.cohort.schedule; }});
        f.push_back(dbl("cohort.dropout", &RunConfig::cohort, &CohortSection::dropout));

        f.push_back(integer("annotate.rolling_minutes", &RunConfig::annotate, &AnnotateSection::rolling_minutes));
        f.push_back(dbl("annotate.min_occupancy", &RunConfig::annotate, &AnnotateSection::min_occupancy));
        return f;
    }();
    return fields;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : registry())
        if (f.key == key) return f;
    throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line, section;
    for (int lineno = 1; std::getline(ss, line); ++lineno) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (t.front() == '[') {
            if (t.back() != ']') throw UsageError(where + ": unterminated section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
        if (section.empty()) throw UsageError(where + ": key outside a [section]");
        const std::string key = section + "." + trim(std::string_view(t).substr(0, eq));
        try {
            c.set(key, trim(std::string_view(t).substr(eq + 1)), false);
        } catch (const UsageError& e) {
            throw UsageError(where + ": " + e.what());
        }
    }
    return c;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value, bool record) {
    find_field(dotted_key).set(*this, value);
    if (record) overrides.push_back(dotted_key + "=" + value);
}

std::string RunConfig::get(const std::string& dotted_key) const { return find_field(dotted_key).get(*this); }

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> k;
    for (const auto& f : registry()) k.push_back(f.key);
    return k;
}

nn::ModelSpec RunConfig::model_spec() const {
    nn::ModelSpec spec;
    if (model == "desk" || model == "paper" || model == "tiny") {
        spec = nn::ModelSpec::named(model);
    } else {
        std::ifstream in(model);
        if (!in) throw UsageError("model.spec: '" + model + "' is neither desk, paper, tiny nor a readable JSON file");
        try {
            spec = nn::ModelSpec::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("model.spec: " + std::string(e.what()));
        }
    }
    spec.dropout_p = dropout;
    spec.validate();
    return spec;
}

std::string RunConfig::to_ini() const {
    std::string out, section;
    for (const auto& f : registry()) {
        const auto dot = f.key.find('.');
        const std::string s = f.key.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
    }
    return out;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : registry()) {
        const auto dot = f.key.find('.');
        j[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(*this);
    }
    j["overrides"] = overrides;
    return j;
}

}  // namespace edr
