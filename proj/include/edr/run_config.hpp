#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edr/curation.hpp"
#include "edr/nn/model.hpp"
#include "edr/nn/train.hpp"

namespace edr {

struct SynthSection {
    std::size_t patients = 100;
    std::size_t minutes = 50;  // per patient
    double rr_low = 10.0;
    double rr_high = 30.0;
    double am_depth = 0.2;
    double rsa_depth = 0.05;
    double noise_mv = 0.05;
};

struct CohortSection {
    int horizon_h = 36;
    std::vector<int> ref_offsets{12};
    std::size_t control_ratio = 5;
    double grace_min = 5.0;
    std::size_t min_minutes = 20;
    bool use_labels = false;
    // simulation mode
    std::size_t patients = 128;
    std::string schedule = "ramp:20:10";
    double dropout = 0.2;
};

struct AnnotateSection {
    std::size_t rolling_minutes = 15;
    double min_occupancy = 0.5;
};

/// Everything a run needs. Loaded from an INI-style file with [sections]
/// and `key = value` lines; command-line flags go through set().
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out = "run";
    std::filesystem::path records;
    CurationRules curation;
    SplitFractions split;
    std::string model = "desk";  // desk | paper | tiny | path to a spec JSON
    double dropout = 0.3;
    nn::TrainConfig train;
    SynthSection synth;
    CohortSection cohort;
    AnnotateSection annotate;

    /// "section.key=value" for every set() call, in order.
    std::vector<std::string> overrides;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

    /// Throws UsageError for unknown keys or unparsable values.
    void set(const std::string& dotted_key, const std::string& value, bool record = true);
    std::string get(const std::string& dotted_key) const;
    static std::vector<std::string> keys();

    nn::ModelSpec model_spec() const;
    std::string to_ini() const;
    nlohmann::json to_json() const;
};

}  // namespace edr
