#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "edr/run_config.hpp"

using namespace edr;

TEST_CASE("defaults carry the published constants") {
    const RunConfig c;
    CHECK(c.curation.max_abs_mv == 60.0);
    CHECK(c.curation.flat_ptp_mv == 0.01);
    CHECK(c.curation.mean_rr_low == 10.0);
    CHECK(c.curation.mean_rr_high == 50.0);
    CHECK(c.curation.max_spread == 10.0);
    CHECK(c.curation.max_std == 2.0);
    CHECK(c.split.train == 0.8);
    CHECK(c.train.epochs == 5);
    CHECK(c.train.batch_size == 128);
    CHECK(c.train.learning_rate == 1e-3);
    CHECK(c.train.lr_decay == 10.0);
    CHECK(c.train.weight_decay == 5e-5);
    CHECK(c.train.lead_policy == nn::LeadPolicy::RandomLead);
    CHECK(c.dropout == 0.3);
    CHECK(c.cohort.horizon_h == 36);
    CHECK(c.cohort.ref_offsets == std::vector<int>{12});
    CHECK(c.cohort.control_ratio == 5);
    CHECK(c.cohort.grace_min == 5.0);
    CHECK(c.cohort.min_minutes == 20);
    CHECK(c.model_spec() == [] {
        auto s = nn::ModelSpec::desk();
        s.dropout_p = 0.3;
        return s;
    }());
}

TEST_CASE("ini parsing") {
    const auto c = RunConfig::parse("# comment\n"
                                    "[run]\n"
                                    "seed = 17\n"
                                    "[train]\n"
                                    "epochs = 2\n"
                                    "precision = float64\n"
                                    "[cohort]\n"
                                    "ref_offsets = 6, 12, 18\n"
                                    "use_labels = true\n");
    CHECK(c.seed == 17);
    CHECK(c.train.epochs == 2);
    CHECK(c.train.precision == nn::Precision::Float64);
    CHECK(c.cohort.ref_offsets == std::vector<int>{6, 12, 18});
    CHECK(c.cohort.use_labels);
}

TEST_CASE("errors name the location") {
    try {
        RunConfig::parse("[train]\nepochs = 2\nbogus = 1\n", "x.ini");
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("x.ini:3") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::parse("[train]\nepochs = many\n"), UsageError);
    CHECK_THROWS_AS(RunConfig::parse("epochs = 2\n"), UsageError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.ini"), UsageError);
}

TEST_CASE("overrides are recorded and echoed") {
    RunConfig c;
    c.set("train.batch_size", "32");
    c.set("model.spec", "tiny");
    CHECK(c.train.batch_size == 32);
    CHECK(c.get("train.batch_size") == "32");
    CHECK(c.overrides == std::vector<std::string>{"train.batch_size=32", "model.spec=tiny"});
    CHECK(c.model_spec().name == "tiny");
    CHECK_THROWS_AS(c.set("train.nope", "1"), UsageError);
    const auto j = c.to_json();
    CHECK(j.contains("overrides"));

    // to_ini round trips every key
    const auto back = RunConfig::parse(c.to_ini());
    for (const auto& k : RunConfig::keys()) CHECK(back.get(k) == c.get(k));
}

TEST_CASE("model spec from a json file") {
    const auto path = std::filesystem::temp_directory_path() / "edr_test_spec.json";
    auto spec = nn::ModelSpec::tiny();
    std::ofstream(path) << spec.to_json().dump();
    RunConfig c;
    c.set("model.spec", path.string());
    c.set("model.dropout", "0.1");
    spec.dropout_p = 0.1;
    CHECK(c.model_spec() == spec);
}
