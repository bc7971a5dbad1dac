#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "doctest.h"

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(EDR_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh(const std::string& name) {
    const auto d = fs::temp_directory_path() / "edr_test_cli" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("usage errors") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("config --set train.nope=1") == 2);
    CHECK(run("config --set train.epochs=lots") == 2);
    CHECK(run("config --set train.epochs=3") == 0);
}

TEST_CASE("missing prerequisites name the producer") {
    const auto d = fresh("prereq");
    CHECK(run("evaluate --out " + d.string()) == 3);
    CHECK(run("train --out " + d.string()) == 3);
    CHECK(run("annotate --patient P1 --out " + d.string()) == 3);
    const std::string cmd = std::string(EDR_CLI) + " evaluate --out " + d.string() + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::string text;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe)) text += buf;
    pclose(pipe);
    CHECK(text.find("train") != std::string::npos);
}

TEST_CASE("small pipeline with manifests") {
    const auto d = fresh("pipe");
    const std::string o = " --out " + d.string() + " --seed 3";
    const std::string small = " --set synth.patients=6 --set synth.minutes=3 --set train.epochs=1 --set train.batch_size=8";
    REQUIRE(run("synth" + o + small) == 0);
    REQUIRE(run("curate" + o + small) == 0);
    REQUIRE(run("split" + o + small) == 0);
    REQUIRE(run("train" + o + small) == 0);
    REQUIRE(run("evaluate --split train" + o + small) == 0);
    CHECK(fs::exists(d / "eval" / "eval_report.json"));
    CHECK(fs::exists(d / "checkpoint" / "model.json"));
    CHECK(fs::exists(d / "loss_curve.csv"));

    const auto j = nlohmann::json::parse(slurp(d / "manifests" / "train.json"));
    CHECK(j.at("command") == "train");
    CHECK(j.at("seed") == 3);
    CHECK(j.at("exit_status") == 0);
    CHECK(j.at("config").at("overrides").size() >= 4);
    CHECK(j.at("config").at("train").at("epochs") == "1");
}

TEST_CASE("simulated cohort is deterministic") {
    const auto a = fresh("cohort_a"), b = fresh("cohort_b");
    const std::string args = " cohort --simulate --seed 5 --set cohort.patients=12";
    REQUIRE(run("--out " + a.string() + args) == 0);
    REQUIRE(run("--out " + b.string() + args) == 0);
    const auto ra = slurp(a / "cohort" / "results_ref12.csv");
    CHECK_FALSE(ra.empty());
    CHECK(ra == slurp(b / "cohort" / "results_ref12.csv"));
    CHECK(slurp(a / "cohort" / "bins.csv") == slurp(b / "cohort" / "bins.csv"));
}

TEST_CASE("gradcheck command") {
    const auto d = fresh("grad");
    CHECK(run("gradcheck --spec tiny --per-tensor 2 --out " + d.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(d / "gradcheck.json"));
    CHECK(j.at("max_rel_error").get<double>() < 1e-4);
}
