#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"

#include "edr/csv.hpp"
#include "edr/nn/checkpoint.hpp"
#include "edr/nn/train.hpp"

using namespace edr;
using namespace edr::nn;
namespace fs = std::filesystem;

namespace {

// Sinusoids whose frequency encodes the label, on the tiny input length.
std::vector<MinuteExample> toy_set(std::size_t n, std::size_t length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(10, 30);
    std::vector<MinuteExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        MinuteExample e;
        e.patient_id = "p" + std::to_string(i % 7);
        e.lead_name = i % 2 ? "II" : "V";
        e.start_time = from_epoch_ms(60'000LL * static_cast<std::int64_t>(i / 2));
        e.label = u(rng);
        e.ecg.resize(length);
        for (std::size_t k = 0; k < length; ++k)
            e.ecg[k] = static_cast<float>(std::sin(0.02 * e.label * static_cast<double>(k)) + 0.01 * static_cast<double>(k % 3));
        out.push_back(e);
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("learning-rate schedule and config validation") {
    TrainConfig c;
    CHECK(c.lr_at(0) == 1e-3);
    CHECK(c.lr_at(2) == doctest::Approx(1e-5));
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    CHECK(precision_from_string("f64") == Precision::Float64);
    CHECK(lead_policy_from_string(to_string(LeadPolicy::AllLeads)) == LeadPolicy::AllLeads);
    CHECK_THROWS_AS(precision_from_string("half"), UsageError);
}

TEST_CASE("adamw step matches a hand computation") {
    AdamW opt;
    opt.weight_decay = 0.1;
    std::vector<double> p{1.0}, m{0.0}, v{0.0};
    std::uint64_t step = 0;
    opt.update(p, std::vector<double>{0.5}, m, v, step, 0.01);
    CHECK(step == 1);
    // bias-corrected first step moves by lr * sign(g), plus decoupled decay
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.1 * 1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(m[0] == doctest::Approx(0.05));
    CHECK(v[0] == doctest::Approx(0.00025));
}

TEST_CASE("training reduces the loss and keeps the best state") {
    const auto spec = ModelSpec::tiny();
    const auto tr = toy_set(64, spec.input_length, 1), tu = toy_set(16, spec.input_length, 2);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 8;
    c.learning_rate = 1e-2;
    c.lr_decay = 2.0;
    std::size_t calls = 0;
    c.on_epoch = [&](const EpochRecord&) { ++calls; };
    const auto r = train(tr, tu, spec, c);
    REQUIRE(r.curve.size() == 3);
    CHECK(calls == 3);
    CHECK(r.curve.back().train_mse < r.curve.front().train_mse);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : r.curve) best = std::min(best, e.tune_mse);
    CHECK(r.curve[r.best_epoch].tune_mse == best);
    CHECK(r.final_state.epoch == 3);
    CHECK(r.final_state.step > 0);
    const auto preds = predict(r.best_state, tu);
    CHECK(preds.size() == tu.size());
    const auto preds64 = predict(r.best_state, tu, Precision::Float64);
    for (std::size_t i = 0; i < preds.size(); ++i) CHECK(preds[i] == doctest::Approx(preds64[i]).epsilon(1e-4));
}

TEST_CASE("float64 training is reproducible") {
    const auto spec = ModelSpec::tiny();
    const auto tr = toy_set(24, spec.input_length, 3);
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.precision = Precision::Float64;
    c.seed = 11;
    const auto a = train(tr, tr, spec, c), b = train(tr, tr, spec, c);
    CHECK(a.final_state.params == b.final_state.params);
    CHECK(a.final_state.adam_v == b.final_state.adam_v);
}

TEST_CASE("checkpoint round trip") {
    const fs::path dir = fs::temp_directory_path() / "edr_test_ckpt";
    fs::remove_all(dir);
    auto state = build_model(ModelSpec::tiny(), 4);
    state.epoch = 2;
    state.step = 17;
    state.adam_m[3] = 0.125;
    save_checkpoint(state, dir, {{"note", "x"}});
    const auto back = load_checkpoint(dir);
    CHECK(back.spec == state.spec);
    CHECK(back.params == state.params);
    CHECK(back.adam_m == state.adam_m);
    CHECK(back.step == 17);
    CHECK(back.epoch == 2);

    // identical state gives identical bytes
    const fs::path dir2 = fs::temp_directory_path() / "edr_test_ckpt2";
    save_checkpoint(back, dir2, {{"note", "x"}});
    CHECK(slurp(dir / "model.bin") == slurp(dir2 / "model.bin"));
    CHECK(slurp(dir / "model.json") == slurp(dir2 / "model.json"));

    CHECK_THROWS_AS(load_checkpoint(dir / "nothing"), PrerequisiteError);
    std::ofstream(dir / "model.bin", std::ios::trunc) << "short";
    CHECK_THROWS_AS(load_checkpoint(dir), DataError);
}

TEST_CASE("non-finite loss writes a snapshot") {
    const auto spec = ModelSpec::tiny();
    auto tr = toy_set(8, spec.input_length, 5);
    tr[3].label = std::numeric_limits<double>::quiet_NaN();
    const fs::path dir = fs::temp_directory_path() / "edr_test_snapshot";
    fs::remove_all(dir);
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 8;
    c.lead_policy = LeadPolicy::AllLeads;
    c.snapshot_dir = dir;
    CHECK_THROWS_AS(train(tr, tr, spec, c), NumericError);
    CHECK(fs::exists(dir / "model.json"));
}

TEST_CASE("loss curve csv") {
    const fs::path p = fs::temp_directory_path() / "edr_test_curve.csv";
    std::vector<EpochRecord> curve(2);
    curve[0].train_mse = 4;
    curve[0].tune_mse = 5;
    curve[1].epoch = 1;
    write_loss_curve(curve, p);
    const auto t = read_csv(p);
    CHECK(t.columns == std::vector<std::string>{"epoch", "split", "mse"});
    CHECK(t.rows.size() == 4);
}
