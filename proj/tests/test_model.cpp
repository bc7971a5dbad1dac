#include <cmath>
#include <random>

#include "doctest.h"

#include "edr/nn/gradcheck.hpp"
#include "edr/nn/model.hpp"

using namespace edr::nn;

TEST_CASE("named architectures") {
    const auto desk = ModelSpec::desk();
    CHECK(count_params(desk) == 44641);
    CHECK(count_layers(desk) == 18);

    const auto paper = ModelSpec::paper();
    CHECK(count_layers(paper) == 60);
    CHECK(count_params(paper) == 15168025);
    CHECK(std::fabs(static_cast<double>(count_params(paper)) / 14.91e6 - 1.0) < 0.05);
    CHECK(receptive_field(paper) >= 7200);

    CHECK_THROWS(ModelSpec::named("huge"));
    CHECK(ModelSpec::named("tiny") == ModelSpec::tiny());
}

TEST_CASE("layout covers the buffer without gaps") {
    for (const auto& spec : {ModelSpec::tiny(), ModelSpec::desk()}) {
        const auto layout = param_layout(spec);
        std::size_t offset = 0;
        for (const auto& p : layout) {
            CHECK(p.offset == offset);
            std::size_t n = 1;
            for (auto d : p.shape) n *= d;
            CHECK(n == p.size);
            offset += p.size;
        }
        CHECK(offset == count_params(spec));
        CHECK(final_length(spec) > 0);
        CHECK(receptive_field(spec) > 1);
    }
}

TEST_CASE("spec json round trip and validation") {
    auto spec = ModelSpec::desk();
    spec.dropout_p = 0.1;
    CHECK(ModelSpec::from_json(spec.to_json()) == spec);
    auto bad = spec;
    bad.stages.clear();
    CHECK_THROWS(bad.validate());
    bad = spec;
    bad.dropout_p = 1.0;
    CHECK_THROWS(bad.validate());
    bad = spec;
    bad.stages[0].kernel_size = 4;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("initialization") {
    const auto spec = ModelSpec::desk();
    const auto a = init_params(spec, 5), b = init_params(spec, 5), c = init_params(spec, 6);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& p : param_layout(spec))
        for (std::size_t i = 0; i < p.size; ++i) {
            const double v = a[p.offset + i];
            if (p.is_gamma)
                CHECK(v == 1.0);
            else if (p.is_bias)
                CHECK(v == 0.0);
            else
                CHECK(std::fabs(v) <= 0.04);
        }
}

TEST_CASE("untrained network predicts near the output offset") {
    const auto spec = ModelSpec::tiny();
    Model<double> m(spec, init_params(spec, 1));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> x(spec.input_length);
    for (auto& v : x) v = n(rng);
    const double y = m.forward(x, Mode::Eval);
    CHECK(std::fabs(y - spec.output_offset) < spec.output_scale);
    CHECK(m.forward(x, Mode::Eval) == y);
    CHECK_THROWS(m.forward(std::vector<double>(spec.input_length + 1, 0.0), Mode::Eval));
}

TEST_CASE("float and double forward agree") {
    const auto spec = ModelSpec::desk();
    const auto params = init_params(spec, 3);
    Model<double> md(spec, params);
    Model<float> mf(spec, params);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> x(spec.input_length);
    for (auto& v : x) v = n(rng);
    const std::vector<float> xf(x.begin(), x.end());
    CHECK(mf.forward(xf, Mode::Eval) == doctest::Approx(md.forward(x, Mode::Eval)).epsilon(1e-4));
}

TEST_CASE("training-mode dropout is seeded") {
    const auto spec = ModelSpec::tiny();
    const auto params = init_params(spec, 3);
    std::vector<double> x(spec.input_length);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * static_cast<double>(i));
    Model<double> a(spec, params, 9), b(spec, params, 9);
    CHECK(a.forward(x, Mode::Train) == b.forward(x, Mode::Train));
}

TEST_CASE("tiny model gradients") {
    GradCheckOptions o;
    o.per_tensor = 3;
    const auto r = grad_check(ModelSpec::tiny(), o);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(grad_check_linear(32).max_rel_error < 1e-8);
    CHECK(relative_error(1.0, 1.0, 1e-5) == 0.0);
    CHECK(relative_error(0.0, 1e-7, 1e-5) == doctest::Approx(1e-2));
}
