#include "edr/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace edr::nn {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
    return std::fabs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k == 0 || k >= n) return idx;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct Batch {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
};

Batch random_batch(std::size_t batch, std::size_t length, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> target(10.0, 30.0);
    Batch b;
    for (std::size_t i = 0; i < batch; ++i) {
        std::vector<double> x(length);
        for (auto& v : x) v = normal(rng);
        b.inputs.push_back(std::move(x));
        b.targets.push_back(target(rng));
    }
    return b;
}

void update(GradCheckResult& r, double err, const std::string& name) {
    ++r.checked;
    if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = name;
    }
}

}  // namespace

GradCheckResult grad_check(const ModelSpec& spec_in, const GradCheckOptions& options) {
    ModelSpec spec = spec_in;
    spec.dropout_p = 0.0;
    std::mt19937_64 rng(options.seed);
    // A random perturbation moves the check away from the symmetric init
    // (unit gamma, zero biases) where some gradients vanish exactly.
    auto params = init_params(spec, options.seed);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (auto& v : params) v += jitter(rng);
    Model<double> model(spec, params);
    const Batch batch = random_batch(options.batch, spec.input_length, rng);
    const double n = static_cast<double>(options.batch);

    auto loss = [&](const std::vector<std::vector<double>>& inputs) {
        double s = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const double d = model.forward(inputs[i], Mode::Eval) - batch.targets[i];
            s += d * d;
        }
        return s / n;
    };

    GradCheckResult r;
    model.zero_grads();
    std::vector<std::vector<double>> dinputs(options.batch);
    for (std::size_t i = 0; i < options.batch; ++i) {
        const double d = model.forward(batch.inputs[i], Mode::Eval) - batch.targets[i];
        r.loss += d * d / n;
        model.backward(2.0 * d / n, &dinputs[i]);
    }
    const std::vector<double> analytic = model.grads();

    const double h = options.step;
    for (const auto& info : model.layout()) {
        for (std::size_t j : sample_indices(info.size, options.per_tensor, rng)) {
            double& w = model.params()[info.offset + j];
            const double saved = w;
            w = saved + h;
            const double lp = loss(batch.inputs);
            w = saved - h;
            const double lm = loss(batch.inputs);
            w = saved;
            update(r, relative_error(analytic[info.offset + j], (lp - lm) / (2 * h), options.floor), info.name);
        }
    }
    auto inputs = batch.inputs;
    for (std::size_t b = 0; b < options.batch; ++b) {
        for (std::size_t j : sample_indices(spec.input_length, options.per_tensor, rng)) {
            const double saved = inputs[b][j];
            inputs[b][j] = saved + h;
            const double lp = loss(inputs);
            inputs[b][j] = saved - h;
            const double lm = loss(inputs);
            inputs[b][j] = saved;
            update(r, relative_error(dinputs[b][j], (lp - lm) / (2 * h), options.floor), "input");
        }
    }
    return r;
}

GradCheckResult grad_check_linear(std::size_t length, const GradCheckOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> params(length + 1);
    for (auto& v : params) v = normal(rng) * 0.1;
    const Batch batch = random_batch(options.batch, length, rng);
    const double n = static_cast<double>(options.batch);

    auto forward = [&](const std::vector<double>& p, const std::vector<double>& x) {
        Tensor3<double> in(1, 1, length, x);
        Tensor3<double> out;
        linear_forward<double>(in, std::span<const double>(p.data(), length), std::span<const double>(p.data() + length, 1),
                               1, out);
        return out(0, 0, 0);
    };
    auto loss = [&](const std::vector<double>& p) {
        double s = 0;
        for (std::size_t i = 0; i < options.batch; ++i) {
            const double d = forward(p, batch.inputs[i]) - batch.targets[i];
            s += d * d;
        }
        return s / n;
    };

    GradCheckResult r;
    std::vector<double> grads(length + 1, 0.0);
    for (std::size_t i = 0; i < options.batch; ++i) {
        Tensor3<double> in(1, 1, length, batch.inputs[i]);
        const double d = forward(params, batch.inputs[i]) - batch.targets[i];
        r.loss += d * d / n;
        Tensor3<double> dy(1, 1, 1, 2.0 * d / n);
        linear_backward<double>(in, std::span<const double>(params.data(), length), dy, nullptr,
                                std::span<double>(grads.data(), length), std::span<double>(grads.data() + length, 1));
    }
    const double h = options.step;
    for (std::size_t j : sample_indices(params.size(), options.per_tensor, rng)) {
        const double saved = params[j];
        params[j] = saved + h;
        const double lp = loss(params);
        params[j] = saved - h;
        const double lm = loss(params);
        params[j] = saved;
        update(r, relative_error(grads[j], (lp - lm) / (2 * h), options.floor), j == length ? "bias" : "weight");
    }
    return r;
}

}  // namespace edr::nn
