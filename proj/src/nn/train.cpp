#include "edr/nn/train.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "edr/common.hpp"
#include "edr/nn/checkpoint.hpp"

namespace edr::nn {

std::string to_string(LeadPolicy p) { return p == LeadPolicy::RandomLead ? "random" : "all"; }

LeadPolicy lead_policy_from_string(const std::string& s) {
    if (s == "random") return LeadPolicy::RandomLead;
    if (s == "all") return LeadPolicy::AllLeads;
    throw UsageError("unknown lead policy '" + s + "' (expected random or all)");
}

std::string to_string(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Precision precision_from_string(const std::string& s) {
    if (s == "float32" || s == "f32") return Precision::Float32;
    if (s == "float64" || s == "f64") return Precision::Float64;
    throw UsageError("unknown precision '" + s + "' (expected float32 or float64)");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (!(learning_rate >= 0) || !(lr_decay > 0)) throw UsageError("learning rate must be >= 0 and decay > 0");
    if (!(weight_decay >= 0)) throw UsageError("weight decay must be >= 0");
}

double TrainConfig::lr_at(std::size_t epoch) const {
    return learning_rate * std::pow(lr_decay, -static_cast<double>(epoch));
}

bool ModelState::finite() const {
    for (double v : params)
        if (!std::isfinite(v)) return false;
    return true;
}

ModelState build_model(const ModelSpec& spec, std::uint64_t seed) {
    ModelState s;
    s.spec = spec;
    s.seed = seed;
    s.params = init_params(spec, seed);
    s.adam_m.assign(s.params.size(), 0.0);
    s.adam_v.assign(s.params.size(), 0.0);
    return s;
}

template <typename T>
void AdamW::update(std::vector<T>& params, const std::vector<T>& grads, std::vector<double>& m, std::vector<double>& v,
                   std::uint64_t& step, double lr) const {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        const double p = static_cast<double>(params[i]) * decay - lr * mhat / (std::sqrt(vhat) + eps);
        params[i] = static_cast<T>(p);
    }
}

template void AdamW::update<float>(std::vector<float>&, const std::vector<float>&, std::vector<double>&,
                                   std::vector<double>&, std::uint64_t&, double) const;
template void AdamW::update<double>(std::vector<double>&, const std::vector<double>&, std::vector<double>&,
                                    std::vector<double>&, std::uint64_t&, double) const;

template <typename T>
void normalized_input(const MinuteExample& example, std::vector<T>& out) {
    out.resize(example.ecg.size());
    if constexpr (std::is_same_v<T, float>) {
        znormalize(std::span<const float>(example.ecg), std::span<float>(out));
    } else {
        std::vector<double> raw(example.ecg.begin(), example.ecg.end());
        out = znormalize(raw);
    }
}

template void normalized_input<float>(const MinuteExample&, std::vector<float>&);
template void normalized_input<double>(const MinuteExample&, std::vector<double>&);

namespace {

// Examples sharing (patient, minute) are the leads of one ECG minute.
std::vector<std::vector<std::size_t>> minute_groups(std::span<const MinuteExample> examples) {
    std::map<std::pair<std::string, std::int64_t>, std::size_t> index;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto key = std::make_pair(examples[i].patient_id, epoch_ms(examples[i].start_time));
        auto [it, inserted] = index.emplace(key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

template <typename T>
double eval_mse(Model<T>& model, std::span<const MinuteExample> examples) {
    std::vector<T> x;
    double sse = 0;
    for (const auto& ex : examples) {
        normalized_input(ex, x);
        const double d = model.forward(x, Mode::Eval) - ex.label;
        sse += d * d;
    }
    return sse / static_cast<double>(examples.size());
}

template <typename T>
TrainResult train_impl(std::span<const MinuteExample> train_set, std::span<const MinuteExample> tune_set,
                       const ModelSpec& spec, const TrainConfig& config) {
    ModelState state = build_model(spec, config.seed);
    Model<T> model(spec, state.params, mix64(config.seed ^ 0xd1b54a32d192ed03ULL));
    std::mt19937_64 rng(mix64(config.seed + 1));
    const AdamW opt{config.beta1, config.beta2, config.adam_eps, config.weight_decay};
    const auto groups = minute_groups(train_set);

    TrainResult result;
    double best_tune = std::numeric_limits<double>::infinity();
    std::vector<T> x;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = config.lr_at(epoch);

        std::vector<std::size_t> order;
        for (const auto& g : groups) {
            if (config.lead_policy == LeadPolicy::AllLeads) {
                order.insert(order.end(), g.begin(), g.end());
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
                order.push_back(g[pick(rng)]);
            }
        }
        std::shuffle(order.begin(), order.end(), rng);

        double sse = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double n = static_cast<double>(end - start);
            model.zero_grads();
            double batch_sse = 0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = train_set[order[i]];
                normalized_input(ex, x);
                const double pred = model.forward(x, Mode::Train);
                const double d = pred - ex.label;
                batch_sse += d * d;
                model.backward(2.0 * d / n);
            }
            if (!std::isfinite(batch_sse)) {
                state.params = model.params_as_double();
                state.epoch = epoch;
                if (config.snapshot_dir)
                    save_checkpoint(state, *config.snapshot_dir,
                                    {{"diagnostic", "non-finite loss"}, {"epoch", epoch}, {"batch_start", start}});
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                   std::to_string(start));
            }
            sse += batch_sse;
            opt.update(model.params(), model.grads(), state.adam_m, state.adam_v, state.step, lr);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = lr;
        rec.train_segments = order.size();
        rec.train_mse = sse / static_cast<double>(order.size());
        rec.tune_mse = eval_mse(model, tune_set);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.curve.push_back(rec);

        state.params = model.params_as_double();
        state.epoch = epoch + 1;
        if (!state.finite()) throw NumericError("non-finite parameters after epoch " + std::to_string(epoch));
        if (rec.tune_mse < best_tune) {
            best_tune = rec.tune_mse;
            result.best_state = state;
            result.best_epoch = epoch;
        }
        if (config.on_epoch) config.on_epoch(rec);
    }
    result.final_state = std::move(state);
    return result;
}

template <typename T>
std::vector<double> predict_impl(const ModelState& state, std::span<const MinuteExample> examples) {
    Model<T> model(state.spec, state.params);
    std::vector<double> out;
    out.reserve(examples.size());
    std::vector<T> x;
    for (const auto& ex : examples) {
        normalized_input(ex, x);
        out.push_back(model.forward(x, Mode::Eval));
    }
    return out;
}

}  // namespace

TrainResult train(std::span<const MinuteExample> train_set, std::span<const MinuteExample> tune_set,
                  const ModelSpec& spec, const TrainConfig& config) {
    config.validate();
    spec.validate();
    if (train_set.empty()) throw DataError("training split is empty");
    if (tune_set.empty()) throw DataError("tune split is empty");
    for (const auto& ex : train_set)
        if (ex.ecg.size() != spec.input_length)
            throw DataError("training segment of " + std::to_string(ex.ecg.size()) + " samples, model expects " +
                            std::to_string(spec.input_length));
    return config.precision == Precision::Float32 ? train_impl<float>(train_set, tune_set, spec, config)
                                                  : train_impl<double>(train_set, tune_set, spec, config);
}

std::vector<double> predict(const ModelState& state, std::span<const MinuteExample> examples, Precision precision) {
    return precision == Precision::Float32 ? predict_impl<float>(state, examples)
                                           : predict_impl<double>(state, examples);
}

}  // namespace edr::nn
