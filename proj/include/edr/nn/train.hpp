#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edr/curation.hpp"
#include "edr/nn/model.hpp"

namespace edr::nn {

enum class LeadPolicy { RandomLead, AllLeads };
std::string to_string(LeadPolicy p);
LeadPolicy lead_policy_from_string(const std::string& s);

/// Float32 is the fast training path, Float64 the reference path.
enum class Precision { Float32, Float64 };
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct EpochRecord {
    std::size_t epoch = 0;
    double learning_rate = 0;
    double train_mse = 0;
    double tune_mse = 0;
    std::size_t train_segments = 0;
    double seconds = 0;  // wall clock, never written to deterministic outputs
};

struct TrainConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;  // epoch e uses learning_rate * lr_decay^-e
    double lr_decay = 10.0;
    double weight_decay = 5e-5;   // decoupled, scaled by the learning rate
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    LeadPolicy lead_policy = LeadPolicy::RandomLead;
    Precision precision = Precision::Float32;
    std::uint64_t seed = 0;
    /// Where the state is written if the loss turns non-finite.
    std::optional<std::filesystem::path> snapshot_dir;
    std::function<void(const EpochRecord&)> on_epoch;

    void validate() const;
    double lr_at(std::size_t epoch) const;
};

struct ModelState {
    ModelSpec spec;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;  // completed epochs
    std::uint64_t step = 0;  // optimizer steps taken
    std::vector<double> params;
    std::vector<double> adam_m, adam_v;

    bool finite() const;
};

/// Fresh parameters from init_params; optimizer moments are zero.
ModelState build_model(const ModelSpec& spec, std::uint64_t seed);

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 5e-5;

    /// One update with bias-corrected moments; `step` is incremented first.
    template <typename T>
    void update(std::vector<T>& params, const std::vector<T>& grads, std::vector<double>& m, std::vector<double>& v,
                std::uint64_t& step, double lr) const;
};

struct TrainResult {
    ModelState final_state;
    ModelState best_state;  // lowest tune MSE
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> curve;
};

TrainResult train(std::span<const MinuteExample> train_set, std::span<const MinuteExample> tune_set,
                  const ModelSpec& spec, const TrainConfig& config);

/// Eval-mode predictions (bpm), one per example, in input order.
std::vector<double> predict(const ModelState& state, std::span<const MinuteExample> examples,
                            Precision precision = Precision::Float32);

/// Z-normalized copy of an example's ECG.
template <typename T>
void normalized_input(const MinuteExample& example, std::vector<T>& out);

}  // namespace edr::nn
