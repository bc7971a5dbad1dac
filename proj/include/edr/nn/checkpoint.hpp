#pragma once

#include <filesystem>
#include <span>

#include "json.hpp"

#include "edr/nn/train.hpp"

namespace edr::nn {

// Checkpoint directory layout:
//   model.json  spec, seed, epoch, step, metrics and the tensor manifest
//   model.bin   float64 little-endian values at the manifest offsets

void save_checkpoint(const ModelState& state, const std::filesystem::path& dir, const nlohmann::json& metrics = {});
ModelState load_checkpoint(const std::filesystem::path& dir);

/// Columns epoch, split, mse; two rows (train, tune) per epoch.
void write_loss_curve(std::span<const EpochRecord> curve, const std::filesystem::path& path);

}  // namespace edr::nn
