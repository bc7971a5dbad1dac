#pragma once

#include <cstdint>
#include <string>

#include "edr/nn/model.hpp"

namespace edr::nn {

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst;  // parameter tensor name, or "input"
    std::size_t checked = 0;
    double loss = 0;
};

struct GradCheckOptions {
    std::size_t batch = 2;
    /// Entries sampled per parameter tensor (and from the input); 0 checks all.
    std::size_t per_tensor = 0;
    double step = 1e-4;
    /// Denominator floor of the relative error, so near-zero gradients are
    /// judged on absolute error.
    double floor = 1e-5;
    std::uint64_t seed = 0;
};

/// Analytic vs central-difference gradients of the batch MSE with respect to
/// parameters and the input, float64, dropout disabled.
GradCheckResult grad_check(const ModelSpec& spec, const GradCheckOptions& options = {});

/// Same check for a single linear layer on raw inputs of `length` samples.
GradCheckResult grad_check_linear(std::size_t length, const GradCheckOptions& options = {});

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

}  // namespace edr::nn
