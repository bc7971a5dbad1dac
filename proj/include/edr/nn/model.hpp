#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "edr/nn/kernels.hpp"
#include "edr/nn/tensor.hpp"

namespace edr::nn {

struct StemSpec {
    std::size_t n_convs = 2;
    std::size_t kernel = 15;
    std::size_t stride = 2;  // average-pool window and stride after every stem conv

    bool operator==(const StemSpec&) const = default;
};

struct StageSpec {
    std::size_t n_blocks = 1;
    std::size_t channels = 8;
    std::size_t kernel_size = 15;
    std::size_t dilation = 1;

    bool operator==(const StageSpec&) const = default;
};

struct ModelSpec {
    std::string name = "custom";
    std::size_t input_length = 7200;
    StemSpec stem;
    std::vector<StageSpec> stages;
    std::size_t expansion = 4;
    double dropout_p = 0.3;
    double norm_eps = 1e-5;
    // Fixed affine map from the linear head to bpm, so an untrained head
    // starts near typical respiratory rates.
    double output_offset = 20.0;
    double output_scale = 6.0;

    /// About 45k parameters, the default for CPU training.
    static ModelSpec desk();
    /// 60 trainable layers, about 14.9M parameters.
    static ModelSpec paper();
    /// Two blocks of four channels on length-64 inputs, for gradient checks.
    static ModelSpec tiny();
    /// "desk", "paper" or "tiny".
    static ModelSpec named(const std::string& name);

    void validate() const;
    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
    bool operator==(const ModelSpec&) const = default;
};

struct ParamInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool is_bias = false;  // biases and norm affines start at 0 / 1 instead of random
    bool is_gamma = false;
};

std::vector<ParamInfo> param_layout(const ModelSpec& spec);
std::size_t count_params(const ModelSpec& spec);
/// Convolutions plus the linear head.
std::size_t count_layers(const ModelSpec& spec);
/// Input samples that can influence one position of the last stage, before
/// global pooling.
std::size_t receptive_field(const ModelSpec& spec);
/// Length of the feature map entering the global pool.
std::size_t final_length(const ModelSpec& spec);

/// Truncated normal (std 0.02, cut at 2 std) weights, zero biases, unit gamma.
std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed);

/// Network with a flat parameter buffer. forward/backward work on one
/// segment at a time; backward accumulates into grads().
template <typename T>
class Model {
public:
    Model(ModelSpec spec, std::span<const double> params, std::uint64_t dropout_seed = 0);

    const ModelSpec& spec() const { return spec_; }
    const std::vector<ParamInfo>& layout() const { return layout_; }
    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }
    std::vector<T>& grads() { return grads_; }
    void zero_grads() { std::fill(grads_.begin(), grads_.end(), T(0)); }
    std::mt19937_64& rng() { return rng_; }

    /// Prediction in bpm for one normalized segment of spec().input_length.
    double forward(std::span<const T> input, Mode mode);
    /// Backpropagates d(loss)/d(prediction) through the last forward call.
    /// Input gradient is written to `dinput` when non-null.
    void backward(double dpred, std::vector<T>* dinput = nullptr);

    std::vector<double> params_as_double() const { return {params_.begin(), params_.end()}; }

private:
    struct StemCache {
        Tensor3<T> input;
        std::vector<T> drop;
        Tensor3<T> xhat;
        std::vector<T> inv_std;
        std::vector<T> slope;
        std::size_t pre_pool_length = 0;
    };
    struct BlockCache {
        Tensor3<T> input;
        std::vector<T> drop_dw;
        Tensor3<T> xhat;
        std::vector<T> inv_std;
        Tensor3<T> normed;
        std::vector<T> drop_pw1;
        std::vector<T> slope;
        Tensor3<T> act;
        std::vector<T> drop_pw2;
    };
    struct BlockParams {
        std::size_t dw_w, dw_b, gamma, beta, pw1_w, pw1_b, pw2_w, pw2_b;
        std::size_t in_ch, out_ch, kernel, dilation;
    };
    struct StemParams {
        std::size_t w, b, gamma, beta, in_ch, out_ch;
    };

    std::span<const T> p(std::size_t idx) const { return {params_.data() + layout_[idx].offset, layout_[idx].size}; }
    std::span<T> g(std::size_t idx) { return {grads_.data() + layout_[idx].offset, layout_[idx].size}; }
    void dropout(Tensor3<T>& t, Mode mode, std::vector<T>& scale);

    ModelSpec spec_;
    std::vector<ParamInfo> layout_;
    std::vector<T> params_, grads_;
    std::mt19937_64 rng_;

    std::vector<StemParams> stem_;
    std::vector<std::vector<BlockParams>> blocks_;
    std::size_t head_w_ = 0, head_b_ = 0;

    std::vector<StemCache> stem_cache_;
    std::vector<std::vector<BlockCache>> block_cache_;
    std::vector<std::size_t> stage_pre_pool_;
    Tensor3<T> head_input_;
    Tensor3<T> pooled_;
    Tensor3<T> buf_a_, buf_b_, buf_c_;
    bool has_forward_ = false;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace edr::nn
