#include "edr/nn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "edr/common.hpp"

namespace edr::nn {

ModelSpec ModelSpec::desk() {
    ModelSpec s;
    s.name = "desk";
    s.stem = {2, 15, 2};
    s.stages = {{1, 8, 15, 1}, {1, 16, 15, 1}, {2, 32, 15, 2}, {1, 64, 15, 2}};
    return s;
}

ModelSpec ModelSpec::paper() {
    ModelSpec s;
    s.name = "paper";
    s.stem = {2, 15, 2};
    s.stages = {{2, 72, 15, 1}, {3, 144, 15, 1}, {11, 288, 15, 2}, {3, 576, 15, 2}};
    return s;
}

ModelSpec ModelSpec::tiny() {
    ModelSpec s;
    s.name = "tiny";
    s.input_length = 64;
    s.stem = {2, 5, 2};
    s.stages = {{1, 4, 5, 1}, {1, 4, 5, 2}};
    return s;
}

ModelSpec ModelSpec::named(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    if (name == "tiny") return tiny();
    throw UsageError("unknown model spec '" + name + "' (expected desk, paper or tiny)");
}

void ModelSpec::validate() const {
    if (stages.empty()) throw std::invalid_argument("model spec has zero stages");
    if (input_length == 0) throw std::invalid_argument("model input length must be positive");
    if (stem.kernel % 2 == 0 && stem.n_convs > 0) throw std::invalid_argument("stem kernel must be odd");
    if (stem.stride == 0) throw std::invalid_argument("stem stride must be positive");
    if (expansion == 0) throw std::invalid_argument("expansion must be positive");
    if (!(dropout_p >= 0 && dropout_p < 1)) throw std::invalid_argument("dropout must be in [0, 1)");
    std::size_t prev = stem.n_convs > 0 ? stages.front().channels : 1;
    for (const auto& st : stages) {
        if (st.n_blocks == 0 || st.channels == 0 || st.dilation == 0)
            throw std::invalid_argument("stage needs blocks, channels and dilation >= 1");
        if (st.kernel_size % 2 == 0) throw std::invalid_argument("depthwise kernel must be odd");
        if (st.channels < prev) throw std::invalid_argument("stage channels must not shrink");
        prev = st.channels;
    }
    if (final_length(*this) == 0) throw std::invalid_argument("input too short for the pooling schedule");
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages)
        st.push_back({{"n_blocks", s.n_blocks}, {"channels", s.channels}, {"kernel_size", s.kernel_size},
                      {"dilation", s.dilation}});
    return {{"name", name},
            {"input_length", input_length},
            {"stem", {{"n_convs", stem.n_convs}, {"kernel", stem.kernel}, {"stride", stem.stride}}},
            {"stages", st},
            {"expansion", expansion},
            {"dropout_p", dropout_p},
            {"norm_eps", norm_eps},
            {"output_offset", output_offset},
            {"output_scale", output_scale}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.name = j.at("name").get<std::string>();
    s.input_length = j.at("input_length").get<std::size_t>();
    const auto& stem = j.at("stem");
    s.stem = {stem.at("n_convs").get<std::size_t>(), stem.at("kernel").get<std::size_t>(),
              stem.at("stride").get<std::size_t>()};
    for (const auto& st : j.at("stages"))
        s.stages.push_back({st.at("n_blocks").get<std::size_t>(), st.at("channels").get<std::size_t>(),
                            st.at("kernel_size").get<std::size_t>(), st.at("dilation").get<std::size_t>()});
    s.expansion = j.at("expansion").get<std::size_t>();
    s.dropout_p = j.at("dropout_p").get<double>();
    s.norm_eps = j.at("norm_eps").get<double>();
    s.output_offset = j.at("output_offset").get<double>();
    s.output_scale = j.at("output_scale").get<double>();
    s.validate();
    return s;
}

namespace {

struct LayoutBuilder {
    std::vector<ParamInfo> out;
    std::size_t offset = 0;
    std::size_t add(std::string name, std::vector<std::size_t> shape, bool bias = false, bool gamma = false) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        out.push_back({std::move(name), std::move(shape), offset, n, bias, gamma});
        offset += n;
        return out.size() - 1;
    }
};

std::size_t pooled(std::size_t len, std::size_t k) { return len >= k ? (len - k) / k + 1 : 0; }

}  // namespace

std::vector<ParamInfo> param_layout(const ModelSpec& spec) {
    LayoutBuilder b;
    const std::size_t c0 = spec.stages.empty() ? 1 : spec.stages.front().channels;
    std::size_t cin = 1;
    for (std::size_t i = 0; i < spec.stem.n_convs; ++i) {
        const std::string n = "stem." + std::to_string(i);
        b.add(n + ".conv.weight", {c0, cin, spec.stem.kernel});
        b.add(n + ".conv.bias", {c0}, true);
        b.add(n + ".norm.gamma", {c0}, false, true);
        b.add(n + ".norm.beta", {c0}, true);
        cin = c0;
    }
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        const auto& st = spec.stages[s];
        for (std::size_t k = 0; k < st.n_blocks; ++k) {
            const std::string n = "stage" + std::to_string(s) + ".block" + std::to_string(k);
            const std::size_t hid = spec.expansion * st.channels;
            b.add(n + ".dw.weight", {cin, st.kernel_size});
            b.add(n + ".dw.bias", {cin}, true);
            b.add(n + ".norm.gamma", {cin}, false, true);
            b.add(n + ".norm.beta", {cin}, true);
            b.add(n + ".pw1.weight", {hid, cin});
            b.add(n + ".pw1.bias", {hid}, true);
            b.add(n + ".pw2.weight", {st.channels, hid});
            b.add(n + ".pw2.bias", {st.channels}, true);
            cin = st.channels;
        }
    }
    b.add("head.weight", {1, cin});
    b.add("head.bias", {1}, true);
    return b.out;
}

std::size_t count_params(const ModelSpec& spec) {
    std::size_t n = 0;
    for (const auto& p : param_layout(spec)) n += p.size;
    return n;
}

std::size_t count_layers(const ModelSpec& spec) {
    std::size_t n = spec.stem.n_convs + 1;
    for (const auto& st : spec.stages) n += 3 * st.n_blocks;
    return n;
}

std::size_t receptive_field(const ModelSpec& spec) {
    std::size_t rf = 1, jump = 1;
    auto pool = [&](std::size_t k) {
        rf += (k - 1) * jump;
        jump *= k;
    };
    for (std::size_t i = 0; i < spec.stem.n_convs; ++i) {
        rf += (spec.stem.kernel - 1) * jump;
        pool(spec.stem.stride);
    }
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        const auto& st = spec.stages[s];
        rf += st.n_blocks * (st.kernel_size - 1) * st.dilation * jump;
        if (s + 1 < spec.stages.size()) pool(2);
    }
    return rf;
}

std::size_t final_length(const ModelSpec& spec) {
    std::size_t len = spec.input_length;
    for (std::size_t i = 0; i < spec.stem.n_convs; ++i) len = pooled(len, spec.stem.stride);
    for (std::size_t s = 0; s < spec.stages.size(); ++s)
        if (s + 1 < spec.stages.size()) len = pooled(len, 2);
    return len;
}

std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto layout = param_layout(spec);
    std::vector<double> values(count_params(spec), 0.0);
    for (const auto& p : layout) {
        for (std::size_t i = 0; i < p.size; ++i) {
            double v = 0.0;
            if (p.is_gamma) {
                v = 1.0;
            } else if (!p.is_bias) {
                do v = normal(rng);
                while (std::fabs(v) > 2.0);
                v *= 0.02;
            }
            values[p.offset + i] = v;
        }
    }
    return values;
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::span<const double> params, std::uint64_t dropout_seed)
    : spec_(std::move(spec)), layout_(param_layout(spec_)), rng_(dropout_seed) {
    spec_.validate();
    if (params.size() != count_params(spec_))
        throw std::invalid_argument("parameter buffer has " + std::to_string(params.size()) + " values, spec needs " +
                                    std::to_string(count_params(spec_)));
    params_.assign(params.begin(), params.end());
    grads_.assign(params_.size(), T(0));

    std::size_t idx = 0;
    std::size_t cin = 1;
    const std::size_t c0 = spec_.stages.front().channels;
    for (std::size_t i = 0; i < spec_.stem.n_convs; ++i) {
        stem_.push_back({idx, idx + 1, idx + 2, idx + 3, cin, c0});
        idx += 4;
        cin = c0;
    }
    for (const auto& st : spec_.stages) {
        std::vector<BlockParams> stage;
        for (std::size_t k = 0; k < st.n_blocks; ++k) {
            stage.push_back({idx, idx + 1, idx + 2, idx + 3, idx + 4, idx + 5, idx + 6, idx + 7, cin, st.channels,
                             st.kernel_size, st.dilation});
            idx += 8;
            cin = st.channels;
        }
        blocks_.push_back(std::move(stage));
    }
    head_w_ = idx;
    head_b_ = idx + 1;
    stem_cache_.resize(stem_.size());
    block_cache_.resize(blocks_.size());
    for (std::size_t s = 0; s < blocks_.size(); ++s) block_cache_[s].resize(blocks_[s].size());
    stage_pre_pool_.resize(blocks_.size());
}

template <typename T>
void Model<T>::dropout(Tensor3<T>& t, Mode mode, std::vector<T>& scale) {
    auto v = std::span<T>(t.values());
    dropout_forward<T>(v, spec_.dropout_p, mode, rng_, v, scale);
}

template <typename T>
double Model<T>::forward(std::span<const T> input, Mode mode) {
    if (input.size() != spec_.input_length)
        throw std::invalid_argument("input length " + std::to_string(input.size()) + " != " +
                                    std::to_string(spec_.input_length));
    for (T v : input)
        if (!std::isfinite(v)) throw NumericError("non-finite value in model input");

    Tensor3<T> x(1, 1, input.size(), std::vector<T>(input.begin(), input.end()));
    Tensor3<T>& a = buf_a_;
    Tensor3<T>& n = buf_b_;
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        const auto& sp = stem_[i];
        auto& c = stem_cache_[i];
        c.input = x;
        conv1d_forward<T>(x, p(sp.w), p(sp.b), sp.out_ch, spec_.stem.kernel, a);
        instance_norm_forward<T>(a, p(sp.gamma), p(sp.beta), spec_.norm_eps, n, c.xhat, c.inv_std);
        c.slope.resize(n.size());
        gelu_forward<T>(n.values(), n.values(), c.slope);
        dropout(n, mode, c.drop);
        c.pre_pool_length = n.length();
        avg_pool_forward<T>(n, spec_.stem.stride, spec_.stem.stride, x);
    }
    for (std::size_t s = 0; s < blocks_.size(); ++s) {
        for (std::size_t k = 0; k < blocks_[s].size(); ++k) {
            const auto& bp = blocks_[s][k];
            auto& c = block_cache_[s][k];
            c.input = x;
            depthwise_conv1d_forward<T>(x, p(bp.dw_w), p(bp.dw_b), bp.kernel, bp.dilation, a);
            instance_norm_forward<T>(a, p(bp.gamma), p(bp.beta), spec_.norm_eps, c.normed, c.xhat, c.inv_std);
            dropout(c.normed, mode, c.drop_dw);
            pointwise_conv1d_forward<T>(c.normed, p(bp.pw1_w), p(bp.pw1_b), spec_.expansion * bp.out_ch, c.act);
            c.slope.resize(c.act.size());
            gelu_forward<T>(c.act.values(), c.act.values(), c.slope);
            dropout(c.act, mode, c.drop_pw1);
            pointwise_conv1d_forward<T>(c.act, p(bp.pw2_w), p(bp.pw2_b), bp.out_ch, a);
            dropout(a, mode, c.drop_pw2);
            residual_add<T>(x, a);
            std::swap(x, a);
        }
        stage_pre_pool_[s] = x.length();
        if (s + 1 < blocks_.size()) {
            avg_pool_forward<T>(x, 2, 2, a);
            std::swap(x, a);
        }
    }
    head_input_ = x;
    global_avg_pool_forward<T>(x, pooled_);
    linear_forward<T>(pooled_, p(head_w_), p(head_b_), 1, a);
    has_forward_ = true;
    const double out = spec_.output_offset + spec_.output_scale * static_cast<double>(a(0, 0, 0));
    if (!std::isfinite(out)) throw NumericError("non-finite model output");
    return out;
}

template <typename T>
void Model<T>::backward(double dpred, std::vector<T>* dinput) {
    if (!has_forward_) throw std::logic_error("backward called before forward");
    Tensor3<T> dy(1, 1, 1, static_cast<T>(dpred * spec_.output_scale));
    Tensor3<T> dpool;
    linear_backward<T>(pooled_, p(head_w_), dy, &dpool, g(head_w_), g(head_b_));
    Tensor3<T> dx;
    global_avg_pool_backward<T>(dpool, head_input_.length(), dx);

    Tensor3<T>& da = buf_a_;
    Tensor3<T>& db = buf_b_;
    Tensor3<T>& dc = buf_c_;
    for (std::size_t s = blocks_.size(); s-- > 0;) {
        if (s + 1 < blocks_.size()) {
            da.resize(1, dx.channels(), stage_pre_pool_[s]);
            avg_pool_backward<T>(dx, 2, 2, da);
            std::swap(dx, da);
        }
        for (std::size_t k = blocks_[s].size(); k-- > 0;) {
            const auto& bp = blocks_[s][k];
            auto& c = block_cache_[s][k];
            // dx holds d(out); the residual path passes its first in_ch channels through.
            da.resize(1, bp.out_ch, dx.length());
            dropout_backward<T>(dx.values(), c.drop_pw2, da.values());
            pointwise_conv1d_backward<T>(c.act, p(bp.pw2_w), da, &db, g(bp.pw2_w), g(bp.pw2_b));
            dropout_backward<T>(db.values(), c.drop_pw1, db.values());
            gelu_backward<T>(db.values(), c.slope, db.values());
            pointwise_conv1d_backward<T>(c.normed, p(bp.pw1_w), db, &dc, g(bp.pw1_w), g(bp.pw1_b));
            dropout_backward<T>(dc.values(), c.drop_dw, dc.values());
            instance_norm_backward<T>(c.xhat, c.inv_std, p(bp.gamma), dc, db, g(bp.gamma), g(bp.beta));
            depthwise_conv1d_backward<T>(c.input, p(bp.dw_w), bp.kernel, bp.dilation, db, &dc, g(bp.dw_w), g(bp.dw_b));
            // residual: d(in) = d(out)[:in_ch] + branch gradient
            const std::size_t n = bp.in_ch * dx.length();
            for (std::size_t i = 0; i < n; ++i) dc.values()[i] += dx.values()[i];
            std::swap(dx, dc);
        }
    }
    for (std::size_t i = stem_.size(); i-- > 0;) {
        const auto& sp = stem_[i];
        auto& c = stem_cache_[i];
        da.resize(1, sp.out_ch, c.pre_pool_length);
        avg_pool_backward<T>(dx, spec_.stem.stride, spec_.stem.stride, da);
        dropout_backward<T>(da.values(), c.drop, da.values());
        gelu_backward<T>(da.values(), c.slope, da.values());
        instance_norm_backward<T>(c.xhat, c.inv_std, p(sp.gamma), da, db, g(sp.gamma), g(sp.beta));
        const bool need_dx = i > 0 || dinput != nullptr;
        conv1d_backward<T>(c.input, p(sp.w), spec_.stem.kernel, db, need_dx ? &dc : nullptr, g(sp.w), g(sp.b));
        if (need_dx) std::swap(dx, dc);
    }
    if (dinput) *dinput = dx.values();
}

template class Model<float>;
template class Model<double>;

}  // namespace edr::nn
