#include "edr/nn/kernels.hpp"

#include "simd.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace edr::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

using simd::dot;
using simd::sum;

template <typename T>
inline void axpy(T a, const T* __restrict x, T* __restrict y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// Valid output range [lo, hi) for input offset `off` in a length-n signal.
inline void shifted_range(long off, std::size_t n, std::size_t& lo, std::size_t& hi) {
    const long ln = static_cast<long>(n);
    const long a = std::max(0L, -off);
    const long b = std::min(ln, ln - off);
    lo = static_cast<std::size_t>(a);
    hi = static_cast<std::size_t>(std::max(a, b));
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

template <>
void gelu_forward<double>(std::span<const double> x, std::span<double> y, std::span<double> slope) {
    require(y.size() == x.size() && (slope.empty() || slope.size() == x.size()), "gelu size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        if (!slope.empty()) slope[i] = cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        y[i] = v * cdf;
    }
}

template <>
void gelu_forward<float>(std::span<const float> x, std::span<float> y, std::span<float> slope) {
    require(y.size() == x.size() && (slope.empty() || slope.size() == x.size()), "gelu size mismatch");
    constexpr std::size_t N = simd::Vec<float>::lanes;
    const float c = static_cast<float>(kInvSqrt2);
    const float d = static_cast<float>(kInvSqrt2Pi);
    const std::size_t n = x.size();
    auto block = [&](std::size_t i, std::size_t m) {
        simd::VF v{};
        std::memcpy(&v, x.data() + i, m * sizeof(float));
        const simd::VF cdf = 0.5f * (1.0f + simd::erf_fast(v * c));
        const simd::VF out = v * cdf;
        std::memcpy(y.data() + i, &out, m * sizeof(float));
        if (!slope.empty()) {
            const simd::VF sl = cdf + v * d * simd::exp_fast(-0.5f * v * v);
            std::memcpy(slope.data() + i, &sl, m * sizeof(float));
        }
    };
    std::size_t i = 0;
    for (; i + N <= n; i += N) block(i, N);
    if (i < n) block(i, n - i);
}

template <typename T>
void gelu_backward(std::span<const T> dy, std::span<const T> slope, std::span<T> dx) {
    require(dy.size() == slope.size() && dx.size() == dy.size(), "gelu backward size mismatch");
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * slope[i];
}

template <typename T>
void depthwise_conv1d_forward(const Tensor3<T>& x, std::span<const T> kernel, std::span<const T> bias, std::size_t k,
                              std::size_t dilation, Tensor3<T>& y) {
    const std::size_t C = x.channels(), L = x.length();
    require(k % 2 == 1 && kernel.size() == C * k, "depthwise kernel shape");
    require(bias.empty() || bias.size() == C, "depthwise bias shape");
    y.resize(x.batch(), C, L);
    const long half = static_cast<long>(k / 2);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* in = x.row(b, c).data();
            T* out = y.row(b, c).data();
            std::fill(out, out + L, bias.empty() ? T(0) : bias[c]);
            for (std::size_t j = 0; j < k; ++j) {
                const long off = (static_cast<long>(j) - half) * static_cast<long>(dilation);
                std::size_t lo, hi;
                shifted_range(off, L, lo, hi);
                const T w = kernel[c * k + j];
                const T* src = in + (static_cast<long>(lo) + off);
                for (std::size_t l = lo; l < hi; ++l) out[l] += w * src[l - lo];
            }
        }
    }
}

template <typename T>
void depthwise_conv1d_backward(const Tensor3<T>& x, std::span<const T> kernel, std::size_t k, std::size_t dilation,
                               const Tensor3<T>& dy, Tensor3<T>* dx, std::span<T> dkernel, std::span<T> dbias) {
    const std::size_t C = x.channels(), L = x.length();
    require(dy.same_shape(x), "depthwise backward shape");
    if (dx) {
        dx->resize(x.batch(), C, L);
        dx->zero();
    }
    const long half = static_cast<long>(k / 2);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* in = x.row(b, c).data();
            const T* g = dy.row(b, c).data();
            if (!dbias.empty()) dbias[c] += sum(g, L);
            for (std::size_t j = 0; j < k; ++j) {
                const long off = (static_cast<long>(j) - half) * static_cast<long>(dilation);
                std::size_t lo, hi;
                shifted_range(off, L, lo, hi);
                if (hi <= lo) continue;
                dkernel[c * k + j] += dot(g + lo, in + lo + off, hi - lo);
                if (dx) {
                    T* dst = dx->row(b, c).data() + (static_cast<long>(lo) + off);
                    const T w = kernel[c * k + j];
                    for (std::size_t l = lo; l < hi; ++l) dst[l - lo] += w * g[l];
                }
            }
        }
    }
}

namespace {

// y[o, l] += sum_i w[o, i] x[i, l] for one example, rows of length L.
// `w` is O x I row-major. Register tile: 4 rows x 2 vectors.
template <typename T>
void matmul_rows(const T* w, const T* x, T* y, std::size_t O, std::size_t I, std::size_t L) {
    using VT = simd::V<T>;
    constexpr std::size_t N = simd::Vec<T>::lanes;
    std::size_t l = 0;
    for (; l + 2 * N <= L; l += 2 * N) {
        std::size_t o = 0;
        for (; o + 4 <= O; o += 4) {
            VT a[4][2];
            for (int r = 0; r < 4; ++r) {
                a[r][0] = simd::load(y + (o + r) * L + l);
                a[r][1] = simd::load(y + (o + r) * L + l + N);
            }
            for (std::size_t i = 0; i < I; ++i) {
                const VT x0 = simd::load(x + i * L + l);
                const VT x1 = simd::load(x + i * L + l + N);
                for (int r = 0; r < 4; ++r) {
                    const T wv = w[(o + r) * I + i];
                    a[r][0] += wv * x0;
                    a[r][1] += wv * x1;
                }
            }
            for (int r = 0; r < 4; ++r) {
                simd::store(y + (o + r) * L + l, a[r][0]);
                simd::store(y + (o + r) * L + l + N, a[r][1]);
            }
        }
        for (; o < O; ++o) {
            VT a0 = simd::load(y + o * L + l), a1 = simd::load(y + o * L + l + N);
            for (std::size_t i = 0; i < I; ++i) {
                const T wv = w[o * I + i];
                a0 += wv * simd::load(x + i * L + l);
                a1 += wv * simd::load(x + i * L + l + N);
            }
            simd::store(y + o * L + l, a0);
            simd::store(y + o * L + l + N, a1);
        }
    }
    for (; l < L; ++l)
        for (std::size_t o = 0; o < O; ++o) {
            T acc = y[o * L + l];
            for (std::size_t i = 0; i < I; ++i) acc += w[o * I + i] * x[i * L + l];
            y[o * L + l] = acc;
        }
}

// dw[o, i] += sum_l g[o, l] x[i, l]. Register tile: 2 x 4 outputs.
template <typename T>
void outer_rows(const T* g, const T* x, T* dw, std::size_t O, std::size_t I, std::size_t L) {
    using VT = simd::V<T>;
    constexpr std::size_t N = simd::Vec<T>::lanes;
    const std::size_t Lv = L / N * N;
    std::size_t o = 0;
    for (; o + 2 <= O; o += 2) {
        const T* g0 = g + o * L;
        const T* g1 = g0 + L;
        std::size_t i = 0;
        for (; i + 4 <= I; i += 4) {
            VT a[2][4] = {};
            for (std::size_t l = 0; l < Lv; l += N) {
                const VT u0 = simd::load(g0 + l), u1 = simd::load(g1 + l);
                for (int q = 0; q < 4; ++q) {
                    const VT v = simd::load(x + (i + q) * L + l);
                    a[0][q] += u0 * v;
                    a[1][q] += u1 * v;
                }
            }
            for (int r = 0; r < 2; ++r)
                for (int q = 0; q < 4; ++q) {
                    const T* gr = r == 0 ? g0 : g1;
                    const T* xq = x + (i + q) * L;
                    T s = simd::hsum<T>(a[r][q]);
                    for (std::size_t l = Lv; l < L; ++l) s += gr[l] * xq[l];
                    dw[(o + r) * I + i + q] += s;
                }
        }
        for (; i < I; ++i) {
            dw[o * I + i] += dot(g0, x + i * L, L);
            dw[(o + 1) * I + i] += dot(g1, x + i * L, L);
        }
    }
    for (; o < O; ++o)
        for (std::size_t i = 0; i < I; ++i) dw[o * I + i] += dot(g + o * L, x + i * L, L);
}

}  // namespace

template <typename T>
void pointwise_conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias,
                              std::size_t out_channels, Tensor3<T>& y) {
    const std::size_t I = x.channels(), L = x.length(), O = out_channels;
    require(weight.size() == O * I, "pointwise weight shape");
    require(bias.empty() || bias.size() == O, "pointwise bias shape");
    y.resize(x.batch(), O, L);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        T* out = y.example(b).data();
        for (std::size_t o = 0; o < O; ++o) std::fill(out + o * L, out + (o + 1) * L, bias.empty() ? T(0) : bias[o]);
        matmul_rows(weight.data(), x.example(b).data(), out, O, I, L);
    }
}

template <typename T>
void pointwise_conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, const Tensor3<T>& dy, Tensor3<T>* dx,
                               std::span<T> dweight, std::span<T> dbias) {
    const std::size_t I = x.channels(), L = x.length(), O = dy.channels();
    require(dy.batch() == x.batch() && dy.length() == L && weight.size() == O * I, "pointwise backward shape");
    std::vector<T> wt;
    if (dx) {
        dx->resize(x.batch(), I, L);
        dx->zero();
        wt.resize(I * O);
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < I; ++i) wt[i * O + o] = weight[o * I + i];
    }
    for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* g = dy.example(b).data();
        if (!dbias.empty())
            for (std::size_t o = 0; o < O; ++o) dbias[o] += sum(g + o * L, L);
        outer_rows(g, x.example(b).data(), dweight.data(), O, I, L);
        if (dx) matmul_rows(wt.data(), g, dx->example(b).data(), I, O, L);
    }
}

namespace {

// cols[(i * k + j), l] = x[i, l + j - k/2], zero outside the signal.
template <typename T>
void im2col(const T* x, std::size_t I, std::size_t L, std::size_t k, std::vector<T>& cols) {
    cols.assign(I * k * L, T(0));
    const long half = static_cast<long>(k / 2);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const long off = static_cast<long>(j) - half;
            std::size_t lo, hi;
            shifted_range(off, L, lo, hi);
            if (hi > lo) std::memcpy(cols.data() + (i * k + j) * L + lo, x + i * L + (static_cast<long>(lo) + off),
                                     (hi - lo) * sizeof(T));
        }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, std::size_t I, std::size_t L, std::size_t k, T* dx) {
    const long half = static_cast<long>(k / 2);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const long off = static_cast<long>(j) - half;
            std::size_t lo, hi;
            shifted_range(off, L, lo, hi);
            const T* src = cols.data() + (i * k + j) * L;
            T* dst = dx + i * L + (static_cast<long>(lo) + off);
            for (std::size_t l = lo; l < hi; ++l) dst[l - lo] += src[l];
        }
}

}  // namespace

template <typename T>
void conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias, std::size_t out_channels,
                    std::size_t k, Tensor3<T>& y) {
    const std::size_t I = x.channels(), L = x.length(), O = out_channels;
    require(k % 2 == 1 && weight.size() == O * I * k, "conv weight shape");
    require(bias.empty() || bias.size() == O, "conv bias shape");
    y.resize(x.batch(), O, L);
    thread_local std::vector<T> cols;
    for (std::size_t b = 0; b < x.batch(); ++b) {
        im2col(x.example(b).data(), I, L, k, cols);
        T* out = y.example(b).data();
        for (std::size_t o = 0; o < O; ++o) std::fill(out + o * L, out + (o + 1) * L, bias.empty() ? T(0) : bias[o]);
        matmul_rows(weight.data(), cols.data(), out, O, I * k, L);
    }
}

template <typename T>
void conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, std::size_t k, const Tensor3<T>& dy, Tensor3<T>* dx,
                     std::span<T> dweight, std::span<T> dbias) {
    const std::size_t I = x.channels(), L = x.length(), O = dy.channels();
    require(dy.batch() == x.batch() && dy.length() == L && weight.size() == O * I * k, "conv backward shape");
    const std::size_t K = I * k;
    std::vector<T> wt;
    if (dx) {
        dx->resize(x.batch(), I, L);
        dx->zero();
        wt.resize(K * O);
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t c = 0; c < K; ++c) wt[c * O + o] = weight[o * K + c];
    }
    thread_local std::vector<T> cols, dcols;
    for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* g = dy.example(b).data();
        if (!dbias.empty())
            for (std::size_t o = 0; o < O; ++o) dbias[o] += sum(g + o * L, L);
        im2col(x.example(b).data(), I, L, k, cols);
        outer_rows(g, cols.data(), dweight.data(), O, K, L);
        if (dx) {
            dcols.assign(K * L, T(0));
            matmul_rows(wt.data(), g, dcols.data(), K, O, L);
            col2im_add(dcols, I, L, k, dx->example(b).data());
        }
    }
}

template <typename T>
void instance_norm_forward(const Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta, double eps,
                           Tensor3<T>& y, Tensor3<T>& xhat, std::vector<T>& inv_std) {
    const std::size_t C = x.channels(), L = x.length();
    require(gamma.size() == C && beta.size() == C, "instance norm affine shape");
    y.resize(x.batch(), C, L);
    xhat.resize(x.batch(), C, L);
    inv_std.resize(x.batch() * C);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* in = x.row(b, c).data();
            T* h = xhat.row(b, c).data();
            T* out = y.row(b, c).data();
            const T mean = sum(in, L) / static_cast<T>(L);
            for (std::size_t l = 0; l < L; ++l) h[l] = in[l] - mean;
            const T var = dot(h, h, L) / static_cast<T>(L);
            const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
            inv_std[b * C + c] = is;
            const T g = gamma[c], be = beta[c];
            for (std::size_t l = 0; l < L; ++l) {
                h[l] *= is;
                out[l] = g * h[l] + be;
            }
        }
    }
}

template <typename T>
void instance_norm_backward(const Tensor3<T>& xhat, const std::vector<T>& inv_std, std::span<const T> gamma,
                            const Tensor3<T>& dy, Tensor3<T>& dx, std::span<T> dgamma, std::span<T> dbeta) {
    const std::size_t C = xhat.channels(), L = xhat.length();
    require(dy.same_shape(xhat), "instance norm backward shape");
    dx.resize(xhat.batch(), C, L);
    const T n = static_cast<T>(L);
    for (std::size_t b = 0; b < xhat.batch(); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* h = xhat.row(b, c).data();
            const T* g = dy.row(b, c).data();
            T* out = dx.row(b, c).data();
            const T sg = sum(g, L);
            const T sgh = dot(g, h, L);
            dgamma[c] += sgh;
            dbeta[c] += sg;
            // dxhat = gamma * dy
            const T scale = gamma[c] * inv_std[b * C + c] / n;
            for (std::size_t l = 0; l < L; ++l) out[l] = scale * (n * g[l] - sg - h[l] * sgh);
        }
    }
}

template <typename T>
void avg_pool_forward(const Tensor3<T>& x, std::size_t kernel, std::size_t stride, Tensor3<T>& y) {
    require(kernel > 0 && stride > 0 && x.length() >= kernel, "avg pool window longer than input");
    const std::size_t L = x.length(), Lo = (L - kernel) / stride + 1;
    y.resize(x.batch(), x.channels(), Lo);
    const T inv = T(1) / static_cast<T>(kernel);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            const T* in = x.row(b, c).data();
            T* out = y.row(b, c).data();
            if (kernel == 2 && stride == 2) {
                for (std::size_t l = 0; l < Lo; ++l) out[l] = (in[2 * l] + in[2 * l + 1]) * inv;
                continue;
            }
            for (std::size_t l = 0; l < Lo; ++l) {
                T s = 0;
                for (std::size_t j = 0; j < kernel; ++j) s += in[l * stride + j];
                out[l] = s * inv;
            }
        }
    }
}

template <typename T>
void avg_pool_backward(const Tensor3<T>& dy, std::size_t kernel, std::size_t stride, Tensor3<T>& dx) {
    require(dx.batch() == dy.batch() && dx.channels() == dy.channels(), "avg pool backward shape");
    require((dx.length() - kernel) / stride + 1 == dy.length(), "avg pool backward length");
    dx.zero();
    const T inv = T(1) / static_cast<T>(kernel);
    for (std::size_t b = 0; b < dy.batch(); ++b) {
        for (std::size_t c = 0; c < dy.channels(); ++c) {
            const T* g = dy.row(b, c).data();
            T* out = dx.row(b, c).data();
            for (std::size_t l = 0; l < dy.length(); ++l)
                for (std::size_t j = 0; j < kernel; ++j) out[l * stride + j] += g[l] * inv;
        }
    }
}

template <typename T>
void global_avg_pool_forward(const Tensor3<T>& x, Tensor3<T>& y) {
    y.resize(x.batch(), x.channels(), 1);
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t c = 0; c < x.channels(); ++c)
            y(b, c, 0) = sum(x.row(b, c).data(), x.length()) / static_cast<T>(x.length());
}

template <typename T>
void global_avg_pool_backward(const Tensor3<T>& dy, std::size_t length, Tensor3<T>& dx) {
    dx.resize(dy.batch(), dy.channels(), length);
    for (std::size_t b = 0; b < dy.batch(); ++b)
        for (std::size_t c = 0; c < dy.channels(); ++c) {
            const T v = dy(b, c, 0) / static_cast<T>(length);
            auto r = dx.row(b, c);
            std::fill(r.begin(), r.end(), v);
        }
}

template <typename T>
void linear_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias, std::size_t out_features,
                    Tensor3<T>& y) {
    const std::size_t I = x.channels() * x.length();
    require(weight.size() == out_features * I && (bias.empty() || bias.size() == out_features), "linear shape");
    y.resize(x.batch(), out_features, 1);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* in = x.example(b).data();
        for (std::size_t o = 0; o < out_features; ++o)
            y(b, o, 0) = (bias.empty() ? T(0) : bias[o]) + dot(weight.data() + o * I, in, I);
    }
}

template <typename T>
void linear_backward(const Tensor3<T>& x, std::span<const T> weight, const Tensor3<T>& dy, Tensor3<T>* dx,
                     std::span<T> dweight, std::span<T> dbias) {
    const std::size_t I = x.channels() * x.length(), O = dy.channels();
    require(weight.size() == O * I && dy.batch() == x.batch(), "linear backward shape");
    if (dx) {
        dx->resize(x.batch(), x.channels(), x.length());
        dx->zero();
    }
    for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* in = x.example(b).data();
        for (std::size_t o = 0; o < O; ++o) {
            const T g = dy(b, o, 0);
            if (!dbias.empty()) dbias[o] += g;
            axpy(g, in, dweight.data() + o * I, I);
            if (dx) axpy(g, weight.data() + o * I, dx->example(b).data(), I);
        }
    }
}

template <typename T>
void dropout_forward(std::span<const T> x, double p, Mode mode, std::mt19937_64& rng, std::span<T> y, std::vector<T>& scale) {
    require(p >= 0 && p < 1, "dropout probability must be in [0, 1)");
    require(y.size() == x.size(), "dropout size mismatch");
    if (mode == Mode::Eval || p == 0) {
        scale.assign(x.size(), T(1));
        if (x.data() != y.data()) std::copy(x.begin(), x.end(), y.begin());
        return;
    }
    scale.resize(x.size());
    const T keep = static_cast<T>(1.0 / (1.0 - p));
    // 16-bit threshold: four keep/drop decisions per engine draw.
    const auto threshold = static_cast<std::uint16_t>(std::min(65535L, std::lround(p * 65536.0)));
    const std::size_t n = x.size();
    thread_local std::vector<std::uint16_t> bits;
    bits.resize((n + 3) / 4 * 4);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        const std::uint64_t r = rng();
        std::memcpy(&bits[i], &r, sizeof(r));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const T s = bits[i] >= threshold ? keep : T(0);
        scale[i] = s;
        y[i] = x[i] * s;
    }
}

template <typename T>
void dropout_backward(std::span<const T> dy, const std::vector<T>& scale, std::span<T> dx) {
    require(dy.size() == scale.size() && dx.size() == dy.size(), "dropout backward size mismatch");
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * scale[i];
}

template <typename T>
void residual_add(const Tensor3<T>& x, Tensor3<T>& y) {
    require(x.batch() == y.batch() && x.length() == y.length() && x.channels() <= y.channels(), "residual shape");
    for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* in = x.example(b).data();
        T* out = y.example(b).data();
        const std::size_t n = x.channels() * x.length();
        for (std::size_t i = 0; i < n; ++i) out[i] += in[i];
    }
}

LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
    require(pred.size() == target.size() && !pred.empty(), "mse size mismatch");
    LossAndGrad r;
    r.grad.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.loss += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.loss /= n;
    return r;
}

#define EDR_INSTANTIATE(T)                                                                                             \
    template void gelu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);                              \
    template void depthwise_conv1d_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,  \
                                              std::size_t, Tensor3<T>&);                                               \
    template void depthwise_conv1d_backward<T>(const Tensor3<T>&, std::span<const T>, std::size_t, std::size_t,        \
                                               const Tensor3<T>&, Tensor3<T>*, std::span<T>, std::span<T>);            \
    template void pointwise_conv1d_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,  \
                                              Tensor3<T>&);                                                            \
    template void pointwise_conv1d_backward<T>(const Tensor3<T>&, std::span<const T>, const Tensor3<T>&, Tensor3<T>*,  \
                                               std::span<T>, std::span<T>);                                            \
    template void conv1d_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,            \
                                    std::size_t, Tensor3<T>&);                                                         \
    template void conv1d_backward<T>(const Tensor3<T>&, std::span<const T>, std::size_t, const Tensor3<T>&,            \
                                     Tensor3<T>*, std::span<T>, std::span<T>);                                         \
    template void instance_norm_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, double,          \
                                           Tensor3<T>&, Tensor3<T>&, std::vector<T>&);                                 \
    template void instance_norm_backward<T>(const Tensor3<T>&, const std::vector<T>&, std::span<const T>,              \
                                            const Tensor3<T>&, Tensor3<T>&, std::span<T>, std::span<T>);               \
    template void avg_pool_forward<T>(const Tensor3<T>&, std::size_t, std::size_t, Tensor3<T>&);                       \
    template void avg_pool_backward<T>(const Tensor3<T>&, std::size_t, std::size_t, Tensor3<T>&);                      \
    template void global_avg_pool_forward<T>(const Tensor3<T>&, Tensor3<T>&);                                          \
    template void global_avg_pool_backward<T>(const Tensor3<T>&, std::size_t, Tensor3<T>&);                            \
    template void linear_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,            \
                                    Tensor3<T>&);                                                                      \
    template void linear_backward<T>(const Tensor3<T>&, std::span<const T>, const Tensor3<T>&, Tensor3<T>*,            \
                                     std::span<T>, std::span<T>);                                                      \
    template void dropout_forward<T>(std::span<const T>, double, Mode, std::mt19937_64&, std::span<T>, std::vector<T>&);  \
    template void dropout_backward<T>(std::span<const T>, const std::vector<T>&, std::span<T>);                        \
    template void residual_add<T>(const Tensor3<T>&, Tensor3<T>&);

EDR_INSTANTIATE(float)
EDR_INSTANTIATE(double)

}  // namespace edr::nn
