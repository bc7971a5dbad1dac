#pragma once

// Fixed-order SIMD reductions and fast float transcendentals for the kernels.
// Built on GCC/Clang vector extensions; lane count and summation order are
// compile-time constants, so results do not depend on the target ISA.

#include <cstddef>
#include <cstdint>
#include <cstring>

namespace edr::nn::simd {

template <typename T>
struct Vec {
    static constexpr std::size_t lanes = 32 / sizeof(T);
    typedef T type __attribute__((vector_size(32)));
};

template <typename T>
using V = typename Vec<T>::type;

template <typename T>
inline V<T> load(const T* p) {
    V<T> v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

template <typename T>
inline void store(T* p, V<T> v) {
    std::memcpy(p, &v, sizeof(v));
}

template <typename T>
inline T hsum(V<T> v) {
    constexpr std::size_t n = Vec<T>::lanes;
    T a[n];
    std::memcpy(a, &v, sizeof(v));
    // pairwise, fixed tree
    for (std::size_t w = n / 2; w > 0; w /= 2)
        for (std::size_t i = 0; i < w; ++i) a[i] += a[i + w];
    return a[0];
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    constexpr std::size_t N = Vec<T>::lanes;
    V<T> acc0 = {}, acc1 = {};
    std::size_t i = 0;
    for (; i + 2 * N <= n; i += 2 * N) {
        acc0 += load(a + i) * load(b + i);
        acc1 += load(a + i + N) * load(b + i + N);
    }
    for (; i + N <= n; i += N) acc0 += load(a + i) * load(b + i);
    T s = hsum<T>(acc0 + acc1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T sum(const T* a, std::size_t n) {
    constexpr std::size_t N = Vec<T>::lanes;
    V<T> acc0 = {}, acc1 = {};
    std::size_t i = 0;
    for (; i + 2 * N <= n; i += 2 * N) {
        acc0 += load(a + i);
        acc1 += load(a + i + N);
    }
    for (; i + N <= n; i += N) acc0 += load(a + i);
    T s = hsum<T>(acc0 + acc1);
    for (; i < n; ++i) s += a[i];
    return s;
}

/// Four dot products sharing the left operand: out[k] = <g, x_k>.
template <typename T>
void dot4(const T* g, const T* x0, const T* x1, const T* x2, const T* x3, std::size_t n, T out[4]) {
    constexpr std::size_t N = Vec<T>::lanes;
    V<T> a0 = {}, a1 = {}, a2 = {}, a3 = {};
    std::size_t i = 0;
    for (; i + N <= n; i += N) {
        const V<T> v = load(g + i);
        a0 += v * load(x0 + i);
        a1 += v * load(x1 + i);
        a2 += v * load(x2 + i);
        a3 += v * load(x3 + i);
    }
    out[0] = hsum<T>(a0);
    out[1] = hsum<T>(a1);
    out[2] = hsum<T>(a2);
    out[3] = hsum<T>(a3);
    for (; i < n; ++i) {
        out[0] += g[i] * x0[i];
        out[1] += g[i] * x1[i];
        out[2] += g[i] * x2[i];
        out[3] += g[i] * x3[i];
    }
}

using VF = V<float>;
typedef std::int32_t VI __attribute__((vector_size(32)));

inline VF splat(float v) { return VF{} + v; }

/// exp(x) on 8 lanes, relative error ~2e-7 on [-87, 88].
inline VF exp_fast(VF x) {
    x = x < -87.0f ? splat(-87.0f) : x;
    x = x > 88.0f ? splat(88.0f) : x;
    const VF t = x * 1.44269504088896341f + 0.5f;
    VF n = __builtin_convertvector(__builtin_convertvector(t, VI), VF);
    n = n > t ? n - 1.0f : n;  // floor
    VF r = x - n * 0.693145751953125f;
    r -= n * 1.42860682030941723212e-6f;
    VF p = splat(1.98756915e-4f);
    p = p * r + 1.39819994e-3f;
    p = p * r + 8.33345205e-3f;
    p = p * r + 4.16657962e-2f;
    p = p * r + 1.66666657e-1f;
    p = p * r + 5.00000000e-1f;
    p = p * r * r + r + 1.0f;
    const VI e = (__builtin_convertvector(n, VI) + 127) << 23;
    VF scale;
    std::memcpy(&scale, &e, sizeof(scale));
    return p * scale;
}

/// erf(x) on 8 lanes, absolute error < 1.5e-7.
inline VF erf_fast(VF x) {
    const VF a = x < 0.0f ? -x : x;
    const VF t = 1.0f / (1.0f + 0.3275911f * a);
    const VF poly =
        t * (0.254829592f + t * (-0.284496736f + t * (1.421413741f + t * (-1.453152027f + t * 1.061405429f))));
    const VF r = 1.0f - poly * exp_fast(-a * a);
    return x < 0.0f ? -r : r;
}

}  // namespace edr::nn::simd
