#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"

#include "edr/nn/kernels.hpp"

using namespace edr::nn;
using T3 = Tensor3<double>;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

T3 rand_tensor(std::size_t b, std::size_t c, std::size_t l, std::uint64_t seed) { return T3(b, c, l, randn(b * c * l, seed)); }

// Loss = <w, f(x)> with fixed random w; returns the central difference of
// the loss with respect to v[i].
double numeric(std::vector<double>& v, std::size_t i, const std::function<double()>& loss) {
    const double h = 1e-6, keep = v[i];
    v[i] = keep + h;
    const double up = loss();
    v[i] = keep - h;
    const double down = loss();
    v[i] = keep;
    return (up - down) / (2 * h);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void expect_close(const std::vector<double>& analytic, std::vector<double>& v, const std::function<double()>& loss) {
    REQUIRE(analytic.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double n = numeric(v, i, loss);
        CHECK(std::fabs(analytic[i] - n) <= 1e-6 * std::max(1.0, std::fabs(n)));
    }
}

}  // namespace

TEST_CASE("gelu matches the erf form and its derivative") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429));
    CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707));
    CHECK(std::fabs(gelu(10.0) - 10.0) < 1e-9);
    for (double x = -6; x <= 6; x += 0.37) {
        const double n = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
        CHECK(gelu_grad(x) == doctest::Approx(n).epsilon(1e-7));
    }
    const std::vector<float> xf{-3.f, -0.5f, 0.f, 0.7f, 4.f};
    std::vector<float> yf(xf.size());
    gelu_forward<float>(xf, yf);
    for (std::size_t i = 0; i < xf.size(); ++i) CHECK(yf[i] == doctest::Approx(gelu(xf[i])).epsilon(1e-6));
}

TEST_CASE("depthwise convolution gradients") {
    const std::size_t C = 3, L = 20, k = 5, dil = 2;
    T3 x = rand_tensor(2, C, L, 1);
    auto kernel = randn(C * k, 2), bias = randn(C, 3);
    const auto w = randn(2 * C * L, 4);
    auto loss = [&] {
        T3 y;
        depthwise_conv1d_forward<double>(x, kernel, bias, k, dil, y);
        return dot(y.values(), w);
    };
    T3 dy(2, C, L, w), dx;
    std::vector<double> dk(C * k, 0.0), db(C, 0.0);
    depthwise_conv1d_backward<double>(x, kernel, k, dil, dy, &dx, dk, db);
    expect_close(dx.values(), x.values(), loss);
    expect_close(dk, kernel, loss);
    expect_close(db, bias, loss);
}

TEST_CASE("depthwise convolution by hand") {
    const T3 x(1, 2, 4, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
    const std::vector<double> k{1, 1, 1, 0, 0, 0};
    T3 y;
    depthwise_conv1d_forward<double>(x, k, {}, 3, 1, y);
    CHECK(std::vector<double>(y.row(0, 0).begin(), y.row(0, 0).end()) == std::vector<double>{3, 6, 9, 7});
    for (double v : y.row(0, 1)) CHECK(v == 0.0);

    const std::vector<double> id{0, 1, 0, 0, 1, 0};
    depthwise_conv1d_forward<double>(x, id, {}, 3, 1, y);
    CHECK(y.values() == x.values());

    // zeroing channel 1 leaves channel 0 untouched
    T3 z = x;
    for (auto& v : z.row(0, 1)) v = 0;
    T3 yz;
    const std::vector<double> k2{0.5, -1, 2, 1, 3, -2};
    depthwise_conv1d_forward<double>(x, k2, {}, 3, 1, y);
    depthwise_conv1d_forward<double>(z, k2, {}, 3, 1, yz);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(y(0, 0, l) == yz(0, 0, l));
        CHECK(yz(0, 1, l) == 0.0);
    }
    std::vector<double> even(4, 1.0);
    CHECK_THROWS(depthwise_conv1d_forward<double>(x, even, {}, 2, 1, y));
}

TEST_CASE("pointwise and dense convolution gradients") {
    T3 x = rand_tensor(2, 3, 11, 5);
    auto pw = randn(4 * 3, 6), pb = randn(4, 7);
    const auto w = randn(2 * 4 * 11, 8);
    auto loss_pw = [&] {
        T3 y;
        pointwise_conv1d_forward<double>(x, pw, pb, 4, y);
        return dot(y.values(), w);
    };
    T3 dy(2, 4, 11, w), dx;
    std::vector<double> dpw(pw.size(), 0.0), dpb(4, 0.0);
    pointwise_conv1d_backward<double>(x, pw, dy, &dx, dpw, dpb);
    expect_close(dx.values(), x.values(), loss_pw);
    expect_close(dpw, pw, loss_pw);
    expect_close(dpb, pb, loss_pw);

    auto cw = randn(4 * 3 * 7, 9), cb = randn(4, 10);
    auto loss_c = [&] {
        T3 y;
        conv1d_forward<double>(x, cw, cb, 4, 7, y);
        return dot(y.values(), w);
    };
    std::vector<double> dcw(cw.size(), 0.0), dcb(4, 0.0);
    conv1d_backward<double>(x, cw, 7, dy, &dx, dcw, dcb);
    expect_close(dx.values(), x.values(), loss_c);
    expect_close(dcw, cw, loss_c);
    expect_close(dcb, cb, loss_c);
}

TEST_CASE("instance norm gradients and statistics") {
    T3 x = rand_tensor(2, 3, 16, 11);
    auto gamma = randn(3, 12), beta = randn(3, 13);
    const auto w = randn(x.size(), 14);
    T3 y, xhat;
    std::vector<double> inv;
    auto loss = [&] {
        T3 yy, xh;
        std::vector<double> is;
        instance_norm_forward<double>(x, gamma, beta, 1e-5, yy, xh, is);
        return dot(yy.values(), w);
    };
    instance_norm_forward<double>(x, gamma, beta, 1e-5, y, xhat, inv);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 3; ++c) {
            double m = 0, s = 0;
            for (double v : xhat.row(b, c)) m += v;
            m /= 16;
            for (double v : xhat.row(b, c)) s += (v - m) * (v - m);
            CHECK(std::fabs(m) < 1e-12);
            CHECK(s / 16 == doctest::Approx(1.0).epsilon(1e-3));
        }
    T3 dy(2, 3, 16, w), dx;
    std::vector<double> dg(3, 0.0), dbt(3, 0.0);
    instance_norm_backward<double>(xhat, inv, gamma, dy, dx, dg, dbt);
    expect_close(dx.values(), x.values(), loss);
    expect_close(dg, gamma, loss);
    expect_close(dbt, beta, loss);
}

TEST_CASE("pooling, linear and residual") {
    T3 x = rand_tensor(2, 3, 13, 20);
    const auto w = randn(2 * 3 * 6, 21);
    auto loss = [&] {
        T3 y;
        avg_pool_forward<double>(x, 2, 2, y);
        return dot(y.values(), w);
    };
    T3 y;
    avg_pool_forward<double>(x, 2, 2, y);
    CHECK(y.length() == 6);
    CHECK(y(1, 2, 3) == doctest::Approx((x(1, 2, 6) + x(1, 2, 7)) / 2));
    T3 dy(2, 3, 6, w), dx(2, 3, 13);
    avg_pool_backward<double>(dy, 2, 2, dx);
    // the trailing sample never reaches the output
    CHECK(dx(1, 1, 12) == 0.0);
    expect_close(dx.values(), x.values(), loss);

    T3 g;
    global_avg_pool_forward<double>(x, g);
    CHECK(g.length() == 1);
    double s = 0;
    for (double v : x.row(0, 1)) s += v;
    CHECK(g(0, 1, 0) == doctest::Approx(s / 13));

    T3 in = rand_tensor(2, 5, 1, 22);
    auto lw = randn(3 * 5, 23), lb = randn(3, 24);
    const auto w2 = randn(6, 25);
    auto lloss = [&] {
        T3 out;
        linear_forward<double>(in, lw, lb, 3, out);
        return dot(out.values(), w2);
    };
    T3 ldy(2, 3, 1, w2), ldx;
    std::vector<double> dlw(lw.size(), 0.0), dlb(3, 0.0);
    linear_backward<double>(in, lw, ldy, &ldx, dlw, dlb);
    expect_close(ldx.values(), in.values(), lloss);
    expect_close(dlw, lw, lloss);
    expect_close(dlb, lb, lloss);

    T3 a = rand_tensor(1, 2, 4, 30), r = rand_tensor(1, 3, 4, 31);
    const T3 r0 = r;
    residual_add(a, r);
    CHECK(r(0, 1, 2) == doctest::Approx(r0(0, 1, 2) + a(0, 1, 2)));
    CHECK(r(0, 2, 2) == r0(0, 2, 2));
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(3);
    const std::vector<double> x(200000, 1.0);
    std::vector<double> y(x.size()), scale;
    dropout_forward<double>(x, 0.3, Mode::Train, rng, y, scale);
    std::size_t zeros = 0;
    double sum = 0;
    for (double v : y) {
        zeros += v == 0.0;
        sum += v;
    }
    CHECK(static_cast<double>(zeros) / 200000.0 == doctest::Approx(0.3).epsilon(0.02));
    CHECK(sum / 200000.0 == doctest::Approx(1.0).epsilon(0.01));

    std::vector<double> dx(x.size());
    dropout_backward<double>(std::vector<double>(x.size(), 2.0), scale, dx);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(dx[i] == 2.0 * scale[i]);

    std::vector<double> ye(x.size());
    dropout_forward<double>(x, 0.3, Mode::Eval, rng, ye, scale);
    CHECK(ye == x);
    dropout_forward<double>(x, 0.0, Mode::Train, rng, ye, scale);
    CHECK(ye == x);
}

TEST_CASE("mse loss") {
    const std::vector<double> p{1, 2, 3}, t{1, 4, 0};
    const auto r = mse_loss(p, t);
    CHECK(r.loss == doctest::Approx(13.0 / 3));
    CHECK(r.grad == std::vector<double>{0, -4.0 / 3, 2.0});
}

TEST_CASE("float path agrees with double path") {
    T3 x = rand_tensor(1, 4, 64, 40);
    Tensor3<float> xf(1, 4, 64, std::vector<float>(x.values().begin(), x.values().end()));
    const auto k = randn(4 * 7, 41), b = randn(4, 42);
    const std::vector<float> kf(k.begin(), k.end()), bf(b.begin(), b.end());
    T3 y;
    Tensor3<float> yf;
    depthwise_conv1d_forward<double>(x, k, b, 7, 1, y);
    depthwise_conv1d_forward<float>(xf, kf, bf, 7, 1, yf);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(yf.values()[i] == doctest::Approx(y.values()[i]).epsilon(1e-5));
}
