// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/mlp.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace snerg;

namespace {

// Input vector assembled by hand: diffuse, feature, then the direction
// encoded with explicit sin/cos calls.
std::vector<double> oracle_input(const Vec3& diffuse, const Vec4& feature, const Vec3& dir, int bands)
{
    std::vector<double> x{diffuse[0], diffuse[1], diffuse[2], feature[0], feature[1], feature[2], feature[3],
                          dir[0],     dir[1],     dir[2]};
    for (int j = 0; j < bands; ++j) {
        const double f = std::pow(2.0, j) * std::numbers::pi;
        for (int c = 0; c < 3; ++c) {
            x.push_back(std::sin(f * dir[c]));
        }
        for (int c = 0; c < 3; ++c) {
            x.push_back(std::cos(f * dir[c]));
        }
    }
    return x;
}

std::vector<double> oracle_forward(const DeferredMlp& mlp, std::vector<double> x)
{
    const auto& layers = mlp.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const DenseLayer& l = layers[li];
        std::vector<double> y(l.rows);
        for (int r = 0; r < l.rows; ++r) {
            double s = l.bias[r];
            for (int c = 0; c < l.cols; ++c) {
                s += l.weights[r * l.cols + c] * x[c];
            }
            y[r] = li + 1 < layers.size() ? (s > 0.0 ? s : 0.0) : 1.0 / (1.0 + std::exp(-s));
        }
        x = std::move(y);
    }
    return x;
}

DeferredMlp with_output_bias(DeferredMlp mlp, double b)
{
    std::vector<double> p(mlp.parameter_count(), 0.0);
    std::fill(p.end() - 3, p.end(), b);
    mlp.set_parameters(p);
    return mlp;
}

} // namespace

TEST_CASE("network shape")
{
    const DeferredMlp z = DeferredMlp::zeros();
    CHECK(z.input_width() == 3 + 4 + 3 + 6 * 4);
    REQUIRE(z.layers().size() == 3);
    CHECK(z.layers()[0].rows == 16);
    CHECK(z.layers()[1].rows == 16);
    CHECK(z.layers()[2].rows == 3);
    CHECK(z.parameter_count() == 34 * 16 + 16 + 16 * 16 + 16 + 16 * 3 + 3);
    CHECK(DeferredMlp::input_width(0) == 10);

    std::vector<DenseLayer> bad = z.layers();
    bad[1].cols = 15;
    CHECK_THROWS_AS(DeferredMlp(4, bad), std::invalid_argument);
    bad = z.layers();
    bad[0].weights[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(DeferredMlp(4, bad), std::invalid_argument);
    CHECK_THROWS_AS(DeferredMlp(3, z.layers()), std::invalid_argument);
}

TEST_CASE("forward pass special cases")
{
    const DeferredMlp z = DeferredMlp::zeros();
    const std::vector<double> x(z.input_width(), 0.3);
    CHECK(mlp_forward(z, x) == Vec3::Constant(0.5));

    const DeferredMlp b = with_output_bias(DeferredMlp::zeros(), -1.25);
    CHECK(mlp_forward(b, x).isApprox(Vec3::Constant(1.0 / (1.0 + std::exp(1.25))), 1e-15));

    const std::vector<double> short_input(z.input_width() - 1, 0.0);
    CHECK_THROWS_AS(mlp_forward(z, short_input), std::invalid_argument);
}

TEST_CASE("toy network matches straight-line arithmetic")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int bands = trial % 3;
        DeferredMlp mlp = DeferredMlp::random(bands, 1000 + trial, {4, 4});
        // Random biases too, so the ReLU kinks are exercised.
        std::vector<double> p = mlp.parameters();
        for (auto& v : p) {
            v += 0.2 * n(rng);
        }
        mlp.set_parameters(p);

        const Vec3 diffuse(u(rng), u(rng), u(rng));
        const Vec4 feature(u(rng), u(rng), u(rng), u(rng));
        const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
        const auto x = oracle_input(diffuse, feature, dir, bands);
        const auto expect = oracle_forward(mlp, x);

        std::vector<double> built(mlp.input_width());
        build_shading_input(mlp, diffuse, feature, dir, built);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(built[i] - x[i]) < 1e-12);
        }
        const Vec3 got = mlp_forward(mlp, built);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(got[c] - expect[c]) < 1e-12);
        }

        const RayAccumulation acc{diffuse, feature, 0.7};
        const Vec3 shaded = shade_deferred(mlp, acc, dir);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(shaded[c] - std::clamp(diffuse[c] + expect[c], 0.0, 1.0)) < 1e-12);
        }
    }
}

TEST_CASE("deferred shading")
{
    const DeferredMlp z = DeferredMlp::zeros();
    const Vec3 dir(0, 0, -1);
    const RayAccumulation clear{Vec3(0.3, 0.2, 0.1), Vec4::Zero(), 0.0};
    CHECK(shade_deferred(z, clear, dir) == clear.diffuse);

    const RayAccumulation gray{Vec3::Constant(0.2), Vec4::Zero(), 0.5};
    CHECK(shade_deferred(z, gray, dir).isApprox(Vec3::Constant(0.7), 1e-15));

    const RayAccumulation bright{Vec3::Constant(0.9), Vec4::Ones(), 1.0};
    CHECK(shade_deferred(z, bright, dir) == Vec3::Ones());

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const DeferredMlp r = DeferredMlp::random(4, 77);
    for (int i = 0; i < 1000; ++i) {
        const RayAccumulation acc{Vec3(u(rng), u(rng), u(rng)), Vec4(u(rng), u(rng), u(rng), u(rng)), u(rng)};
        const Vec3 d = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized();
        const Vec3 c = shade_deferred(r, acc, d);
        CHECK(c.minCoeff() >= 0.0);
        CHECK(c.maxCoeff() <= 1.0);
        CHECK(c == shade_deferred(r, acc, d));
    }
}

TEST_CASE("random initialization")
{
    const DeferredMlp a = DeferredMlp::random(4, 5);
    const DeferredMlp b = DeferredMlp::random(4, 5);
    const DeferredMlp c = DeferredMlp::random(4, 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (const DenseLayer& l : a.layers()) {
        const double limit = std::sqrt(6.0 / (l.rows + l.cols));
        for (double w : l.weights) {
            CHECK(std::abs(w) <= limit);
        }
        for (double v : l.bias) {
            CHECK(v == 0.0);
        }
    }

    const DeferredMlp d = default_shading_mlp();
    CHECK(d.layers().back().bias == std::vector<double>(3, -3.0));

    DeferredMlp e = a;
    const std::vector<double> p = c.parameters();
    e.set_parameters(p);
    CHECK(e == c);
    CHECK_THROWS_AS(e.set_parameters(std::span(p).first(p.size() - 1)), std::invalid_argument);
}
