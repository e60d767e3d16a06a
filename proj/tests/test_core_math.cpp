// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/core_math.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace snerg;

namespace {

// Transmittance recomputed from scratch for every sample.
RayAccumulation brute_force(const std::vector<SampleValue>& s, const std::vector<double>& d)
{
    RayAccumulation acc;
    double optical = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        double before = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            before += s[j].density * d[j];
        }
        const double w = std::exp(-before) * (1.0 - std::exp(-s[k].density * d[k]));
        acc.diffuse += w * s[k].diffuse;
        acc.feature += w * s[k].feature;
        optical += s[k].density * d[k];
    }
    acc.alpha = 1.0 - std::exp(-optical);
    return acc;
}

double max_diff(const RayAccumulation& a, const RayAccumulation& b)
{
    return std::max({(a.diffuse - b.diffuse).cwiseAbs().maxCoeff(), (a.feature - b.feature).cwiseAbs().maxCoeff(),
                     std::abs(a.alpha - b.alpha)});
}

SampleValue random_sample(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::exponential_distribution<double> dens(0.5);
    SampleValue s;
    s.density = u(rng) < 0.2 ? 0.0 : dens(rng);
    s.diffuse = Vec3(u(rng), u(rng), u(rng));
    s.feature = Vec4(u(rng), u(rng), u(rng), u(rng));
    return s;
}

} // namespace

TEST_CASE("decay")
{
    CHECK(decay(0.0) == 0.0);
    CHECK(decay(1e9) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(decay(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(decay(-1e-300), std::invalid_argument);
    CHECK_THROWS_AS(decay(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);

    double prev = 0.0;
    for (double x = 0.0; x < 50.0; x += 0.01) {
        const double y = decay(x);
        CHECK(y >= prev);
        CHECK(y <= 1.0);
        // 1 - exp(-x) only rounds to 1 once exp(-x) drops below half an ulp.
        if (x < 36.0) {
            CHECK(y < 1.0);
        }
        prev = y;
    }
    CHECK(decay(1e-300) == doctest::Approx(1e-300).epsilon(1e-12));
}

TEST_CASE("composite small cases")
{
    const RayAccumulation empty = composite({}, {});
    CHECK(empty.alpha == 0.0);
    CHECK(empty.diffuse.isZero());
    CHECK(empty.feature.isZero());

    SampleValue opaque{1e9, Vec3(1.0, 0.5, 0.0), Vec4(0.25, 0.5, 0.75, 1.0)};
    const std::vector<double> one{1.0};
    const RayAccumulation o = composite(std::span(&opaque, 1), one);
    CHECK(o.alpha == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((o.diffuse - Vec3(1.0, 0.5, 0.0)).norm() < 1e-12);

    const double ln2 = std::log(2.0);
    std::vector<SampleValue> two{{1.0, Vec3(1, 0, 0), Vec4(1, 0, 0, 0)}, {1.0, Vec3(0, 1, 0), Vec4(0, 0, 0, 1)}};
    const std::vector<double> d{ln2, ln2};
    const RayAccumulation t = composite(two, d);
    CHECK(t.diffuse.x() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(t.diffuse.y() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t.diffuse.z() == 0.0);
    CHECK(t.feature[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(t.feature[3] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t.alpha == doctest::Approx(0.75).epsilon(1e-15));

    CHECK_THROWS_AS(composite(two, one), std::invalid_argument);
    const std::vector<double> bad{ln2, 0.0};
    CHECK_THROWS_AS(composite(two, bad), std::invalid_argument);
}

TEST_CASE("composite matches the brute-force sum")
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(0, 32);
    std::uniform_real_distribution<double> delta(1e-3, 0.5);
    double worst = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = len(rng);
        std::vector<SampleValue> s;
        std::vector<double> d;
        for (int k = 0; k < n; ++k) {
            s.push_back(random_sample(rng));
            d.push_back(delta(rng));
        }
        const RayAccumulation acc = composite(s, d);
        worst = std::max(worst, max_diff(acc, brute_force(s, d)));

        // Channel bound: premultiplied colors never exceed alpha.
        CHECK(acc.alpha >= 0.0);
        CHECK(acc.alpha <= 1.0);
        CHECK(acc.diffuse.maxCoeff() <= acc.alpha + 1e-6);
        CHECK(acc.feature.maxCoeff() <= acc.alpha + 1e-6);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("quadrature weights telescope to alpha")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<SampleValue> s;
        std::vector<double> d;
        for (int k = 0; k < 24; ++k) {
            SampleValue v = random_sample(rng);
            // White samples make the accumulated color equal the weight sum.
            v.diffuse = Vec3::Ones();
            s.push_back(v);
            d.push_back(0.1);
        }
        const RayAccumulation acc = composite(s, d);
        CHECK(std::abs(acc.diffuse.x() - acc.alpha) <= 1e-12);
    }
}

TEST_CASE("splitting a sample in two halves is invisible")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<SampleValue> s;
        std::vector<double> d;
        std::vector<SampleValue> split;
        std::vector<double> split_d;
        for (int k = 0; k < 10; ++k) {
            const SampleValue v = random_sample(rng);
            const double delta = 0.05 + 0.3 * std::generate_canonical<double, 53>(rng);
            s.push_back(v);
            d.push_back(delta);
            split.push_back(v);
            split.push_back(v);
            split_d.push_back(delta / 2);
            split_d.push_back(delta / 2);
        }
        CHECK(max_diff(composite(s, d), composite(split, split_d)) <= 1e-12);
    }
}

TEST_CASE("positional encoding")
{
    const std::vector<double> zero{0.0, 0.0, 0.0};
    const auto z = positional_encode(zero, 4);
    REQUIRE(z.size() == 27);
    for (int i = 0; i < 3; ++i) {
        CHECK(z[i] == 0.0);
    }
    for (int band = 0; band < 4; ++band) {
        for (int c = 0; c < 3; ++c) {
            CHECK(z[3 + band * 6 + c] == 0.0);
            CHECK(z[3 + band * 6 + 3 + c] == 1.0);
        }
    }

    const std::vector<double> v{0.3, -0.7};
    CHECK(positional_encode(v, 0) == v);

    const std::vector<double> half{0.5};
    const auto h = positional_encode(half, 2);
    const std::vector<double> expected{0.5, 1.0, 0.0, 0.0, -1.0};
    REQUIRE(h.size() == expected.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        CHECK(h[i] == doctest::Approx(expected[i]).epsilon(1e-12).scale(1.0));
    }

    // Against direct sin/cos on random inputs.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> p{u(rng), u(rng), u(rng)};
        const auto e = positional_encode(p, 8);
        REQUIRE(e.size() == static_cast<std::size_t>(encoded_width(3, 8)));
        for (int band = 0; band < 8; ++band) {
            const double f = std::ldexp(std::numbers::pi, band);
            for (int c = 0; c < 3; ++c) {
                CHECK(std::abs(e[3 + band * 6 + c] - std::sin(f * p[c])) < 1e-9);
                CHECK(std::abs(e[3 + band * 6 + 3 + c] - std::cos(f * p[c])) < 1e-9);
            }
        }
    }
}

TEST_CASE("ray-box intersection")
{
    const Vec3 lo = Vec3::Constant(-0.5);
    const Vec3 hi = Vec3::Constant(0.5);
    auto hit = ray_box_intersect(Ray::through(Vec3(-2, 0, 0), Vec3(1, 0, 0)), lo, hi);
    REQUIRE(hit);
    CHECK(hit->t_near == doctest::Approx(1.5));
    CHECK(hit->t_far == doctest::Approx(2.5));

    hit = ray_box_intersect(Ray::through(Vec3(0.1, 0.2, -0.3), Vec3(1, 2, 3)), lo, hi);
    REQUIRE(hit);
    CHECK(hit->t_near == 0.0);
    CHECK(hit->t_far > 0.0);

    CHECK_FALSE(ray_box_intersect(Ray::through(Vec3(-2, 0.7, 0), Vec3(1, 0, 0)), lo, hi));
    CHECK_FALSE(ray_box_intersect(Ray::through(Vec3(2, 0, 0), Vec3(1, 0, 0)), lo, hi));
    CHECK_THROWS_AS(ray_box_intersect(Ray{}, hi, lo), std::invalid_argument);
    CHECK_THROWS_AS(ray_box_intersect(Ray{}, lo, Vec3(0.5, -0.5, 0.5)), std::invalid_argument);
}

TEST_CASE("ray-box agrees with dense marching")
{
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Box box{Vec3(-1.0, -0.5, -0.25), Vec3(0.75, 1.0, 0.5)};
    const double t_max = 12.0;
    const int steps = 10000;
    int mismatches = 0;
    for (int trial = 0; trial < 300; ++trial) {
        Vec3 dir(u(rng), u(rng), u(rng));
        if (dir.norm() < 1e-3) {
            continue;
        }
        const Ray ray = Ray::through(Vec3(u(rng), u(rng), u(rng)), dir);
        const auto hit = ray_box_intersect(ray, box.min, box.max);
        for (int i = 0; i < steps; ++i) {
            const double t = (i + 0.5) * t_max / steps;
            const bool inside = box.contains(ray.at(t));
            const bool predicted = hit && t >= hit->t_near && t <= hit->t_far;
            if (inside != predicted) {
                // Only tolerate disagreement within rounding of a face.
                const double edge = hit ? std::min(std::abs(t - hit->t_near), std::abs(t - hit->t_far)) : 1.0;
                if (edge > 1e-9) {
                    ++mismatches;
                }
            }
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("pinhole rays")
{
    Camera odd;
    odd.focal = 100.0;
    odd.width = 101;
    odd.height = 101;
    const Ray c = generate_ray(odd, 50, 50);
    CHECK((c.direction - Vec3(0, 0, -1)).norm() < 1e-6);

    Camera cam;
    cam.focal = 120.0;
    cam.width = 64;
    cam.height = 64;
    const Vec3 tl = generate_ray(cam, 0, 0).direction;
    const Vec3 tr = generate_ray(cam, 0, 63).direction;
    const Vec3 bl = generate_ray(cam, 63, 0).direction;
    const Vec3 br = generate_ray(cam, 63, 63).direction;
    CHECK(tl.x() == doctest::Approx(-tr.x()));
    CHECK(tl.y() == doctest::Approx(-bl.y()));
    CHECK(br.x() == doctest::Approx(-bl.x()));
    CHECK(tl.y() > 0.0);  // rows grow downward
    CHECK(tl.z() == doctest::Approx(br.z()));

    Camera wide;
    wide.focal = 800.0;
    wide.width = 800;
    wide.height = 800;
    const Ray r = generate_ray(wide, 400, 799);
    CHECK(r.direction.x() / std::abs(r.direction.z()) == doctest::Approx(0.499375).epsilon(1e-12));
    CHECK_THROWS_AS(generate_ray(wide, 400, 800), std::invalid_argument);
    CHECK_THROWS_AS(generate_ray(wide, -1, 0), std::invalid_argument);

    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> px(0, 799);
    const Camera posed = Camera::look_at(Vec3(3, 1, 2), Vec3::Zero(), Vec3::UnitY(), 800.0, 800, 800);
    for (int i = 0; i < 1000; ++i) {
        const Ray ray = generate_ray(posed, px(rng), px(rng));
        CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-12);
        CHECK((ray.origin - posed.position).norm() == 0.0);
    }
    CHECK(generate_ray(posed, 123, 456).direction == generate_ray(posed, 123, 456).direction);
}

TEST_CASE("camera validation")
{
    Camera c;
    CHECK_NOTHROW(c.validate());
    c.focal = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.focal = 1.0;
    c.width = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.width = 1;
    c.rotation(0, 1) = 0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
