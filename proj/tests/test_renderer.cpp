// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <snerg/baker.hpp>
#include <snerg/renderer.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

using namespace snerg;
using snerg::test::TempDir;

namespace {

// N = 4, B = 2, only block (0, 0, 0) occupied. Alpha of local voxel
// (x, y, z) is 10 + x + 10y + 100z (bytes); rgb and features follow it.
QuantizedGrid tiny_grid()
{
    GridLayout l;
    l.resolution = 4;
    l.block_size = 2;
    l.atlas_blocks = {1, 1, 1};
    std::vector<AtlasRef> ind(8, kEmptyBlock);
    ind[0] = {0, 0, 0};
    const std::size_t v = l.atlas_voxel_count();
    std::vector<std::uint8_t> alpha(v), rgb(3 * v), feat(4 * v);
    for (int z = 0; z < 3; ++z) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 3; ++x) {
                const std::size_t i = l.atlas_voxel({0, 0, 0}, x, y, z);
                alpha[i] = static_cast<std::uint8_t>(10 + x + 10 * y + 100 * z);
                for (int c = 0; c < 3; ++c) {
                    rgb[3 * i + c] = static_cast<std::uint8_t>(alpha[i] + c);
                }
                for (int c = 0; c < 4; ++c) {
                    feat[4 * i + c] = static_cast<std::uint8_t>(alpha[i] + 2 * c);
                }
            }
        }
    }
    // One transparent voxel for the nearest-neighbor pre-check.
    alpha[l.atlas_voxel({0, 0, 0}, 0, 2, 0)] = 0;
    return QuantizedGrid(l, ind, alpha, rgb, feat);
}

const std::vector<Camera>& rig()
{
    static const std::vector<Camera> cams = default_training_rig(Box{}, 16);
    return cams;
}

SnergGrid baked(const std::string& scene_name, int n, int b, int supersamples = 2)
{
    const auto scene = make_scene(scene_name);
    BakeConfig cfg;
    cfg.grid_resolution = n;
    cfg.block_size = b;
    cfg.supersamples = supersamples;
    return bake(*scene, rig(), cfg);
}

Camera view(int size, double azimuth, double elevation = 30.0)
{
    return orbit_camera(Vec3::Zero(), 4.0, elevation, azimuth, focal_from_fov(39.0, size), size, size);
}

/// Same grid with atlas blocks stored in a shuffled order.
template <typename T>
VoxelGrid<T> shuffle_atlas(const VoxelGrid<T>& g, std::uint64_t seed)
{
    const GridLayout& l = g.layout();
    const std::size_t cap = l.atlas_capacity();
    std::vector<std::size_t> perm(cap);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    const auto slot_of = [&](AtlasRef r) {
        return (static_cast<std::size_t>(r.z) * l.atlas_blocks[1] + r.y) * l.atlas_blocks[0] + r.x;
    };
    std::vector<AtlasRef> ind = g.indirection();
    std::vector<T> alpha(g.alpha().size()), rgb(g.rgb().size()), feat(g.features().size());
    for (AtlasRef& r : ind) {
        if (r.empty()) {
            continue;
        }
        const AtlasRef to = l.atlas_ref(perm[slot_of(r)]);
        const int p = l.physical_block();
        for (int z = 0; z < p; ++z) {
            for (int y = 0; y < p; ++y) {
                for (int x = 0; x < p; ++x) {
                    const std::size_t s = l.atlas_voxel(r, x, y, z);
                    const std::size_t d = l.atlas_voxel(to, x, y, z);
                    alpha[d] = g.alpha()[s];
                    std::copy_n(g.rgb().begin() + 3 * s, 3, rgb.begin() + 3 * d);
                    std::copy_n(g.features().begin() + 4 * s, 4, feat.begin() + 4 * d);
                }
            }
        }
        r = to;
    }
    return VoxelGrid<T>(l, ind, alpha, rgb, feat);
}

} // namespace

TEST_CASE("render config validation")
{
    RenderConfig c;
    CHECK_NOTHROW(c.validate());
    c.step_size = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.step_size.reset();
    c.termination_transmittance = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.termination_transmittance = 0.0;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("alpha unpremultiply")
{
    const RayAccumulation zero{};
    const RayAccumulation z = unpremultiply_saturate(zero);
    CHECK(z.alpha == 0.0);
    CHECK(z.diffuse.isZero());

    const RayAccumulation hi{Vec3(0.4, 0.2, 0.8), Vec4(0.8, 0.0, 0.4, 0.2), 0.8};
    const RayAccumulation h = unpremultiply_saturate(hi);
    CHECK(h.alpha == 1.0);
    CHECK(h.diffuse.isApprox(1.25 * hi.diffuse, 1e-15));
    CHECK(h.feature.isApprox(1.25 * hi.feature, 1e-15));

    const RayAccumulation lo{Vec3(0.2, 0.1, 0.3), Vec4(0.1, 0.2, 0.3, 0.4), 0.4};
    const RayAccumulation q = unpremultiply_saturate(lo);
    CHECK(q.alpha == doctest::Approx(0.6));
    CHECK(q.diffuse.isApprox(1.5 * lo.diffuse, 1e-15));
}

TEST_CASE("trilinear sampling")
{
    const QuantizedGrid g = tiny_grid();
    const GridLayout& l = g.layout();

    CHECK_FALSE(trilinear_sample(g, Vec3(3.5, 3.5, 3.5)));
    CHECK_FALSE(trilinear_sample(g, Vec3(0.5, 3.0, 0.5)));
    CHECK_THROWS_AS(trilinear_sample(g, Vec3(-0.1, 1.0, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(trilinear_sample(g, Vec3(1.0, 4.2, 1.0)), std::invalid_argument);

    // Voxel centers return the stored values.
    for (int z = 0; z < 2; ++z) {
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x) {
                const auto s = trilinear_sample(g, Vec3(x + 0.5, y + 0.5, z + 0.5));
                REQUIRE(s);
                const std::size_t i = l.atlas_voxel({0, 0, 0}, x, y, z);
                CHECK(s->alpha == doctest::Approx(g.alpha_at(i)).epsilon(1e-15));
                CHECK(s->diffuse.isApprox(g.rgb_at(i), 1e-15));
                CHECK(s->feature.isApprox(g.feature_at(i), 1e-15));
            }
        }
    }

    // Halfway between the centers of voxels (0,1,1) and (1,1,1).
    const auto mid = trilinear_sample(g, Vec3(1.0, 1.5, 1.5));
    REQUIRE(mid);
    const std::size_t a = l.atlas_voxel({0, 0, 0}, 0, 1, 1);
    const std::size_t b = l.atlas_voxel({0, 0, 0}, 1, 1, 1);
    CHECK(mid->alpha == doctest::Approx(0.5 * (g.alpha_at(a) + g.alpha_at(b))).epsilon(1e-15));
    CHECK(mid->diffuse.isApprox(0.5 * (g.rgb_at(a) + g.rgb_at(b)), 1e-15));
    CHECK(mid->feature.isApprox(0.5 * (g.feature_at(a) + g.feature_at(b)), 1e-15));

    // The upper border layer is reached through the padding.
    const auto edge = trilinear_sample(g, Vec3(2.0, 0.5, 0.5));
    REQUIRE(edge);
    CHECK(edge->alpha ==
          doctest::Approx(0.5 * (g.alpha_at(l.atlas_voxel({0, 0, 0}, 1, 0, 0)) +
                                 g.alpha_at(l.atlas_voxel({0, 0, 0}, 2, 0, 0))))
              .epsilon(1e-15));

    // Nearest voxel transparent: zeros, colors untouched.
    const auto clear = trilinear_sample(g, Vec3(0.6, 2.1, 0.4));
    REQUIRE(clear);
    CHECK(clear->alpha == 0.0);
    CHECK(clear->diffuse.isZero());
    CHECK(clear->feature.isZero());
}

TEST_CASE("stencils reaching back into an empty block")
{
    // Only block (1, 0, 0) occupied; its first voxel holds a known value.
    GridLayout l;
    l.resolution = 4;
    l.block_size = 2;
    l.atlas_blocks = {1, 1, 1};
    std::vector<AtlasRef> ind(8, kEmptyBlock);
    ind[l.block_index(1, 0, 0)] = {0, 0, 0};
    const std::size_t v = l.atlas_voxel_count();
    std::vector<std::uint8_t> alpha(v, 40), rgb(3 * v, 90), feat(4 * v, 20);
    const std::size_t first = l.atlas_voxel({0, 0, 0}, 0, 0, 0);
    alpha[first] = 200;
    rgb[3 * first] = 255;
    const QuantizedGrid g(l, ind, alpha, rgb, feat);

    // Half a voxel inside the block, the corner sits in the empty block.
    const auto s = trilinear_sample(g, Vec3(2.2, 0.5, 0.5));
    REQUIRE(s);
    CHECK(s->alpha == doctest::Approx(200.0 / 255.0));
    CHECK(s->diffuse.x() == doctest::Approx(1.0));
    // Interpolation along y is untouched.
    const auto t = trilinear_sample(g, Vec3(2.2, 1.0, 0.5));
    REQUIRE(t);
    CHECK(t->alpha == doctest::Approx(120.0 / 255.0));
    CHECK_FALSE(trilinear_sample(g, Vec3(1.9, 0.5, 0.5)));

    // Marching through the same place with and without skipping.
    const DeferredMlp mlp = default_shading_mlp();
    RenderConfig skip;
    RenderConfig dense;
    dense.skip_empty = false;
    const Ray along = Ray::through(Vec3(-2.0, -0.5, -0.75), Vec3(1, 0, 0));
    CHECK(accumulate_ray(g, along, skip).alpha > 0.0);
    CHECK(accumulate_ray(g, along, skip).alpha == accumulate_ray(g, along, dense).alpha);
}

TEST_CASE("skipping matches dense stepping on random sparse grids")
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RenderConfig skip;
    skip.termination_transmittance = 0.0;
    RenderConfig dense = skip;
    dense.skip_empty = false;
    double worst = 0.0;
    for (int trial = 0; trial < 12; ++trial) {
        const int b = trial % 2 == 0 ? 4 : 2;
        const QuantizedGrid g = snerg::test::random_quantized_grid(rng, 32, b, trial % 3 == 0 ? 0.02 : 0.15);
        for (int i = 0; i < 300; ++i) {
            Vec3 d(u(rng), u(rng), u(rng));
            // Some rays run along an axis or a grid plane.
            if (i % 5 == 0) {
                d[i % 3] = 0.0;
            }
            if (i % 15 == 0) {
                d = Vec3::Zero();
                d[i % 3] = u(rng) < 0.0 ? -1.0 : 1.0;
            }
            if (d.norm() < 1e-3) {
                continue;
            }
            const Vec3 o = 0.9 * Vec3(u(rng), u(rng), u(rng)) - 3.0 * d.normalized();
            const Ray ray = Ray::through(o, d);
            RenderConfig s = skip;
            RenderConfig n = dense;
            if (i % 2 == 1) {
                s.step_size = n.step_size = 0.013 + 0.05 * std::abs(u(rng));
            }
            const RayAccumulation a = accumulate_ray(g, ray, s);
            const RayAccumulation c = accumulate_ray(g, ray, n);
            worst = std::max({worst, std::abs(a.alpha - c.alpha), (a.diffuse - c.diffuse).cwiseAbs().maxCoeff(),
                              (a.feature - c.feature).cwiseAbs().maxCoeff()});
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("rays that miss and empty grids")
{
    const QuantizedGrid g = tiny_grid();
    const DeferredMlp mlp = default_shading_mlp();
    RenderConfig rc;
    rc.background = Vec3(0.1, 0.2, 0.3);
    const RayColor miss = march_ray(g, mlp, Ray::through(Vec3(0, 5, 0), Vec3(1, 0, 0)), rc);
    CHECK(miss.alpha == 0.0);
    CHECK(miss.color == rc.background);

    GridLayout l;
    l.resolution = 16;
    l.block_size = 8;
    const QuantizedGrid empty(l, std::vector<AtlasRef>(8, kEmptyBlock), {}, {}, {});
    const Image img = render_frame(empty, mlp, view(24, 10.0), rc);
    for (int r = 0; r < 24; ++r) {
        for (int c = 0; c < 24; ++c) {
            CHECK(img.pixel(r, c).isApprox(rc.background, 1e-7));
        }
    }
}

TEST_CASE("frames are per-pixel march_ray calls")
{
    const SnergGrid g = baked("lambert-spheres", 32, 8);
    const DeferredMlp mlp = default_shading_mlp();
    const RenderConfig rc;
    Camera cam = view(2, 30.0);
    cam.focal = 3.0;
    const Image img = render_frame(g, mlp, cam, rc);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            const RayColor rcol = march_ray(g, mlp, generate_ray(cam, r, c), rc);
            CHECK(img.pixel(r, c).isApprox(rcol.color.cast<float>().cast<double>(), 1e-7));
        }
    }
    const Image again = render_frame(g, mlp, cam, rc);
    CHECK(again.rgb == img.rgb);
}

TEST_CASE("skipping and termination are optimizations")
{
    const SnergGrid g = baked("lambert-spheres", 64, 8);
    const QuantizedGrid q = quantize(g);
    const DeferredMlp mlp = default_shading_mlp();
    RenderConfig skip;
    RenderConfig dense;
    dense.skip_empty = false;
    RenderConfig full;
    full.termination_transmittance = 0.0;

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_skip = 0.0;
    double worst_term = 0.0;
    for (int i = 0; i < 4000; ++i) {
        const Vec3 o = 3.0 * Vec3(u(rng), u(rng), u(rng)).normalized();
        const Vec3 target = 0.8 * Vec3(u(rng), u(rng), u(rng));
        const Ray ray = Ray::through(o, target - o);
        const RayColor a = march_ray(g, mlp, ray, skip);
        const RayColor b = march_ray(g, mlp, ray, dense);
        const RayColor c = march_ray(g, mlp, ray, full);
        worst_skip = std::max(worst_skip, (a.color - b.color).cwiseAbs().maxCoeff());
        worst_term = std::max(worst_term, (a.color - c.color).cwiseAbs().maxCoeff());
        const RayColor qa = march_ray(q, mlp, ray, skip);
        const RayColor qb = march_ray(q, mlp, ray, dense);
        worst_skip = std::max(worst_skip, (qa.color - qb.color).cwiseAbs().maxCoeff());
    }
    CHECK(worst_skip <= 1e-6);
    CHECK(worst_term <= 2.0 / 255.0);

    // Odd step sizes too.
    RenderConfig odd = skip;
    odd.step_size = 0.37 * g.layout().voxel_width();
    RenderConfig odd_dense = odd;
    odd_dense.skip_empty = false;
    const Camera cam = view(40, 75.0, -20.0);
    CHECK(max_abs_diff(render_frame(g, mlp, cam, odd), render_frame(g, mlp, cam, odd_dense)) <= 1e-6);
}

TEST_CASE("atlas storage order is invisible")
{
    const QuantizedGrid q = quantize(baked("lambert-spheres", 32, 4));
    const QuantizedGrid s = shuffle_atlas(q, 11);
    CHECK_FALSE(s.indirection() == q.indirection());
    const DeferredMlp mlp = default_shading_mlp();
    const Camera cam = view(48, 200.0);
    CHECK(render_frame(q, mlp, cam, RenderConfig{}).rgb == render_frame(s, mlp, cam, RenderConfig{}).rgb);
}

TEST_CASE("slab transmittance")
{
    const Slab slab(Slab::Params{});
    const double expect = 1.0 - std::exp(-slab.params().density * slab.thickness());
    const SnergGrid g = baked("slab", 64, 8, 8);
    const DeferredMlp mlp = default_shading_mlp();
    const Ray down = Ray::through(Vec3(0.013, -0.021, 3.0), Vec3(0, 0, -1));
    RenderConfig rc;
    const RayColor c = march_ray(g, mlp, down, rc);
    CHECK(c.alpha == doctest::Approx(expect).epsilon(0.02));

    // Step refinement, averaged over slightly tilted rays so the sample
    // phase against the slab faces varies. While the step error dominates,
    // each halving moves alpha toward the analytic value. Below a few voxel
    // widths the grid's own edge bias (supersample blur, alpha lerp) is
    // what remains, so there we only ask for convergence.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Ray> rays;
    std::vector<double> target;
    for (int i = 0; i < 1600; ++i) {
        const double cz = 1.0 - 0.1 * u(rng);
        const double sz = std::sqrt(1.0 - cz * cz);
        const double phi = 2.0 * std::numbers::pi * u(rng);
        const Vec3 d(sz * std::cos(phi), sz * std::sin(phi), -cz);
        const Vec3 at(0.4 * u(rng) - 0.2, 0.4 * u(rng) - 0.2, 0.0);
        rays.push_back(Ray::through(at - 3.0 * d, d));
        target.push_back(1.0 - std::exp(-slab.params().density * slab.thickness() / cz));
    }
    const auto mean_error = [&](double f) {
        rc.step_size = f * g.layout().voxel_width();
        double sum = 0.0;
        for (std::size_t i = 0; i < rays.size(); ++i) {
            sum += march_ray(g, mlp, rays[i], rc).alpha - target[i];
        }
        return sum / static_cast<double>(rays.size());
    };
    std::vector<double> err;
    for (double f : {16.0, 8.0, 4.0}) {
        err.push_back(mean_error(f));
    }
    CHECK(std::abs(err[1]) <= std::abs(err[0]));
    CHECK(std::abs(err[2]) <= std::abs(err[1]));
    CHECK(((err[0] >= err[1] && err[1] >= err[2]) || (err[0] <= err[1] && err[1] <= err[2])));

    const double e1 = mean_error(1.0);
    const double e2 = mean_error(0.5);
    const double e4 = mean_error(0.25);
    CHECK(std::abs(e2 - e4) <= std::abs(e1 - e2) + 1e-4);
    CHECK(std::abs(e4) <= 0.01 * expect);
}

TEST_CASE("baked slab against the direct render")
{
    const auto scene = make_scene("slab");
    const SnergGrid g = baked("slab", 64, 8, 8);
    const DeferredMlp mlp = default_shading_mlp();
    const RenderConfig rc;
    const Camera cam = view(64, 25.0, 35.0);
    const Image grid_img = render_frame(g, mlp, cam, rc);
    const Image direct = render_direct(*scene, mlp, cam, rc, g.layout().voxel_width());
    CHECK(psnr(grid_img, direct) >= 35.0);
}

TEST_CASE("image metrics and png io")
{
    Image a(4, 3);
    Image b(4, 3);
    CHECK(std::isinf(psnr(a, b)));
    b.set_pixel(1, 2, Vec3(0.1, 0.0, 0.0));
    // One channel off by 0.1 among 36.
    CHECK(psnr(a, b) == doctest::Approx(-10.0 * std::log10(0.01 / 36.0)));
    CHECK(max_abs_diff(a, b) == doctest::Approx(0.1));
    CHECK(mean_abs_diff(a, b) == doctest::Approx(0.1 / 36.0));
    CHECK_THROWS_AS(psnr(a, Image(3, 4)), std::invalid_argument);

    Image c(5, 2);
    for (std::size_t i = 0; i < c.rgb.size(); ++i) {
        c.rgb[i] = static_cast<float>(dequantize8(static_cast<std::uint8_t>(i * 7)));
    }
    TempDir dir("img");
    save_png(dir / "c.png", c);
    const Image d = load_png(dir / "c.png");
    CHECK(d.width == 5);
    CHECK(d.height == 2);
    CHECK(d.rgb == c.rgb);
}

TEST_CASE("orbit benchmark")
{
    const QuantizedGrid q = quantize(baked("lambert-spheres", 32, 8));
    const DeferredMlp mlp = default_shading_mlp();
    RenderConfig rc;
    rc.width = 32;
    rc.height = 32;

    const TimingReport one = benchmark_orbit(q, mlp, 1, rc);
    CHECK(one.frames == 1);
    CHECK(one.frame_ms_min == one.frame_ms_max);
    CHECK(one.frame_ms_mean == one.frame_ms_max);

    const auto cams = orbit_path(8, OrbitSpec{}, 32, 32);
    REQUIRE(cams.size() == 8);
    for (const Camera& c : cams) {
        CHECK((c.position.norm()) == doctest::Approx(4.0));
        CHECK(c.position.y() == doctest::Approx(4.0 * std::sin(30.0 * std::numbers::pi / 180.0)));
    }
    CHECK_THROWS_AS(orbit_path(0, OrbitSpec{}, 32, 32), std::invalid_argument);

    const TimingReport r = benchmark_orbit(q, mlp, 6, rc);
    CHECK(r.frame_ms_min <= r.frame_ms_mean);
    CHECK(r.frame_ms_mean <= r.frame_ms_max);
    const std::string text = format_report(r);
    for (const char* key : {"frame_ms_mean=", "frame_ms_min=", "frame_ms_max=", "frames=6\n", "width=32\n",
                            "height=32\n", "march_ms_mean=", "shade_ms_mean="}) {
        CHECK(text.find(key) != std::string::npos);
    }

    TempDir dir("bench");
    write_report(dir / "r.txt", r);
    std::ifstream in(dir / "r.txt");
    const std::string written{std::istreambuf_iterator<char>(in), {}};
    CHECK(written == text);
}

TEST_CASE("empty orbit is cheaper than an occupied one")
{
    const SnergGrid g = baked("lambert-spheres", 64, 8);
    GridLayout l = g.layout();
    l.atlas_blocks = {0, 0, 0};
    const SnergGrid empty(l, std::vector<AtlasRef>(l.block_count(), kEmptyBlock), {}, {}, {});
    const DeferredMlp mlp = default_shading_mlp();
    RenderConfig rc;
    rc.width = 96;
    rc.height = 96;
    const TimingReport full = benchmark_orbit(g, mlp, 6, rc);
    const TimingReport none = benchmark_orbit(empty, mlp, 6, rc);
    CHECK(none.frame_ms_mean < full.frame_ms_mean);
}
