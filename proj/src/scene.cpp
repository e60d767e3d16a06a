// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/scene.hpp>

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace snerg {

namespace {

/// 1 inside, 0 beyond `width`, smoothstep in between. `d` is a signed
/// distance (negative inside).
double shell_falloff(double d, double width)
{
    if (d <= 0.0) {
        return 1.0;
    }
    if (d >= width) {
        return 0.0;
    }
    const double u = d / width;
    return 1.0 - u * u * (3.0 - 2.0 * u);
}

double parse_double(const std::string& key, const std::string& text)
{
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw std::invalid_argument("scene parameter " + key + ": cannot parse '" + text + "'");
    }
    return value;
}

using Setter = std::function<void(double)>;

void apply_overrides(std::string_view scene, const std::map<std::string, std::string>& overrides,
                     const std::map<std::string, Setter>& setters)
{
    for (const auto& [key, text] : overrides) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            std::string known;
            for (const auto& [name, _] : setters) {
                known += (known.empty() ? "" : ", ") + name;
            }
            throw std::invalid_argument("scene " + std::string(scene) + " has no parameter '" +
                                        key + "' (known: " + known + ")");
        }
        it->second(parse_double(key, text));
    }
}

void require(bool ok, const char* what)
{
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

} // namespace

SceneFunction::SceneFunction(Box bounds)
    : bounds_(std::move(bounds))
{
    require((bounds_.min.array() < bounds_.max.array()).all(), "scene bounds must be non-empty");
}

SampleValue SceneFunction::eval(const Vec3& point) const
{
    if (!point.allFinite()) {
        throw std::invalid_argument("scene evaluated at a non-finite point");
    }
    SampleValue v = evaluate(point);
    if (!bounds_.contains(point)) {
        v.density = 0.0;
    }
    return v;
}

ConstantScene::ConstantScene(Box bounds, double density, Vec3 diffuse, Vec4 feature)
    : SceneFunction(std::move(bounds))
    , value_{density, std::move(diffuse), std::move(feature)}
{
    require(density >= 0.0, "constant scene density must be non-negative");
}

SampleValue ConstantScene::evaluate(const Vec3&) const { return value_; }

LambertSpheres::Params LambertSpheres::Params::defaults()
{
    Params p;
    p.spheres = {
        {Vec3(-0.45, -0.1, 0.0), 0.3, 200.0, Vec3(0.85, 0.25, 0.2), Vec4(1.0, 0.9, 0.8, 0.7)},
        {Vec3(0.35, 0.25, -0.2), 0.25, 200.0, Vec3(0.2, 0.7, 0.3), Vec4(0.6, 1.0, 0.6, 0.3)},
        {Vec3(0.2, -0.35, 0.35), 0.2, 200.0, Vec3(0.25, 0.35, 0.9), Vec4(0.5, 0.6, 1.0, 0.9)},
    };
    return p;
}

LambertSpheres::LambertSpheres(Params params)
    : SceneFunction(Box{})
    , params_(std::move(params))
{
    require(!params_.spheres.empty(), "lambert-spheres needs at least one sphere");
    require(params_.falloff > 0.0, "lambert-spheres falloff must be positive");
    require(params_.ambient >= 0.0 && params_.ambient <= 1.0, "ambient must be in [0, 1]");
    for (const auto& s : params_.spheres) {
        require(s.radius > 0.0 && s.peak_density >= 0.0, "invalid sphere");
    }
    params_.light_direction.normalize();
}

SampleValue LambertSpheres::evaluate(const Vec3& p) const
{
    SampleValue out;
    double nearest = std::numeric_limits<double>::infinity();
    const SphereSpec* nearest_sphere = nullptr;
    for (const auto& s : params_.spheres) {
        const double d = (p - s.center).norm() - s.radius;
        out.density += s.peak_density * shell_falloff(d, params_.falloff);
        if (d < nearest) {
            nearest = d;
            nearest_sphere = &s;
        }
    }
    const Vec3 offset = p - nearest_sphere->center;
    const double len = offset.norm();
    const Vec3 normal = len > 0.0 ? Vec3(offset / len) : Vec3::UnitY();
    const double lambert = std::max(0.0, normal.dot(params_.light_direction));
    const double shade = params_.ambient + (1.0 - params_.ambient) * lambert;
    out.diffuse = nearest_sphere->albedo * shade;
    out.feature = nearest_sphere->feature;
    return out;
}

Slab::Slab(Params params)
    : SceneFunction(Box{})
    , params_(std::move(params))
{
    require(params_.density >= 0.0, "slab density must be non-negative");
    require(params_.z_min < params_.z_max, "slab needs z_min < z_max");
}

SampleValue Slab::evaluate(const Vec3& p) const
{
    const bool inside = p.z() >= params_.z_min && p.z() <= params_.z_max;
    return {inside ? params_.density : 0.0, params_.diffuse, params_.feature};
}

EnclosedCore::EnclosedCore(Params params)
    : SceneFunction(Box{})
    , params_(std::move(params))
{
    require(params_.core_radius > 0.0 && params_.core_radius < params_.shell_inner &&
                params_.shell_inner < params_.shell_outer,
            "enclosed-core needs 0 < core_radius < shell_inner < shell_outer");
    require(params_.shell_density >= 0.0 && params_.core_density >= 0.0,
            "enclosed-core densities must be non-negative");
}

SampleValue EnclosedCore::evaluate(const Vec3& p) const
{
    const double r = p.norm();
    const double core_mid = 0.5 * (params_.core_radius + params_.shell_inner);
    if (r <= params_.core_radius) {
        return {params_.core_density, params_.core_diffuse, params_.core_feature};
    }
    if (r < core_mid) {
        return {0.0, params_.core_diffuse, params_.core_feature};
    }
    const bool in_shell = r >= params_.shell_inner && r <= params_.shell_outer;
    return {in_shell ? params_.shell_density : 0.0, params_.shell_diffuse, params_.shell_feature};
}

std::vector<std::string> builtin_scene_names() { return {"lambert-spheres", "slab", "enclosed-core"}; }

std::unique_ptr<SceneFunction> make_scene(std::string_view name,
                                          const std::map<std::string, std::string>& overrides)
{
    if (name == "lambert-spheres") {
        auto p = LambertSpheres::Params::defaults();
        apply_overrides(name, overrides,
                        {{"falloff", [&](double v) { p.falloff = v; }},
                         {"ambient", [&](double v) { p.ambient = v; }},
                         {"peak_density",
                          [&](double v) {
                              for (auto& s : p.spheres) {
                                  s.peak_density = v;
                              }
                          }},
                         {"radius_scale", [&](double v) {
                              for (auto& s : p.spheres) {
                                  s.radius *= v;
                              }
                          }}});
        return std::make_unique<LambertSpheres>(std::move(p));
    }
    if (name == "slab") {
        Slab::Params p;
        apply_overrides(name, overrides,
                        {{"density", [&](double v) { p.density = v; }},
                         {"z_min", [&](double v) { p.z_min = v; }},
                         {"z_max", [&](double v) { p.z_max = v; }}});
        return std::make_unique<Slab>(p);
    }
    if (name == "enclosed-core") {
        EnclosedCore::Params p;
        apply_overrides(name, overrides,
                        {{"shell_inner", [&](double v) { p.shell_inner = v; }},
                         {"shell_outer", [&](double v) { p.shell_outer = v; }},
                         {"shell_density", [&](double v) { p.shell_density = v; }},
                         {"core_radius", [&](double v) { p.core_radius = v; }},
                         {"core_density", [&](double v) { p.core_density = v; }}});
        return std::make_unique<EnclosedCore>(p);
    }
    throw std::invalid_argument("unknown scene '" + std::string(name) +
                                "' (expected lambert-spheres, slab or enclosed-core)");
}

double sparsity_loss(std::span<const double> densities, const SparsityParams& params)
{
    require(params.lambda_s >= 0.0, "sparsity lambda_s must be non-negative");
    require(params.c > 0.0, "sparsity c must be positive");
    double sum = 0.0;
    for (const double sigma : densities) {
        sum += std::log1p(sigma * sigma / params.c);
    }
    return params.lambda_s * sum;
}

} // namespace snerg
