// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file scene.hpp
/// The scene-function contract: a deterministic map from a 3D point to
/// density, diffuse color and a 4-channel specular feature. Closed-form
/// definitions of the built-in scenes are in docs/scenes.md.
///

#pragma once

#include <snerg/core_math.hpp>

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snerg {

class SceneFunction
{
public:
    explicit SceneFunction(Box bounds);
    virtual ~SceneFunction() = default;

    SceneFunction(const SceneFunction&) = delete;
    SceneFunction& operator=(const SceneFunction&) = delete;

    /// Evaluates the scene. Density is forced to zero outside bounds().
    /// Throws std::invalid_argument for a non-finite point.
    SampleValue eval(const Vec3& point) const;

    const Box& bounds() const { return bounds_; }

protected:
    virtual SampleValue evaluate(const Vec3& point) const = 0;

private:
    Box bounds_;
};

/// Same density and colors everywhere inside the bounds.
class ConstantScene final : public SceneFunction
{
public:
    ConstantScene(Box bounds, double density, Vec3 diffuse, Vec4 feature);

protected:
    SampleValue evaluate(const Vec3& point) const override;

private:
    SampleValue value_;
};

struct SphereSpec
{
    Vec3 center;
    double radius;
    double peak_density;
    Vec3 albedo;
    Vec4 feature;  ///< specular tint (rgb) and sharpness
};

class LambertSpheres final : public SceneFunction
{
public:
    struct Params
    {
        std::vector<SphereSpec> spheres;
        double falloff = 0.04;
        Vec3 light_direction = Vec3(0.5, 0.8, 0.3).normalized();
        double ambient = 0.3;

        static Params defaults();
    };

    explicit LambertSpheres(Params params);

    const Params& params() const { return params_; }

protected:
    SampleValue evaluate(const Vec3& point) const override;

private:
    Params params_;
};

class Slab final : public SceneFunction
{
public:
    struct Params
    {
        double density = 2.0;
        double z_min = -0.25;
        double z_max = 0.25;
        Vec3 diffuse = Vec3(0.8, 0.6, 0.3);
        Vec4 feature = Vec4(0.5, 0.5, 0.5, 0.5);
    };

    explicit Slab(Params params);

    const Params& params() const { return params_; }
    double thickness() const { return params_.z_max - params_.z_min; }

protected:
    SampleValue evaluate(const Vec3& point) const override;

private:
    Params params_;
};

class EnclosedCore final : public SceneFunction
{
public:
    struct Params
    {
        double shell_inner = 0.6;
        double shell_outer = 0.8;
        double shell_density = 60.0;
        Vec3 shell_diffuse = Vec3(0.7, 0.7, 0.75);
        Vec4 shell_feature = Vec4(0.2, 0.2, 0.2, 0.2);
        double core_radius = 0.2;
        double core_density = 80.0;
        Vec3 core_diffuse = Vec3(1.0, 0.1, 0.1);
        Vec4 core_feature = Vec4(1.0, 0.0, 0.0, 1.0);
    };

    explicit EnclosedCore(Params params);

    const Params& params() const { return params_; }

protected:
    SampleValue evaluate(const Vec3& point) const override;

private:
    Params params_;
};

/// Names accepted by make_scene().
std::vector<std::string> builtin_scene_names();

/// Builds a built-in scene by name, applying key=value parameter overrides.
/// Unknown names, unknown keys and unparsable values throw
/// std::invalid_argument.
std::unique_ptr<SceneFunction> make_scene(std::string_view name,
                                          const std::map<std::string, std::string>& overrides = {});

struct SparsityParams
{
    double lambda_s = 1e-4;
    double c = 0.5;
};

/// Cauchy penalty lambda_s * sum log(1 + sigma^2 / c).
double sparsity_loss(std::span<const double> densities, const SparsityParams& params = {});

} // namespace snerg
