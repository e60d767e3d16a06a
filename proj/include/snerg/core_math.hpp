// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file core_math.hpp
/// Rays, cameras, positional encoding and the front-to-back quadrature
/// shared by the baker, the grid renderer and the fine-tuner.
///

#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace snerg {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned box in scene units.
struct Box
{
    Vec3 min = Vec3::Constant(-1.0);
    Vec3 max = Vec3::Constant(1.0);

    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    bool contains(const Vec3& p) const;
};

/// r(t) = origin + t * direction, with |direction| = 1.
struct Ray
{
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3(0.0, 0.0, -1.0);

    Vec3 at(double t) const { return origin + t * direction; }

    /// Builds a ray, normalizing `direction`. Throws on a zero direction.
    static Ray through(const Vec3& origin, const Vec3& direction);
};

/// Pinhole camera. Right-handed, looks down -z in camera space, image rows
/// grow downward. `rotation` and `position` form the camera-to-world pose.
struct Camera
{
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();
    double focal = 1.0;
    int width = 1;
    int height = 1;

    void validate() const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                          double focal, int width, int height);
};

double focal_from_fov(double fov_degrees, int width);

/// Camera on a circle of `radius` around `target`, `elevation_deg` above the
/// xz-plane (y is up), at `azimuth_deg`.
Camera orbit_camera(const Vec3& target, double radius, double elevation_deg, double azimuth_deg,
                    double focal, int width, int height);

/// `count` cameras spread over a full sphere (Fibonacci lattice), all
/// looking at `target`.
std::vector<Camera> sphere_rig(const Vec3& target, double radius, int count, double focal,
                               int width, int height);

/// Output of the scene function at one point.
struct SampleValue
{
    double density = 0.0;
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
};

/// Front-to-back accumulated diffuse color, feature vector and opacity.
struct RayAccumulation
{
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
    double alpha = 0.0;
};

/// 1 - exp(-x). Throws std::invalid_argument for negative or NaN input.
double decay(double x);

/// Streaming front-to-back compositor. Each call to add() weights the sample
/// by the transmittance left in front of it.
class FrontToBack
{
public:
    void add(double opacity, const Vec3& diffuse, const Vec4& feature)
    {
        const double w = transmittance_ * opacity;
        diffuse_ += w * diffuse;
        feature_ += w * feature;
        transmittance_ *= 1.0 - opacity;
    }

    /// Adds a sample of optical thickness sigma*delta. Uses exp(-x) for the
    /// transmittance update so the weights telescope to 1 - T exactly.
    void add_thickness(double thickness, const Vec3& diffuse, const Vec4& feature);

    double transmittance() const { return transmittance_; }

    RayAccumulation result() const { return {diffuse_, feature_, 1.0 - transmittance_}; }

private:
    Vec3 diffuse_ = Vec3::Zero();
    Vec4 feature_ = Vec4::Zero();
    double transmittance_ = 1.0;
};

RayAccumulation composite(std::span<const SampleValue> samples, std::span<const double> deltas);

/// [v, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^(L-1) pi v), cos(2^(L-1) pi v)]
std::vector<double> positional_encode(std::span<const double> v, int bands);

/// Allocation-free form of positional_encode. `out` must hold
/// v.size() * (1 + 2 * bands) values.
void positional_encode_into(std::span<const double> v, int bands, std::span<double> out);

inline int encoded_width(int components, int bands) { return components * (1 + 2 * bands); }

struct Interval
{
    double t_near = 0.0;
    double t_far = 0.0;
};

/// Slab test. t_near is clamped to 0 for rays starting inside the box.
std::optional<Interval> ray_box_intersect(const Ray& ray, const Vec3& box_min, const Vec3& box_max);

/// Ray through the center of pixel (row, col).
Ray generate_ray(const Camera& camera, int row, int col);

} // namespace snerg
