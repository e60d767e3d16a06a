// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/core_math.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace snerg {

bool Box::contains(const Vec3& p) const
{
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

Ray Ray::through(const Vec3& origin, const Vec3& direction)
{
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw std::invalid_argument("ray direction must be finite and non-zero");
    }
    return {origin, direction / n};
}

void Camera::validate() const
{
    if (!(focal > 0.0) || !std::isfinite(focal)) {
        throw std::invalid_argument("camera focal must be positive");
    }
    if (width < 1 || height < 1) {
        throw std::invalid_argument("camera image size must be at least 1x1");
    }
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw std::invalid_argument("camera rotation is not orthonormal");
    }
    if (!position.allFinite()) {
        throw std::invalid_argument("camera position must be finite");
    }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                       int height)
{
    const Vec3 back = (eye - target).normalized();
    Vec3 right = up.cross(back);
    if (right.norm() < 1e-9) {
        // Looking straight along `up`; pick any perpendicular.
        right = (std::abs(back.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(back);
    }
    right.normalize();
    const Vec3 true_up = back.cross(right);

    Camera cam;
    cam.rotation.col(0) = right;
    cam.rotation.col(1) = true_up;
    cam.rotation.col(2) = back;
    cam.position = eye;
    cam.focal = focal;
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
}

double focal_from_fov(double fov_degrees, int width)
{
    if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) {
        throw std::invalid_argument("field of view must be in (0, 180) degrees");
    }
    const double half = 0.5 * fov_degrees * std::numbers::pi / 180.0;
    return 0.5 * width / std::tan(half);
}

Camera orbit_camera(const Vec3& target, double radius, double elevation_deg, double azimuth_deg,
                    double focal, int width, int height)
{
    const double el = elevation_deg * std::numbers::pi / 180.0;
    const double az = azimuth_deg * std::numbers::pi / 180.0;
    const Vec3 offset(radius * std::cos(el) * std::sin(az), radius * std::sin(el),
                      radius * std::cos(el) * std::cos(az));
    return Camera::look_at(target + offset, target, Vec3::UnitY(), focal, width, height);
}

std::vector<Camera> sphere_rig(const Vec3& target, double radius, int count, double focal,
                               int width, int height)
{
    if (count < 1) {
        throw std::invalid_argument("camera rig needs at least one camera");
    }
    std::vector<Camera> cams;
    cams.reserve(count);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double y = count == 1 ? 0.0 : 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden * i;
        const Vec3 dir(r * std::cos(phi), y, r * std::sin(phi));
        cams.push_back(Camera::look_at(target + radius * dir, target, Vec3::UnitY(), focal, width,
                                       height));
    }
    return cams;
}

double decay(double x)
{
    if (!(x >= 0.0)) {
        throw std::invalid_argument("decay expects a non-negative argument");
    }
    return -std::expm1(-x);
}

void FrontToBack::add_thickness(double thickness, const Vec3& diffuse, const Vec4& feature)
{
    const double w = transmittance_ * decay(thickness);
    diffuse_ += w * diffuse;
    feature_ += w * feature;
    transmittance_ *= std::exp(-thickness);
}

RayAccumulation composite(std::span<const SampleValue> samples, std::span<const double> deltas)
{
    if (samples.size() != deltas.size()) {
        throw std::invalid_argument("composite: " + std::to_string(samples.size()) +
                                    " samples but " + std::to_string(deltas.size()) + " deltas");
    }
    FrontToBack acc;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!(deltas[k] > 0.0)) {
            throw std::invalid_argument("composite: deltas must be positive");
        }
        if (!(samples[k].density >= 0.0)) {
            throw std::invalid_argument("composite: densities must be non-negative");
        }
        acc.add_thickness(samples[k].density * deltas[k], samples[k].diffuse, samples[k].feature);
    }
    return acc.result();
}

std::vector<double> positional_encode(std::span<const double> v, int bands)
{
    if (bands < 0) {
        throw std::invalid_argument("positional_encode: negative band count");
    }
    std::vector<double> out(encoded_width(static_cast<int>(v.size()), bands));
    positional_encode_into(v, bands, out);
    return out;
}

void positional_encode_into(std::span<const double> v, int bands, std::span<double> out)
{
    const std::size_t k = v.size();
    if (out.size() != k * (1 + 2 * static_cast<std::size_t>(bands))) {
        throw std::invalid_argument("positional_encode: output size mismatch");
    }
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = v[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
        // Double-angle recurrence from sin/cos(pi v): one libm call per component.
        double s = std::sin(std::numbers::pi * v[i]);
        double c = std::cos(std::numbers::pi * v[i]);
        for (int j = 0; j < bands; ++j) {
            const std::size_t base = k + 2 * k * j;
            out[base + i] = s;
            out[base + k + i] = c;
            const double s2 = 2.0 * s * c;
            const double c2 = (c - s) * (c + s);
            s = s2;
            c = c2;
        }
    }
}

std::optional<Interval> ray_box_intersect(const Ray& ray, const Vec3& box_min, const Vec3& box_max)
{
    if (!((box_min.array() < box_max.array()).all())) {
        throw std::invalid_argument("ray_box_intersect: degenerate box");
    }
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.direction[a];
        if (d == 0.0) {
            if (o < box_min[a] || o > box_max[a]) {
                return std::nullopt;
            }
            continue;
        }
        const double inv = 1.0 / d;
        double ta = (box_min[a] - o) * inv;
        double tb = (box_max[a] - o) * inv;
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1 || t1 < 0.0) {
        return std::nullopt;
    }
    return Interval{std::max(t0, 0.0), t1};
}

Ray generate_ray(const Camera& camera, int row, int col)
{
    if (row < 0 || row >= camera.height || col < 0 || col >= camera.width) {
        throw std::invalid_argument("generate_ray: pixel (" + std::to_string(row) + ", " +
                                    std::to_string(col) + ") outside " +
                                    std::to_string(camera.width) + "x" +
                                    std::to_string(camera.height) + " image");
    }
    const double x = (col + 0.5 - 0.5 * camera.width) / camera.focal;
    const double y = -(row + 0.5 - 0.5 * camera.height) / camera.focal;
    const Vec3 dir = camera.rotation * Vec3(x, y, -1.0);
    return {camera.position, dir.normalized()};
}

} // namespace snerg
