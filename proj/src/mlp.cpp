// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/mlp.hpp>

#include <algorithm>
#include <array>
#include <random>
#include <stdexcept>
#include <string>

namespace snerg {

DeferredMlp::DeferredMlp(int direction_bands, std::vector<DenseLayer> layers)
    : direction_bands_(direction_bands)
    , layers_(std::move(layers))
{
    if (direction_bands_ < 0) {
        throw std::invalid_argument("direction encoding bands must be non-negative");
    }
    if (layers_.empty()) {
        throw std::invalid_argument("mlp needs at least one layer");
    }
    int width = input_width();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        const std::string where = "mlp layer " + std::to_string(i) + ": ";
        if (l.cols != width) {
            throw std::invalid_argument(where + "expects " + std::to_string(l.cols) +
                                        " inputs, previous width is " + std::to_string(width));
        }
        if (l.rows < 1 || l.rows > kMaxWidth || l.cols > kMaxWidth) {
            throw std::invalid_argument(where + "width out of range");
        }
        if (l.weights.size() != static_cast<std::size_t>(l.rows) * l.cols ||
            l.bias.size() != static_cast<std::size_t>(l.rows)) {
            throw std::invalid_argument(where + "weight or bias size does not match rows x cols");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(l.weights.begin(), l.weights.end(), finite) ||
            !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
            throw std::invalid_argument(where + "non-finite parameter");
        }
        width = l.rows;
    }
    if (width != kOutputs) {
        throw std::invalid_argument("mlp must end in " + std::to_string(kOutputs) + " outputs");
    }
}

DeferredMlp DeferredMlp::zeros(int direction_bands)
{
    std::vector<DenseLayer> layers;
    int in = input_width(direction_bands);
    for (int out : {kHiddenWidth, kHiddenWidth, kOutputs}) {
        layers.push_back({out, in, std::vector<double>(static_cast<std::size_t>(out) * in, 0.0),
                          std::vector<double>(out, 0.0)});
        in = out;
    }
    return DeferredMlp(direction_bands, std::move(layers));
}

DeferredMlp DeferredMlp::random(int direction_bands, std::uint64_t seed, std::vector<int> hidden)
{
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    int in = input_width(direction_bands);
    hidden.push_back(kOutputs);
    for (int out : hidden) {
        const double a = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> dist(-a, a);
        DenseLayer l{out, in, std::vector<double>(static_cast<std::size_t>(out) * in),
                     std::vector<double>(out, 0.0)};
        for (auto& w : l.weights) {
            w = dist(rng);
        }
        layers.push_back(std::move(l));
        in = out;
    }
    return DeferredMlp(direction_bands, std::move(layers));
}

std::size_t DeferredMlp::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += l.weights.size() + l.bias.size();
    }
    return n;
}

std::vector<double> DeferredMlp::parameters() const
{
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

void DeferredMlp::set_parameters(std::span<const double> values)
{
    if (values.size() != parameter_count()) {
        throw std::invalid_argument("set_parameters: expected " + std::to_string(parameter_count()) +
                                    " values, got " + std::to_string(values.size()));
    }
    auto it = values.begin();
    for (auto& l : layers_) {
        std::copy_n(it, l.weights.size(), l.weights.begin());
        it += static_cast<std::ptrdiff_t>(l.weights.size());
        std::copy_n(it, l.bias.size(), l.bias.begin());
        it += static_cast<std::ptrdiff_t>(l.bias.size());
    }
}

DeferredMlp default_shading_mlp(int direction_bands, std::uint64_t seed)
{
    DeferredMlp mlp = DeferredMlp::random(direction_bands, seed);
    std::vector<double> params = mlp.parameters();
    std::fill(params.end() - DeferredMlp::kOutputs, params.end(), -3.0);
    mlp.set_parameters(params);
    return mlp;
}

Vec3 mlp_forward(const DeferredMlp& mlp, std::span<const double> input)
{
    if (static_cast<int>(input.size()) != mlp.input_width()) {
        throw std::invalid_argument("mlp_forward: input width " + std::to_string(input.size()) +
                                    ", network expects " + std::to_string(mlp.input_width()));
    }
    std::array<double, DeferredMlp::kMaxWidth> a{};
    std::array<double, DeferredMlp::kMaxWidth> b{};
    std::copy(input.begin(), input.end(), a.begin());

    const auto& layers = mlp.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const DenseLayer& l = layers[li];
        const bool last = li + 1 == layers.size();
        for (int r = 0; r < l.rows; ++r) {
            const double* w = l.weights.data() + static_cast<std::size_t>(r) * l.cols;
            double s = l.bias[r];
            for (int c = 0; c < l.cols; ++c) {
                s += w[c] * a[c];
            }
            b[r] = last ? sigmoid(s) : std::max(s, 0.0);
        }
        std::swap(a, b);
    }
    return {a[0], a[1], a[2]};
}

void build_shading_input(const DeferredMlp& mlp, const Vec3& diffuse, const Vec4& feature,
                         const Vec3& direction, std::span<double> out)
{
    if (static_cast<int>(out.size()) != mlp.input_width()) {
        throw std::invalid_argument("build_shading_input: output span has wrong width");
    }
    for (int i = 0; i < 3; ++i) {
        out[i] = diffuse[i];
    }
    for (int i = 0; i < 4; ++i) {
        out[3 + i] = feature[i];
    }
    const std::array<double, 3> d{direction.x(), direction.y(), direction.z()};
    positional_encode_into(d, mlp.direction_bands(), out.subspan(7));
}

Vec3 shade_deferred(const DeferredMlp& mlp, const RayAccumulation& acc, const Vec3& direction)
{
    if (acc.alpha == 0.0) {
        return acc.diffuse;
    }
    std::array<double, DeferredMlp::kMaxWidth> input{};
    const auto view = std::span<double>(input).first(mlp.input_width());
    build_shading_input(mlp, acc.diffuse, acc.feature, direction, view);
    const Vec3 residual = mlp_forward(mlp, view);
    return (acc.diffuse + residual).cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace snerg
