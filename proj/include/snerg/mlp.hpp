// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file mlp.hpp
/// The per-pixel view-dependence network. Input is the accumulated diffuse
/// color (3), the accumulated feature vector (4) and the positionally
/// encoded view direction (3 + 6L); hidden layers use ReLU and the output
/// layer a sigmoid, producing a residual added to the diffuse color.
///

#pragma once

#include <snerg/core_math.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace snerg {

/// Row-major `rows x cols` weights (rows = outputs) plus `rows` biases.
struct DenseLayer
{
    int rows = 0;
    int cols = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class DeferredMlp
{
public:
    static constexpr int kDiffuseChannels = 3;
    static constexpr int kFeatureChannels = 4;
    static constexpr int kOutputs = 3;
    static constexpr int kHiddenWidth = 16;
    static constexpr int kDefaultDirectionBands = 4;
    /// Upper bound on any layer width; keeps evaluation allocation-free.
    static constexpr int kMaxWidth = 256;

    /// Validates the layer chain: first layer takes input_width(bands)
    /// inputs, consecutive widths agree, the last layer has 3 outputs and
    /// all values are finite.
    DeferredMlp(int direction_bands, std::vector<DenseLayer> layers);

    /// input -> 16 -> 16 -> 3 with all weights and biases zero.
    static DeferredMlp zeros(int direction_bands = kDefaultDirectionBands);

    /// input -> hidden... -> 3, Glorot-uniform weights, zero biases.
    static DeferredMlp random(int direction_bands, std::uint64_t seed,
                              std::vector<int> hidden = {kHiddenWidth, kHiddenWidth});

    static int input_width(int direction_bands)
    {
        return kDiffuseChannels + kFeatureChannels + encoded_width(3, direction_bands);
    }

    int input_width() const { return input_width(direction_bands_); }
    int direction_bands() const { return direction_bands_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::size_t parameter_count() const;
    /// Weights then bias, layer by layer.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

    friend bool operator==(const DeferredMlp&, const DeferredMlp&) = default;

private:
    int direction_bands_;
    std::vector<DenseLayer> layers_;
};

/// Shading network used for the built-in scenes: Glorot weights from `seed`
/// with the output bias at -3, so the residual is a small view-dependent
/// highlight rather than a flat gray.
DeferredMlp default_shading_mlp(int direction_bands = DeferredMlp::kDefaultDirectionBands,
                                std::uint64_t seed = 0);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Runs the network. Throws std::invalid_argument on an input width mismatch.
Vec3 mlp_forward(const DeferredMlp& mlp, std::span<const double> input);

/// Fills `out` (size mlp.input_width()) with [diffuse, feature, encode(direction)].
void build_shading_input(const DeferredMlp& mlp, const Vec3& diffuse, const Vec4& feature,
                         const Vec3& direction, std::span<double> out);

/// clamp(diffuse + MLP(diffuse, feature, direction), 0, 1). Pixels with zero
/// accumulated alpha skip the network and return the diffuse color as-is.
Vec3 shade_deferred(const DeferredMlp& mlp, const RayAccumulation& acc, const Vec3& direction);

} // namespace snerg
