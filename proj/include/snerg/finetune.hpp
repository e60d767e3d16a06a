// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file finetune.hpp
/// Refits the shading network against reference images with the grid held
/// fixed. Backprop is hand-written for the ReLU/sigmoid chain in mlp.hpp.
///

#pragma once

#include <snerg/grid.hpp>
#include <snerg/mlp.hpp>
#include <snerg/renderer.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace snerg {

struct AdamConfig
{
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState
{
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(std::size_t parameters, AdamConfig cfg)
        : config(cfg)
        , m(parameters, 0.0)
        , v(parameters, 0.0)
    {
    }
};

/// Bias-corrected Adam update of `params` in place. Throws
/// std::invalid_argument when params, grads and the moment vectors differ in
/// length.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

struct TrainExample
{
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
    Vec3 direction = Vec3(0.0, 0.0, -1.0);
    Vec3 target = Vec3::Zero();
};

struct LossAndGrad
{
    double loss = 0.0;
    /// Same layout as DeferredMlp::parameters().
    std::vector<double> grad;
};

/// Mean over the batch of the per-example squared error (summed over the
/// three channels) between diffuse + residual, unclamped, and the target.
/// Throws std::invalid_argument on an empty batch.
LossAndGrad shade_loss_and_grad(const DeferredMlp& mlp, std::span<const TrainExample> batch);
double shade_loss(const DeferredMlp& mlp, std::span<const TrainExample> batch);

struct View
{
    Camera camera;
    Image image;
};

/// One example per pixel with non-zero accumulated alpha (the network never
/// runs on the others). The target is the reference pixel minus the
/// background contribution, clamped to [0, 1].
template <typename Grid>
std::vector<TrainExample> collect_examples(const Grid& grid, std::span<const View> views,
                                           const RenderConfig& config);

struct FinetuneOptions
{
    int epochs = 100;
    double lr = 3e-4;
    std::uint64_t seed = 0;
    int batch_size = 4096;
    RenderConfig render;
};

struct EpochLoss
{
    int epoch = 0;
    /// Full-dataset loss of the retained (best so far) parameters.
    double loss = 0.0;
    /// Full-dataset loss of the parameters at the end of this epoch.
    double epoch_loss = 0.0;
};

struct FinetuneResult
{
    DeferredMlp mlp;
    /// Entry 0 is the starting loss, entry k the state after epoch k.
    std::vector<EpochLoss> trace;
};

/// Minibatch Adam over shuffled per-pixel examples; keeps the parameters with
/// the lowest full-dataset loss. Throws std::invalid_argument for empty views,
/// image/camera size mismatches or bad options.
template <typename Grid>
FinetuneResult finetune(const Grid& grid, const DeferredMlp& mlp, std::span<const View> views,
                        const FinetuneOptions& options);

/// Lines of "epoch,loss".
void write_loss_trace(const std::filesystem::path& path, std::span<const EpochLoss> trace);

extern template std::vector<TrainExample> collect_examples(const SnergGrid&, std::span<const View>,
                                                           const RenderConfig&);
extern template std::vector<TrainExample> collect_examples(const QuantizedGrid&, std::span<const View>,
                                                           const RenderConfig&);
extern template FinetuneResult finetune(const SnergGrid&, const DeferredMlp&, std::span<const View>,
                                        const FinetuneOptions&);
extern template FinetuneResult finetune(const QuantizedGrid&, const DeferredMlp&, std::span<const View>,
                                        const FinetuneOptions&);

} // namespace snerg
