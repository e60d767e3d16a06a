// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/finetune.hpp>
#include <snerg/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace snerg {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state)
{
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
    }
    const AdamConfig& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

namespace {

// Examples per reduction chunk. Fixed so the summation order, and with it
// every bit of the result, does not depend on the thread count.
constexpr std::size_t kChunk = 256;

/// Scratch space for one forward/backward pass.
struct Workspace
{
    std::vector<std::vector<double>> acts;  // acts[0] is the input
    std::vector<double> delta;
    std::vector<double> delta_prev;

    explicit Workspace(const DeferredMlp& mlp)
    {
        acts.emplace_back(mlp.input_width());
        for (const DenseLayer& l : mlp.layers()) {
            acts.emplace_back(l.rows);
        }
        delta.resize(DeferredMlp::kMaxWidth);
        delta_prev.resize(DeferredMlp::kMaxWidth);
    }
};

double forward(const DeferredMlp& mlp, const TrainExample& ex, Workspace& ws)
{
    build_shading_input(mlp, ex.diffuse, ex.feature, ex.direction, ws.acts[0]);
    const auto& layers = mlp.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const DenseLayer& l = layers[li];
        const bool last = li + 1 == layers.size();
        const std::vector<double>& in = ws.acts[li];
        std::vector<double>& out = ws.acts[li + 1];
        for (int r = 0; r < l.rows; ++r) {
            const double* w = l.weights.data() + static_cast<std::size_t>(r) * l.cols;
            double s = l.bias[r];
            for (int c = 0; c < l.cols; ++c) {
                s += w[c] * in[c];
            }
            out[r] = last ? sigmoid(s) : std::max(s, 0.0);
        }
    }
    const std::vector<double>& y = ws.acts.back();
    double se = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double e = ex.diffuse[k] + y[k] - ex.target[k];
        se += e * e;
    }
    return se;
}

/// Adds d(se)/d(params) * scale into `grad`; forward() must have run.
void backward(const DeferredMlp& mlp, const TrainExample& ex, double scale, Workspace& ws,
              std::span<double> grad, std::span<const std::size_t> offsets)
{
    const auto& layers = mlp.layers();
    const std::vector<double>& y = ws.acts.back();
    for (int k = 0; k < 3; ++k) {
        const double e = ex.diffuse[k] + y[k] - ex.target[k];
        ws.delta[k] = scale * 2.0 * e * y[k] * (1.0 - y[k]);
    }
    for (std::size_t li = layers.size(); li-- > 0;) {
        const DenseLayer& l = layers[li];
        const std::vector<double>& in = ws.acts[li];
        double* gw = grad.data() + offsets[li];
        double* gb = gw + l.weights.size();
        for (int r = 0; r < l.rows; ++r) {
            const double d = ws.delta[r];
            gb[r] += d;
            if (d == 0.0) {
                continue;
            }
            double* row = gw + static_cast<std::size_t>(r) * l.cols;
            for (int c = 0; c < l.cols; ++c) {
                row[c] += d * in[c];
            }
        }
        if (li == 0) {
            break;
        }
        std::fill_n(ws.delta_prev.begin(), l.cols, 0.0);
        for (int r = 0; r < l.rows; ++r) {
            const double d = ws.delta[r];
            if (d == 0.0) {
                continue;
            }
            const double* w = l.weights.data() + static_cast<std::size_t>(r) * l.cols;
            for (int c = 0; c < l.cols; ++c) {
                ws.delta_prev[c] += d * w[c];
            }
        }
        // ReLU: gradient flows only through positive pre-activations.
        for (int c = 0; c < l.cols; ++c) {
            ws.delta[c] = in[c] > 0.0 ? ws.delta_prev[c] : 0.0;
        }
    }
}

std::vector<std::size_t> layer_offsets(const DeferredMlp& mlp)
{
    std::vector<std::size_t> off;
    std::size_t o = 0;
    for (const DenseLayer& l : mlp.layers()) {
        off.push_back(o);
        o += l.weights.size() + l.bias.size();
    }
    return off;
}

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

} // namespace

LossAndGrad shade_loss_and_grad(const DeferredMlp& mlp, std::span<const TrainExample> batch)
{
    if (batch.empty()) {
        throw std::invalid_argument("shade_loss_and_grad: empty batch");
    }
    const std::size_t p = mlp.parameter_count();
    const auto offsets = layer_offsets(mlp);
    const double scale = 1.0 / static_cast<double>(batch.size());
    const std::size_t chunks = chunk_count(batch.size());
    std::vector<double> losses(chunks, 0.0);
    std::vector<std::vector<double>> grads(chunks);

    parallel_for(0, chunks, [&](std::size_t ci) {
        Workspace ws(mlp);
        std::vector<double>& g = grads[ci];
        g.assign(p, 0.0);
        const std::size_t end = std::min(batch.size(), (ci + 1) * kChunk);
        double loss = 0.0;
        for (std::size_t i = ci * kChunk; i < end; ++i) {
            loss += forward(mlp, batch[i], ws);
            backward(mlp, batch[i], scale, ws, g, offsets);
        }
        losses[ci] = loss;
    });

    LossAndGrad out;
    out.grad.assign(p, 0.0);
    for (std::size_t ci = 0; ci < chunks; ++ci) {
        out.loss += losses[ci];
        for (std::size_t j = 0; j < p; ++j) {
            out.grad[j] += grads[ci][j];
        }
    }
    out.loss *= scale;
    return out;
}

double shade_loss(const DeferredMlp& mlp, std::span<const TrainExample> batch)
{
    if (batch.empty()) {
        throw std::invalid_argument("shade_loss: empty batch");
    }
    const std::size_t chunks = chunk_count(batch.size());
    std::vector<double> losses(chunks, 0.0);
    parallel_for(0, chunks, [&](std::size_t ci) {
        Workspace ws(mlp);
        const std::size_t end = std::min(batch.size(), (ci + 1) * kChunk);
        double loss = 0.0;
        for (std::size_t i = ci * kChunk; i < end; ++i) {
            loss += forward(mlp, batch[i], ws);
        }
        losses[ci] = loss;
    });
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(batch.size());
}

template <typename Grid>
std::vector<TrainExample> collect_examples(const Grid& grid, std::span<const View> views,
                                           const RenderConfig& config)
{
    config.validate();
    std::vector<TrainExample> out;
    for (const View& view : views) {
        view.camera.validate();
        const int w = view.camera.width;
        const int h = view.camera.height;
        if (view.image.width != w || view.image.height != h ||
            view.image.rgb.size() != static_cast<std::size_t>(w) * h * 3) {
            throw std::invalid_argument("collect_examples: image size does not match its camera");
        }
        std::vector<std::optional<TrainExample>> rows(static_cast<std::size_t>(w) * h);
        parallel_for(0, h, [&](std::size_t row) {
            for (int col = 0; col < w; ++col) {
                const Ray ray = generate_ray(view.camera, static_cast<int>(row), col);
                const RayAccumulation acc = accumulate_ray(grid, ray, config);
                if (acc.alpha == 0.0) {
                    continue;
                }
                const Vec3 bg = (1.0 - acc.alpha) * config.background;
                const Vec3 target = (view.image.pixel(static_cast<int>(row), col) - bg).cwiseMax(0.0).cwiseMin(1.0);
                rows[row * w + col] = TrainExample{acc.diffuse, acc.feature, ray.direction, target};
            }
        });
        for (auto& ex : rows) {
            if (ex) {
                out.push_back(*ex);
            }
        }
    }
    return out;
}

template <typename Grid>
FinetuneResult finetune(const Grid& grid, const DeferredMlp& mlp, std::span<const View> views,
                        const FinetuneOptions& options)
{
    if (views.empty()) {
        throw std::invalid_argument("finetune: no reference views");
    }
    if (options.epochs < 0 || options.batch_size < 1 || !(options.lr > 0.0)) {
        throw std::invalid_argument("finetune: epochs >= 0, batch size >= 1 and lr > 0 required");
    }
    const std::vector<TrainExample> examples = collect_examples(grid, views, options.render);

    FinetuneResult result{mlp, {}};
    if (examples.empty()) {
        result.trace.push_back({0, 0.0, 0.0});
        return result;
    }
    double best = shade_loss(mlp, examples);
    result.trace.push_back({0, best, best});
    if (options.epochs == 0) {
        return result;
    }

    DeferredMlp current = mlp;
    std::vector<double> params = current.parameters();
    AdamState adam(params.size(), AdamConfig{options.lr});
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrainExample> batch;
    batch.reserve(std::min<std::size_t>(options.batch_size, examples.size()));

    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(examples[order[i]]);
            }
            const LossAndGrad lg = shade_loss_and_grad(current, batch);
            adam_step(params, lg.grad, adam);
            current.set_parameters(params);
        }
        const double loss = shade_loss(current, examples);
        if (loss < best) {
            best = loss;
            result.mlp = current;
        }
        result.trace.push_back({epoch, best, loss});
    }
    return result;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const EpochLoss> trace)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write loss trace " + path.string());
    }
    out.precision(17);
    for (const EpochLoss& e : trace) {
        out << e.epoch << ',' << e.loss << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing loss trace " + path.string());
    }
}

template std::vector<TrainExample> collect_examples(const SnergGrid&, std::span<const View>, const RenderConfig&);
template std::vector<TrainExample> collect_examples(const QuantizedGrid&, std::span<const View>,
                                                    const RenderConfig&);
template FinetuneResult finetune(const SnergGrid&, const DeferredMlp&, std::span<const View>,
                                 const FinetuneOptions&);
template FinetuneResult finetune(const QuantizedGrid&, const DeferredMlp&, std::span<const View>,
                                 const FinetuneOptions&);

} // namespace snerg
