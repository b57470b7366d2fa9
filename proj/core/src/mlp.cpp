#include "byzsim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "byzsim/errors.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

namespace {

void require_layer_stack(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) {
        throw ConfigError("MlpModel: need at least input and output layers");
    }
    for (std::size_t s : sizes) {
        if (s == 0) throw ConfigError("MlpModel: zero-sized layer");
    }
}

} // namespace

std::size_t mlp_param_count(const std::vector<std::size_t>& layer_sizes) {
    require_layer_stack(layer_sizes);
    std::size_t d = 0;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        d += layer_sizes[k] * layer_sizes[k + 1] + layer_sizes[k + 1];
    }
    return d;
}

MlpModel MlpModel::zeros(const std::vector<std::size_t>& sizes) {
    require_layer_stack(sizes);
    MlpModel model;
    model.layer_sizes = sizes;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        model.weights.emplace_back(sizes[k], sizes[k + 1]);
        model.biases.emplace_back(sizes[k + 1], 0.0);
    }
    return model;
}

MlpModel MlpModel::seeded_init(const std::vector<std::size_t>& sizes,
                               std::uint64_t seed) {
    MlpModel model = zeros(sizes);
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
        for (double& w : model.weights[k].data) w = rng.uniform(-bound, bound);
    }
    return model;
}

std::size_t MlpModel::param_count() const {
    return mlp_param_count(layer_sizes);
}

Matrix forward(const MlpModel& model, const Matrix& batch) {
    if (batch.cols != model.input_dim()) {
        throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                         " features, model expects " +
                         std::to_string(model.input_dim()));
    }
    const std::size_t layers = model.weights.size();
    Matrix h = batch;
    for (std::size_t k = 0; k < layers; ++k) {
        const Matrix& w = model.weights[k];
        const std::vector<double>& b = model.biases[k];
        Matrix z(h.rows, w.cols);
        for (std::size_t r = 0; r < h.rows; ++r) {
            const double* in = h.row(r);
            double* out = z.row(r);
            for (std::size_t c = 0; c < w.cols; ++c) out[c] = b[c];
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double x = in[i];
                if (x == 0.0) continue;
                const double* wrow = w.row(i);
                for (std::size_t c = 0; c < w.cols; ++c) out[c] += x * wrow[c];
            }
        }
        if (k + 1 < layers) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0; // ReLU
        } else {
            // Row-wise softmax, max-shifted for stability.
            for (std::size_t r = 0; r < z.rows; ++r) {
                double* row = z.row(r);
                double mx = row[0];
                for (std::size_t c = 1; c < z.cols; ++c) mx = std::max(mx, row[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < z.cols; ++c) {
                    row[c] = std::exp(row[c] - mx);
                    sum += row[c];
                }
                for (std::size_t c = 0; c < z.cols; ++c) row[c] /= sum;
            }
        }
        h = std::move(z);
    }
    return h;
}

BackwardResult backward(const MlpModel& model, const Matrix& batch,
                        const std::vector<int>& targets, double l2_weight) {
    if (batch.cols != model.input_dim()) {
        throw ShapeError("backward: batch feature count mismatch");
    }
    if (batch.rows != targets.size()) {
        throw ShapeError("backward: batch rows and target count differ");
    }
    const std::size_t classes = model.class_count();
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw ShapeError("backward: target class out of range");
        }
    }

    const std::size_t layers = model.weights.size();
    const std::size_t batch_n = batch.rows;

    // Forward pass keeping every activation; pre_act[k] holds layer k's
    // pre-activation, activations[k] its post-activation input.
    std::vector<Matrix> activations;
    activations.reserve(layers + 1);
    activations.push_back(batch);
    std::vector<Matrix> pre_act(layers);
    for (std::size_t k = 0; k < layers; ++k) {
        const Matrix& w = model.weights[k];
        const std::vector<double>& b = model.biases[k];
        const Matrix& in = activations.back();
        Matrix z(in.rows, w.cols);
        for (std::size_t r = 0; r < in.rows; ++r) {
            const double* x = in.row(r);
            double* out = z.row(r);
            for (std::size_t c = 0; c < w.cols; ++c) out[c] = b[c];
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double v = x[i];
                if (v == 0.0) continue;
                const double* wrow = w.row(i);
                for (std::size_t c = 0; c < w.cols; ++c) out[c] += v * wrow[c];
            }
        }
        pre_act[k] = z;
        if (k + 1 < layers) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        } else {
            for (std::size_t r = 0; r < z.rows; ++r) {
                double* row = z.row(r);
                double mx = row[0];
                for (std::size_t c = 1; c < z.cols; ++c) mx = std::max(mx, row[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < z.cols; ++c) {
                    row[c] = std::exp(row[c] - mx);
                    sum += row[c];
                }
                for (std::size_t c = 0; c < z.cols; ++c) row[c] /= sum;
            }
        }
        activations.push_back(std::move(z));
    }

    const Matrix& probs = activations.back();
    double loss = 0.0;
    for (std::size_t r = 0; r < batch_n; ++r) {
        const double p = probs(r, static_cast<std::size_t>(targets[r]));
        loss -= std::log(std::max(p, 1e-300));
    }
    loss /= static_cast<double>(batch_n);

    BackwardResult result;
    result.gradient.assign(model.param_count(), 0.0);

    // delta starts as d(mean CE)/d(logits) = (probs - onehot) / batch_n.
    Matrix delta = probs;
    for (std::size_t r = 0; r < batch_n; ++r) {
        delta(r, static_cast<std::size_t>(targets[r])) -= 1.0;
    }
    for (double& v : delta.data) v /= static_cast<double>(batch_n);

    // Walk layers backwards, writing each layer's slice of the flat gradient.
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (std::size_t k = 0; k < layers; ++k) {
        offsets[k] = off;
        off += model.weights[k].rows * model.weights[k].cols + model.biases[k].size();
    }

    for (std::size_t k = layers; k-- > 0;) {
        const Matrix& w = model.weights[k];
        const Matrix& in = activations[k];
        double* gw = result.gradient.data() + offsets[k];
        double* gb = gw + w.rows * w.cols;

        for (std::size_t r = 0; r < batch_n; ++r) {
            const double* x = in.row(r);
            const double* dz = delta.row(r);
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double v = x[i];
                if (v == 0.0) continue;
                double* grow = gw + i * w.cols;
                for (std::size_t c = 0; c < w.cols; ++c) grow[c] += v * dz[c];
            }
            for (std::size_t c = 0; c < w.cols; ++c) gb[c] += dz[c];
        }

        if (k > 0) {
            Matrix prev_delta(batch_n, w.rows);
            for (std::size_t r = 0; r < batch_n; ++r) {
                const double* dz = delta.row(r);
                double* pd = prev_delta.row(r);
                const double* z_prev = pre_act[k - 1].row(r);
                for (std::size_t i = 0; i < w.rows; ++i) {
                    if (z_prev[i] <= 0.0) { // ReLU' (0 at the kink)
                        pd[i] = 0.0;
                        continue;
                    }
                    const double* wrow = w.row(i);
                    double acc = 0.0;
                    for (std::size_t c = 0; c < w.cols; ++c) acc += wrow[c] * dz[c];
                    pd[i] = acc;
                }
            }
            delta = std::move(prev_delta);
        }
    }

    if (l2_weight != 0.0) {
        const ParameterVector params = flatten(model);
        double sq = 0.0;
        for (std::size_t j = 0; j < params.size(); ++j) {
            sq += params[j] * params[j];
            result.gradient[j] += 2.0 * l2_weight * params[j];
        }
        loss += l2_weight * sq;
    }
    result.loss = loss;
    return result;
}

void sgd_step(MlpModel& model, const ParameterVector& gradient,
              ParameterVector& velocity, const TrainingConfig& config) {
    const std::size_t d = model.param_count();
    if (gradient.size() != d || velocity.size() != d) {
        throw ShapeError("sgd_step: gradient/velocity length mismatch");
    }
    std::size_t j = 0;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        for (double& w : model.weights[k].data) {
            velocity[j] = config.momentum * velocity[j] + gradient[j];
            w -= config.learning_rate * velocity[j];
            ++j;
        }
        for (double& b : model.biases[k]) {
            velocity[j] = config.momentum * velocity[j] + gradient[j];
            b -= config.learning_rate * velocity[j];
            ++j;
        }
    }
}

ParameterVector train_local(const MlpModel& start, const Matrix& inputs,
                            const std::vector<int>& labels,
                            const TrainingConfig& config, std::uint64_t seed) {
    if (inputs.rows == 0) {
        throw InsufficientDataError("train_local: empty data chunk");
    }
    if (inputs.rows != labels.size()) {
        throw ShapeError("train_local: inputs and labels disagree");
    }
    MlpModel model = start;
    ParameterVector velocity(model.param_count(), 0.0);
    Rng rng(seed);

    std::vector<std::size_t> order(inputs.rows);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            Matrix batch(end - begin, inputs.cols);
            std::vector<int> targets(end - begin);
            for (std::size_t r = begin; r < end; ++r) {
                const std::size_t src = order[r];
                std::copy(inputs.row(src), inputs.row(src) + inputs.cols,
                          batch.row(r - begin));
                targets[r - begin] = labels[src];
            }
            const BackwardResult grad =
                backward(model, batch, targets, config.l2_weight);
            sgd_step(model, grad.gradient, velocity, config);
        }
    }
    return flatten(model);
}

ParameterVector flatten(const MlpModel& model) {
    ParameterVector out;
    out.reserve(model.param_count());
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        out.insert(out.end(), model.weights[k].data.begin(), model.weights[k].data.end());
        out.insert(out.end(), model.biases[k].begin(), model.biases[k].end());
    }
    return out;
}

MlpModel unflatten(const ParameterVector& params,
                   const std::vector<std::size_t>& layer_sizes) {
    const std::size_t d = mlp_param_count(layer_sizes);
    if (params.size() != d) {
        throw ShapeError("unflatten: vector length " + std::to_string(params.size()) +
                         " does not match layout size " + std::to_string(d));
    }
    MlpModel model = MlpModel::zeros(layer_sizes);
    std::size_t j = 0;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        for (double& w : model.weights[k].data) w = params[j++];
        for (double& b : model.biases[k]) b = params[j++];
    }
    return model;
}

} // namespace byzsim
