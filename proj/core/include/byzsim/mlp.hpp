#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "byzsim/matrix.hpp"

namespace byzsim {

// Local SGD hyperparameters. Learning rate 0.1 and momentum 0.9 are the
// experiment defaults; the L2 weight defaults to 1e-4.
struct TrainingConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double l2_weight = 1e-4;
    std::size_t batch_size = 10;
    std::size_t epochs = 1;
};

// Fully connected network: ReLU on hidden layers, softmax output, trained
// with mean cross-entropy plus l2_weight * ||params||^2.
//
// layer_sizes[0] is the input dimension, layer_sizes.back() the class count.
// weights[k] has shape layer_sizes[k] x layer_sizes[k+1] (row-major),
// biases[k] has length layer_sizes[k+1].
struct MlpModel {
    std::vector<std::size_t> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static MlpModel zeros(const std::vector<std::size_t>& sizes);
    // Weights uniform in +-1/sqrt(fan_in), biases zero, seeded.
    static MlpModel seeded_init(const std::vector<std::size_t>& sizes,
                                std::uint64_t seed);

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t class_count() const { return layer_sizes.back(); }
    std::size_t param_count() const;
};

// Total parameter count for a layer stack without building the model.
std::size_t mlp_param_count(const std::vector<std::size_t>& layer_sizes);

// Class-probability matrix for a batch (rows = samples). Each output row is
// a probability vector summing to 1.
Matrix forward(const MlpModel& model, const Matrix& batch);

struct BackwardResult {
    ParameterVector gradient; // flattened, same layout as flatten()
    double loss = 0.0;        // mean cross-entropy + l2_weight * ||params||^2
};

BackwardResult backward(const MlpModel& model, const Matrix& batch,
                        const std::vector<int>& targets, double l2_weight);

// Momentum SGD: velocity <- momentum * velocity + gradient;
//               params   <- params - learning_rate * velocity.
void sgd_step(MlpModel& model, const ParameterVector& gradient,
              ParameterVector& velocity, const TrainingConfig& config);

// Mini-batch SGD over a data chunk for config.epochs passes; the batch order
// comes from a shuffle seeded per call, so identical seeds give identical
// results. Returns the flattened final parameters.
ParameterVector train_local(const MlpModel& start, const Matrix& inputs,
                            const std::vector<int>& labels,
                            const TrainingConfig& config, std::uint64_t seed);

// Fixed flattening order: per layer, weights row-major, then biases.
ParameterVector flatten(const MlpModel& model);
MlpModel unflatten(const ParameterVector& params,
                   const std::vector<std::size_t>& layer_sizes);

} // namespace byzsim
