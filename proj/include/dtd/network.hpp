#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dtd/archive.hpp"
#include "dtd/pairs.hpp"
#include "dtd/tensor.hpp"

// Detection-pooling networks: alternating rectified affine maps and sum/Lp
// pooling, ending in a single output unit. Forward inference keeps every
// layer's activations because the relevance propagation needs them.

namespace dtd {

struct DetectionLayer {
    Tensor weights;  // [d_in x d_out]
    Tensor biases;   // [d_out]
    bool constrain_bias_nonpositive = true;

    std::size_t input_size() const { return weights.extent(0); }
    std::size_t output_size() const { return weights.extent(1); }
};

struct PoolingLayer {
    std::size_t group_size = 1;
    double p = 1.0;  // 1 = sum-pooling, lp_infinity = max-pooling
};

using Layer = std::variant<DetectionLayer, PoolingLayer>;

enum class BoundsPolicy { Ignore, Warn, Error };

struct Network {
    std::vector<Layer> layers;
    std::size_t input_size = 0;
    Tensor input_lower;  // per-input pixel bounds (l <= 0 <= h)
    Tensor input_upper;

    std::size_t output_size() const;
    std::size_t detection_layer_count() const;
    void validate() const;  // extents chain, final output extent 1
};

struct ActivationTrace {
    // values[0] is the input; values[i+1] is the output of layers[i].
    std::vector<Tensor> values;
    double output() const { return values.back()[0]; }
};

ActivationTrace forward(const Network& net, const Tensor& x,
                        BoundsPolicy bounds = BoundsPolicy::Warn);

// Exact subgradient of the scalar output w.r.t. the input; the rectifier
// subgradient at exactly 0 is taken as 0.
Tensor gradient(const Network& net, const Tensor& x);

struct TrainConfig {
    std::size_t iterations = 50000;
    std::size_t minibatch_size = 20;
    double learning_rate = 1e-4;
    double weight_init_std = 0.05;
    std::uint64_t seed = 0;
};

struct TrainResult {
    double initial_mse = 0.0;
    double final_mse = 0.0;
};

// Minibatch SGD on mean-square error against the sample targets. Constrained
// biases are clamped to min(b, 0) after every update. Deterministic under a
// fixed seed. Throws std::runtime_error if the loss becomes non-finite.
TrainResult train_sgd(Network& net, const std::vector<PairedSample>& data,
                      const TrainConfig& cfg);

// Architecture presets for the paired-digit task (28x56 inputs):
//   "mnist-one-layer": 1568 -> 400 detections -> sum-pool -> 1
//   "mnist-two-layer": 1568 -> 400 -> sum-pool(4) -> 100 -> 400 -> sum-pool -> 1
Network make_preset(const std::string& name, std::uint64_t seed);

ModelArchive network_to_archive(const Network& net);
Network network_from_archive(const ModelArchive& archive);

}  // namespace dtd
