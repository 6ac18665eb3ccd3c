#include "dtd/network.hpp"

#include <cmath>
#include <iostream>
#include <random>

#include "dtd/kernels.hpp"

namespace dtd {

namespace {

std::size_t layer_output_size(const Layer& layer, std::size_t in) {
    if (const auto* det = std::get_if<DetectionLayer>(&layer)) {
        if (det->input_size() != in)
            throw ShapeError("network: detection layer expects " +
                             std::to_string(det->input_size()) + " inputs, got " +
                             std::to_string(in));
        return det->output_size();
    }
    const auto& pool = std::get<PoolingLayer>(layer);
    if (pool.group_size == 0 || in % pool.group_size != 0)
        throw ShapeError("network: pooling group size " + std::to_string(pool.group_size) +
                         " does not divide layer extent " + std::to_string(in));
    return in / pool.group_size;
}

Tensor pool_forward(const PoolingLayer& pool, const Tensor& x) {
    const std::size_t groups = x.size() / pool.group_size;
    Tensor out({groups}, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        const double* base = x.raw() + g * pool.group_size;
        double acc = 0.0;
        if (pool.p == 1.0) {
            acc = kernels::active_ops().sum(base, pool.group_size);
        } else if (pool.p == lp_infinity) {
            for (std::size_t j = 0; j < pool.group_size; ++j) acc = std::max(acc, base[j]);
        } else {
            for (std::size_t j = 0; j < pool.group_size; ++j) acc += std::pow(base[j], pool.p);
            acc = std::pow(acc, 1.0 / pool.p);
        }
        out[g] = acc;
    }
    return out;
}

// delta w.r.t. pool outputs -> delta w.r.t. pool inputs
Tensor pool_backward(const PoolingLayer& pool, const Tensor& x, const Tensor& pooled,
                     const Tensor& delta_out) {
    Tensor delta_in(x.shape(), 0.0);
    const std::size_t groups = pooled.size();
    for (std::size_t g = 0; g < groups; ++g) {
        const double* base = x.raw() + g * pool.group_size;
        double* dbase = delta_in.raw() + g * pool.group_size;
        const double d = delta_out[g];
        if (d == 0.0) continue;
        if (pool.p == 1.0) {
            for (std::size_t j = 0; j < pool.group_size; ++j) dbase[j] = d;
        } else if (pool.p == lp_infinity) {
            std::size_t arg = 0;  // first-index tie-break
            for (std::size_t j = 1; j < pool.group_size; ++j)
                if (base[j] > base[arg]) arg = j;
            dbase[arg] = d;
        } else {
            const double xk = pooled[g];
            if (xk > 0.0)
                for (std::size_t j = 0; j < pool.group_size; ++j)
                    dbase[j] = d * std::pow(base[j] / xk, pool.p - 1.0);
        }
    }
    return delta_in;
}

}  // namespace

std::size_t Network::output_size() const {
    std::size_t n = input_size;
    for (const auto& layer : layers) n = layer_output_size(layer, n);
    return n;
}

std::size_t Network::detection_layer_count() const {
    std::size_t c = 0;
    for (const auto& layer : layers)
        if (std::holds_alternative<DetectionLayer>(layer)) ++c;
    return c;
}

void Network::validate() const {
    if (output_size() != 1)
        throw ShapeError("network: final output extent is " + std::to_string(output_size()) +
                         ", expected 1");
    if (input_lower.size() != input_size || input_upper.size() != input_size)
        throw ShapeError("network: pixel bounds do not match input size");
}

ActivationTrace forward(const Network& net, const Tensor& x, BoundsPolicy bounds) {
    if (x.size() != net.input_size)
        throw ShapeError("forward: input size " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_size));
    if (bounds != BoundsPolicy::Ignore) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < net.input_lower[i] - 1e-12 || x[i] > net.input_upper[i] + 1e-12) {
                if (bounds == BoundsPolicy::Error)
                    throw std::invalid_argument("forward: input component " + std::to_string(i) +
                                                " = " + std::to_string(x[i]) +
                                                " outside pixel bounds");
                std::cerr << "warning: input component " << i << " outside pixel bounds\n";
                break;
            }
        }
    }

    ActivationTrace trace;
    Tensor cur = x.rank() == 1 ? x : x.reshaped({x.size()});
    trace.values.push_back(cur);
    for (const auto& layer : net.layers) {
        if (const auto* det = std::get_if<DetectionLayer>(&layer)) {
            Tensor z = matmul(cur.reshaped({1, cur.size()}), det->weights)
                           .reshaped({det->output_size()});
            z = add(z, det->biases);
            cur = clamp_parts(z, ClampPart::Positive);
        } else {
            cur = pool_forward(std::get<PoolingLayer>(layer), cur);
        }
        trace.values.push_back(cur);
    }
    return trace;
}

Tensor gradient(const Network& net, const Tensor& x) {
    const ActivationTrace trace = forward(net, x, BoundsPolicy::Ignore);
    Tensor delta = Tensor::scalar(1.0);
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Tensor& in = trace.values[li];
        const Tensor& out = trace.values[li + 1];
        if (const auto* det = std::get_if<DetectionLayer>(&net.layers[li])) {
            // rectifier mask: active where post-activation > 0
            Tensor masked(delta.shape(), 0.0);
            for (std::size_t j = 0; j < delta.size(); ++j)
                masked[j] = out[j] > 0.0 ? delta[j] : 0.0;
            delta = matmul(masked.reshaped({1, masked.size()}), transpose(det->weights))
                        .reshaped({in.size()});
        } else {
            delta = pool_backward(std::get<PoolingLayer>(net.layers[li]), in, out, delta);
        }
    }
    return delta.reshaped(x.shape());
}

TrainResult train_sgd(Network& net, const std::vector<PairedSample>& data,
                      const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_sgd: empty training set");
    net.validate();

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    const std::size_t batch = cfg.minibatch_size;
    const std::size_t d_in = net.input_size;

    auto batch_mse = [&](const std::vector<std::size_t>& idx) {
        double mse = 0.0;
        for (std::size_t i : idx) {
            const double f = forward(net, data[i].image, BoundsPolicy::Ignore).output();
            const double e = f - data[i].target;
            mse += e * e;
        }
        return mse / double(idx.size());
    };

    // fixed evaluation subset for the reported initial/final MSE
    std::vector<std::size_t> eval_idx;
    for (std::size_t i = 0; i < std::min<std::size_t>(data.size(), 256); ++i)
        eval_idx.push_back(i);
    TrainResult result;
    result.initial_mse = batch_mse(eval_idx);
    result.final_mse = result.initial_mse;
    if (cfg.iterations == 0) return result;

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        // assemble minibatch
        Tensor X({batch, d_in}, 0.0);
        Tensor targets({batch}, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const PairedSample& s = data[pick(rng)];
            std::copy(s.image.data().begin(), s.image.data().end(), X.raw() + b * d_in);
            targets[b] = s.target;
        }

        // batch forward, keeping activations per layer
        std::vector<Tensor> acts;
        acts.push_back(X);
        for (const auto& layer : net.layers) {
            const Tensor& cur = acts.back();
            if (const auto* det = std::get_if<DetectionLayer>(&layer)) {
                Tensor z = matmul(cur, det->weights);
                for (std::size_t b = 0; b < batch; ++b)
                    kernels::active_ops().add(z.raw() + b * det->output_size(),
                                              det->biases.raw(),
                                              z.raw() + b * det->output_size(),
                                              det->output_size());
                acts.push_back(clamp_parts(z, ClampPart::Positive));
            } else {
                const auto& pool = std::get<PoolingLayer>(layer);
                const std::size_t groups = cur.extent(1) / pool.group_size;
                Tensor out({batch, groups}, 0.0);
                for (std::size_t b = 0; b < batch; ++b) {
                    Tensor row(Shape{cur.extent(1)},
                               std::vector<double>(cur.raw() + b * cur.extent(1),
                                                   cur.raw() + (b + 1) * cur.extent(1)));
                    Tensor pr = pool_forward(pool, row);
                    std::copy(pr.data().begin(), pr.data().end(), out.raw() + b * groups);
                }
                acts.push_back(out);
            }
        }

        // loss and output delta (mean-square error over the minibatch)
        const Tensor& out = acts.back();
        double loss = 0.0;
        Tensor delta({batch, 1}, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const double e = out[b] - targets[b];
            loss += e * e;
            delta[b] = 2.0 * e / double(batch);
        }
        loss /= double(batch);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_sgd: loss diverged to a non-finite value at iteration " +
                                     std::to_string(it));

        // backward pass with immediate parameter updates
        for (std::size_t li = net.layers.size(); li-- > 0;) {
            const Tensor& in = acts[li];
            const Tensor& outa = acts[li + 1];
            if (auto* det = std::get_if<DetectionLayer>(&net.layers[li])) {
                // rectifier mask
                Tensor masked(delta.shape(), 0.0);
                for (std::size_t i = 0; i < delta.size(); ++i)
                    masked[i] = outa[i] > 0.0 ? delta[i] : 0.0;
                const bool need_input_delta = li > 0;
                Tensor grad_w = matmul(transpose(in), masked);
                if (need_input_delta) delta = matmul(masked, transpose(det->weights));
                kernels::active_ops().axpy(-cfg.learning_rate, grad_w.raw(),
                                           det->weights.raw(), grad_w.size());
                // bias gradient: column sums of masked delta
                for (std::size_t j = 0; j < det->output_size(); ++j) {
                    double g = 0.0;
                    for (std::size_t b = 0; b < batch; ++b)
                        g += masked[b * det->output_size() + j];
                    double& bj = det->biases[j];
                    bj -= cfg.learning_rate * g;
                    if (det->constrain_bias_nonpositive && bj > 0.0) bj = 0.0;
                }
            } else {
                const auto& pool = std::get<PoolingLayer>(net.layers[li]);
                const std::size_t in_width = in.extent(1);
                const std::size_t out_width = outa.extent(1);
                Tensor next({batch, in_width}, 0.0);
                for (std::size_t b = 0; b < batch; ++b) {
                    Tensor row_in(Shape{in_width},
                                  std::vector<double>(in.raw() + b * in_width,
                                                      in.raw() + (b + 1) * in_width));
                    Tensor row_out(Shape{out_width},
                                   std::vector<double>(outa.raw() + b * out_width,
                                                       outa.raw() + (b + 1) * out_width));
                    Tensor row_delta(Shape{out_width},
                                     std::vector<double>(delta.raw() + b * out_width,
                                                         delta.raw() + (b + 1) * out_width));
                    Tensor di = pool_backward(pool, row_in, row_out, row_delta);
                    std::copy(di.data().begin(), di.data().end(), next.raw() + b * in_width);
                }
                delta = next;
            }
        }
        result.final_mse = loss;
    }
    result.final_mse = batch_mse(eval_idx);
    return result;
}

Network make_preset(const std::string& name, std::uint64_t seed) {
    const std::size_t input = 28 * 56;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, 0.05);
    auto detection = [&](std::size_t d_in, std::size_t d_out) {
        DetectionLayer det;
        det.weights = Tensor({d_in, d_out}, 0.0);
        for (auto& w : det.weights.mutable_data()) w = init(rng);
        det.biases = Tensor({d_out}, 0.0);
        det.constrain_bias_nonpositive = true;
        return det;
    };

    Network net;
    net.input_size = input;
    net.input_lower = Tensor({input}, pixel_low);
    net.input_upper = Tensor({input}, pixel_high);
    if (name == "mnist-one-layer") {
        net.layers.emplace_back(detection(input, 400));
        net.layers.emplace_back(PoolingLayer{400, 1.0});
    } else if (name == "mnist-two-layer") {
        net.layers.emplace_back(detection(input, 400));
        net.layers.emplace_back(PoolingLayer{4, 1.0});
        net.layers.emplace_back(detection(100, 400));
        net.layers.emplace_back(PoolingLayer{400, 1.0});
    } else {
        throw std::invalid_argument("make_preset: unknown preset '" + name +
                                    "' (expected mnist-one-layer or mnist-two-layer)");
    }
    net.validate();
    return net;
}

ModelArchive network_to_archive(const Network& net) {
    ModelArchive a;
    a.ints["input_size"] = std::int64_t(net.input_size);
    a.ints["layer_count"] = std::int64_t(net.layers.size());
    a.tensors["input_lower"] = net.input_lower;
    a.tensors["input_upper"] = net.input_upper;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        if (const auto* det = std::get_if<DetectionLayer>(&net.layers[i])) {
            a.strings[prefix + "kind"] = "detection";
            a.tensors[prefix + "weights"] = det->weights;
            a.tensors[prefix + "biases"] = det->biases;
            a.ints[prefix + "constrain_bias"] = det->constrain_bias_nonpositive ? 1 : 0;
        } else {
            const auto& pool = std::get<PoolingLayer>(net.layers[i]);
            a.strings[prefix + "kind"] = "pooling";
            a.ints[prefix + "group_size"] = std::int64_t(pool.group_size);
            a.doubles[prefix + "p"] = pool.p;
        }
    }
    return a;
}

Network network_from_archive(const ModelArchive& a) {
    Network net;
    net.input_size = std::size_t(a.ints.at("input_size"));
    net.input_lower = a.tensors.at("input_lower");
    net.input_upper = a.tensors.at("input_upper");
    const std::size_t count = std::size_t(a.ints.at("layer_count"));
    for (std::size_t i = 0; i < count; ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        const std::string& kind = a.strings.at(prefix + "kind");
        if (kind == "detection") {
            DetectionLayer det;
            det.weights = a.tensors.at(prefix + "weights");
            det.biases = a.tensors.at(prefix + "biases");
            det.constrain_bias_nonpositive = a.ints.at(prefix + "constrain_bias") != 0;
            net.layers.emplace_back(std::move(det));
        } else {
            PoolingLayer pool;
            pool.group_size = std::size_t(a.ints.at(prefix + "group_size"));
            pool.p = a.doubles.at(prefix + "p");
            net.layers.emplace_back(pool);
        }
    }
    net.validate();
    return net;
}

}  // namespace dtd
