#include "dtd/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dtd/kernels.hpp"

namespace dtd {

namespace {

Tensor as_row(const Tensor& v) { return v.reshaped({1, v.size()}); }
Tensor as_col(const Tensor& v) { return v.reshaped({v.size(), 1}); }

// z_j = sum_i x_i m_ij (+ bias_j), as a flat [d_out] tensor
Tensor preactivations(const Tensor& m, const Tensor& x) {
    return matmul(as_row(x), m).reshaped({m.extent(1)});
}

// R_i = x_i * (m . s)_i
Tensor weighted_backproject(const Tensor& m, const Tensor& x, const Tensor& s) {
    return mul(x, matmul(m, as_col(s)).reshaped({m.extent(0)}));
}

void check_layer_shapes(const DetectionLayer& layer, const Tensor& x,
                        const Tensor& upper_relevance, const char* rule) {
    if (x.size() != layer.input_size() || upper_relevance.size() != layer.output_size())
        throw ShapeError(std::string(rule) + ": activations " + shape_to_string(x.shape()) +
                         " / relevance " + shape_to_string(upper_relevance.shape()) +
                         " do not match layer [" + std::to_string(layer.input_size()) + " x " +
                         std::to_string(layer.output_size()) + "]");
}

Tensor positive_biases(const DetectionLayer& layer) {
    return clamp_parts(layer.biases, ClampPart::Positive);
}

}  // namespace

std::string RelevanceRule::name() const {
    switch (kind) {
        case RuleKind::W2: return "w2";
        case RuleKind::Z: return "z";
        case RuleKind::ZPlus: return absorb_positive_bias ? "zplus+bias" : "zplus";
        case RuleKind::ZBox: return absorb_positive_bias ? "zbox+bias" : "zbox";
        case RuleKind::AlphaBeta:
            return "alphabeta(" + std::to_string(alpha) + "," + std::to_string(beta) + ")";
        case RuleKind::Epsilon: return "epsilon(" + std::to_string(epsilon) + ")";
    }
    return "?";
}

bool RelevanceRule::consistency_guaranteed() const {
    switch (kind) {
        case RuleKind::W2:
        case RuleKind::ZPlus:
        case RuleKind::ZBox:
            return true;
        case RuleKind::AlphaBeta:
            // alpha=1, beta=0 coincides with z+ which carries the guarantee
            return alpha == 1.0 && beta == 0.0;
        case RuleKind::Z:
        case RuleKind::Epsilon:
            return false;
    }
    return false;
}

RelevanceRule RelevanceRule::w2() {
    RelevanceRule r;
    r.kind = RuleKind::W2;
    return r;
}
RelevanceRule RelevanceRule::z() {
    RelevanceRule r;
    r.kind = RuleKind::Z;
    return r;
}
RelevanceRule RelevanceRule::zplus(bool absorb) {
    RelevanceRule r;
    r.kind = RuleKind::ZPlus;
    r.absorb_positive_bias = absorb;
    return r;
}
RelevanceRule RelevanceRule::zbox(Tensor lower, Tensor upper, bool absorb) {
    RelevanceRule r;
    r.kind = RuleKind::ZBox;
    r.lower = std::move(lower);
    r.upper = std::move(upper);
    r.absorb_positive_bias = absorb;
    return r;
}
RelevanceRule RelevanceRule::alphabeta(double alpha, double beta) {
    if (std::abs(alpha - beta - 1.0) > 1e-12)
        throw std::invalid_argument("alphabeta rule: alpha - beta must equal 1, got alpha=" +
                                    std::to_string(alpha) + " beta=" + std::to_string(beta));
    if (beta < 0.0)
        throw std::invalid_argument("alphabeta rule: beta must be non-negative");
    RelevanceRule r;
    r.kind = RuleKind::AlphaBeta;
    r.alpha = alpha;
    r.beta = beta;
    return r;
}
RelevanceRule RelevanceRule::eps(double epsilon) {
    if (epsilon <= 0.0)
        throw std::invalid_argument("epsilon rule: epsilon must be positive");
    RelevanceRule r;
    r.kind = RuleKind::Epsilon;
    r.epsilon = epsilon;
    return r;
}

Tensor redistribute_pool(const PoolingLayer& pool, const Tensor& detections,
                         const Tensor& pooled_relevance) {
    if (detections.size() != pooled_relevance.size() * pool.group_size)
        throw ShapeError("redistribute_pool: " + std::to_string(detections.size()) +
                         " detections cannot feed " + std::to_string(pooled_relevance.size()) +
                         " pooled units with group size " + std::to_string(pool.group_size));
    Tensor out(detections.shape(), 0.0);
    for (std::size_t g = 0; g < pooled_relevance.size(); ++g) {
        const double* base = detections.raw() + g * pool.group_size;
        const double s = kernels::active_ops().sum(base, pool.group_size);
        if (std::abs(s) < kernels::div_guard_tolerance) continue;  // dead group
        const double f = pooled_relevance[g] / s;
        double* obase = out.raw() + g * pool.group_size;
        for (std::size_t j = 0; j < pool.group_size; ++j) obase[j] = base[j] * f;
    }
    return out;
}

Tensor propagate_w2(const DetectionLayer& layer, const Tensor& upper_relevance) {
    if (upper_relevance.size() != layer.output_size())
        throw ShapeError("w2: relevance extent " + std::to_string(upper_relevance.size()) +
                         " does not match layer output " + std::to_string(layer.output_size()));
    const Tensor v = mul(layer.weights, layer.weights);
    const Tensor col_sums = reduce(v, ReduceOp::Sum, 0);
    const Tensor s = guarded_div(upper_relevance, col_sums);
    return matmul(v, as_col(s)).reshaped({layer.input_size()});
}

Tensor propagate_z(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance) {
    check_layer_shapes(layer, x, upper_relevance, "z");
    const Tensor z = preactivations(layer.weights, x);  // bias excluded
    const Tensor s = guarded_div(upper_relevance, z);
    return weighted_backproject(layer.weights, x, s);
}

LayerRelevance propagate_zplus(const DetectionLayer& layer, const Tensor& x,
                               const Tensor& upper_relevance, bool absorb_positive_bias) {
    check_layer_shapes(layer, x, upper_relevance, "zplus");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < -1e-12)
            throw std::domain_error("zplus: activation " + std::to_string(i) + " = " +
                                    std::to_string(x[i]) +
                                    " is negative; the rule requires a non-negative domain");
    const Tensor v = clamp_parts(layer.weights, ClampPart::Positive);
    Tensor z = preactivations(v, x);
    LayerRelevance result;
    if (absorb_positive_bias) {
        const Tensor bp = positive_biases(layer);
        z = add(z, bp);
        const Tensor s = guarded_div(upper_relevance, z);
        result.input = weighted_backproject(v, x, s);
        result.bias = mul(bp, s);
    } else {
        const Tensor s = guarded_div(upper_relevance, z);
        result.input = weighted_backproject(v, x, s);
    }
    return result;
}

LayerRelevance propagate_zbox(const DetectionLayer& layer, const Tensor& x,
                              const Tensor& upper_relevance, const Tensor& lower,
                              const Tensor& upper, bool absorb_positive_bias) {
    check_layer_shapes(layer, x, upper_relevance, "zbox");
    if (lower.size() != x.size() || upper.size() != x.size())
        throw ShapeError("zbox: box bounds must match the activation extent " +
                         std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (lower[i] > 0.0 || upper[i] < 0.0)
            throw std::domain_error("zbox: box at component " + std::to_string(i) +
                                    " does not contain 0 (l=" + std::to_string(lower[i]) +
                                    ", h=" + std::to_string(upper[i]) + ")");
        if (x[i] < lower[i] - 1e-9 || x[i] > upper[i] + 1e-9)
            throw std::domain_error("zbox: activation " + std::to_string(i) + " = " +
                                    std::to_string(x[i]) + " lies outside the box [" +
                                    std::to_string(lower[i]) + ", " + std::to_string(upper[i]) +
                                    "]");
    }

    const Tensor v = clamp_parts(layer.weights, ClampPart::Positive);
    const Tensor u = clamp_parts(layer.weights, ClampPart::Negative);
    Tensor denom = sub(sub(preactivations(layer.weights, x), preactivations(v, lower)),
                       preactivations(u, upper));
    LayerRelevance result;
    Tensor bp;
    if (absorb_positive_bias) {
        bp = positive_biases(layer);
        denom = add(denom, bp);
    }
    const Tensor s = guarded_div(upper_relevance, denom);
    result.input = sub(sub(weighted_backproject(layer.weights, x, s),
                           weighted_backproject(v, lower, s)),
                       weighted_backproject(u, upper, s));
    if (absorb_positive_bias) result.bias = mul(bp, s);
    return result;
}

namespace {

LayerRelevance propagate_alphabeta(const DetectionLayer& layer, const Tensor& x,
                                   const Tensor& upper_relevance, double alpha, double beta) {
    check_layer_shapes(layer, x, upper_relevance, "alphabeta");
    const Tensor wp = clamp_parts(layer.weights, ClampPart::Positive);
    const Tensor wn = clamp_parts(layer.weights, ClampPart::Negative);
    const Tensor zp = add(preactivations(wp, x), positive_biases(layer));
    const Tensor zn = add(preactivations(wn, x), clamp_parts(layer.biases, ClampPart::Negative));
    const Tensor sp = scale(guarded_div(upper_relevance, zp), alpha);
    const Tensor sn = scale(guarded_div(upper_relevance, zn), beta);
    LayerRelevance result;
    result.input = sub(weighted_backproject(wp, x, sp), weighted_backproject(wn, x, sn));
    return result;
}

LayerRelevance propagate_epsilon(const DetectionLayer& layer, const Tensor& x,
                                 const Tensor& upper_relevance, double epsilon) {
    check_layer_shapes(layer, x, upper_relevance, "epsilon");
    Tensor denom = add(preactivations(layer.weights, x), layer.biases);
    for (auto& t : denom.mutable_data()) t += t >= 0.0 ? epsilon : -epsilon;
    const Tensor s = guarded_div(upper_relevance, denom);
    LayerRelevance result;
    result.input = weighted_backproject(layer.weights, x, s);
    return result;
}

}  // namespace

LayerRelevance apply_rule(const DetectionLayer& layer, const Tensor& x,
                          const Tensor& upper_relevance, const RelevanceRule& rule) {
    if (rule.kind == RuleKind::W2 || rule.kind == RuleKind::ZPlus ||
        rule.kind == RuleKind::ZBox) {
        // these rules assume positive incoming relevance; rather than guess a
        // meaning for negative relevance, reject it (tolerance covers rounding)
        double max_abs = 1.0;
        for (double v : upper_relevance.data()) max_abs = std::max(max_abs, std::abs(v));
        for (std::size_t j = 0; j < upper_relevance.size(); ++j)
            if (upper_relevance[j] < -1e-9 * max_abs)
                throw std::domain_error(rule.name() + ": incoming relevance " +
                                        std::to_string(j) + " = " +
                                        std::to_string(upper_relevance[j]) + " is negative");
    }
    switch (rule.kind) {
        case RuleKind::W2: return {propagate_w2(layer, upper_relevance), Tensor()};
        case RuleKind::Z: return {propagate_z(layer, x, upper_relevance), Tensor()};
        case RuleKind::ZPlus:
            return propagate_zplus(layer, x, upper_relevance, rule.absorb_positive_bias);
        case RuleKind::ZBox:
            return propagate_zbox(layer, x, upper_relevance, rule.lower, rule.upper,
                                  rule.absorb_positive_bias);
        case RuleKind::AlphaBeta:
            return propagate_alphabeta(layer, x, upper_relevance, rule.alpha, rule.beta);
        case RuleKind::Epsilon:
            return propagate_epsilon(layer, x, upper_relevance, rule.epsilon);
    }
    throw std::logic_error("apply_rule: unhandled rule kind");
}

RuleAssignment default_assignment(const Network& net) {
    RuleAssignment rules;
    const std::size_t n = net.detection_layer_count();
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0)
            rules.push_back(RelevanceRule::zbox(net.input_lower, net.input_upper));
        else
            rules.push_back(RelevanceRule::zplus());
    }
    return rules;
}

Heatmap deep_taylor(const Network& net, const ActivationTrace& trace,
                    const RuleAssignment& rules) {
    if (trace.values.size() != net.layers.size() + 1)
        throw ShapeError("deep_taylor: trace has " + std::to_string(trace.values.size()) +
                         " activation records for " + std::to_string(net.layers.size()) +
                         " layers");
    if (rules.size() != net.detection_layer_count())
        throw std::invalid_argument("deep_taylor: " + std::to_string(rules.size()) +
                                    " rules for " +
                                    std::to_string(net.detection_layer_count()) +
                                    " detection layers");

    Heatmap map;
    map.method = "deep-taylor";
    map.output_relevance = trace.output();
    Tensor r = trace.values.back();
    map.layer_sums.push_back(total_sum(r));

    std::size_t det_index = net.detection_layer_count();
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Tensor& in = trace.values[li];
        if (const auto* det = std::get_if<DetectionLayer>(&net.layers[li])) {
            --det_index;
            const RelevanceRule& rule = rules[det_index];
            LayerRelevance lr = apply_rule(*det, in, r, rule);
            r = std::move(lr.input);
            if (lr.bias.size() > 0) map.bias_absorbed += total_sum(lr.bias);
            map.consistency_guaranteed =
                map.consistency_guaranteed && rule.consistency_guaranteed();
        } else {
            r = redistribute_pool(std::get<PoolingLayer>(net.layers[li]), in, r);
        }
        map.layer_sums.push_back(total_sum(r));
    }
    for (const RelevanceRule& rule : rules) map.rule_names.push_back(rule.name());
    map.relevance = std::move(r);
    return map;
}

// ---- min-max relevance model -------------------------------------------

MinMaxModel minmax_init(std::size_t d_in, std::size_t n_det, std::size_t n_upper,
                        std::size_t group_size, double init_std, std::uint64_t seed) {
    if (group_size == 0 || n_det % group_size != 0)
        throw std::invalid_argument("minmax_init: group size " + std::to_string(group_size) +
                                    " does not divide " + std::to_string(n_det) +
                                    " detection units");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, init_std);
    MinMaxModel m;
    m.bottom_up = Tensor({d_in, n_det}, 0.0);
    m.top_down = Tensor({n_upper, n_det}, 0.0);
    m.bias = Tensor({n_det}, 0.0);
    for (auto& w : m.bottom_up.mutable_data()) w = init(rng);
    for (auto& w : m.top_down.mutable_data()) w = init(rng);
    m.group_size = group_size;
    return m;
}

namespace {

// a_j = min(0, sum_l R_l t_lj + d_j)
Tensor minmax_inhibitory_bias(const MinMaxModel& model, const Tensor& upper_relevance) {
    Tensor a = add(preactivations(model.top_down, upper_relevance), model.bias);
    return clamp_parts(a, ClampPart::Negative);
}

Tensor minmax_detections(const MinMaxModel& model, const Tensor& x, const Tensor& a) {
    Tensor pre = add(preactivations(model.bottom_up, x), a);
    return clamp_parts(pre, ClampPart::Positive);
}

Tensor group_sums(const Tensor& y, std::size_t group_size) {
    const std::size_t groups = y.size() / group_size;
    Tensor out({groups}, 0.0);
    for (std::size_t g = 0; g < groups; ++g)
        out[g] = kernels::active_ops().sum(y.raw() + g * group_size, group_size);
    return out;
}

}  // namespace

Tensor minmax_predict(const MinMaxModel& model, const Tensor& x, const Tensor& upper_relevance) {
    const Tensor a = minmax_inhibitory_bias(model, upper_relevance);
    const Tensor y = minmax_detections(model, x, a);
    return group_sums(y, model.group_size);
}

MinMaxTrainResult train_minmax(MinMaxModel& model, const std::vector<MinMaxSample>& samples,
                               const TrainConfig& cfg) {
    if (samples.empty()) throw std::invalid_argument("train_minmax: empty training set");
    const std::size_t d_in = model.input_size();
    const std::size_t n_det = model.detection_size();
    const std::size_t n_upper = model.top_down.extent(0);
    const std::size_t n_pooled = model.pooled_size();
    for (const auto& s : samples) {
        if (s.x.size() != d_in || s.upper_relevance.size() != n_upper ||
            s.true_relevance.size() != n_pooled)
            throw ShapeError("train_minmax: sample extents do not match the model");
    }

    auto eval_mse = [&](std::size_t limit) {
        double mse = 0.0;
        const std::size_t n = std::min(samples.size(), limit);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor pred = minmax_predict(model, samples[i].x, samples[i].upper_relevance);
            const Tensor e = sub(pred, samples[i].true_relevance);
            mse += total_sum_sq(e) / double(n_pooled);
        }
        return mse / double(n);
    };

    MinMaxTrainResult result;
    result.initial_mse = eval_mse(256);
    result.final_mse = result.initial_mse;
    if (cfg.iterations == 0) return result;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const std::size_t batch = cfg.minibatch_size;

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        Tensor X({batch, d_in}, 0.0);
        Tensor Rup({batch, n_upper}, 0.0);
        Tensor target({batch, n_pooled}, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const MinMaxSample& s = samples[pick(rng)];
            std::copy(s.x.data().begin(), s.x.data().end(), X.raw() + b * d_in);
            std::copy(s.upper_relevance.data().begin(), s.upper_relevance.data().end(),
                      Rup.raw() + b * n_upper);
            std::copy(s.true_relevance.data().begin(), s.true_relevance.data().end(),
                      target.raw() + b * n_pooled);
        }

        // forward
        Tensor a_pre = matmul(Rup, model.top_down);
        for (std::size_t b = 0; b < batch; ++b)
            kernels::active_ops().add(a_pre.raw() + b * n_det, model.bias.raw(),
                                      a_pre.raw() + b * n_det, n_det);
        const Tensor a = clamp_parts(a_pre, ClampPart::Negative);
        const Tensor pre = add(matmul(X, model.bottom_up), a);
        const Tensor y = clamp_parts(pre, ClampPart::Positive);

        // loss and delta on the detection units
        double loss = 0.0;
        Tensor masked({batch, n_det}, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < n_pooled; ++k) {
                double pred = 0.0;
                for (std::size_t j = 0; j < model.group_size; ++j)
                    pred += y[b * n_det + k * model.group_size + j];
                const double e = pred - target[b * n_pooled + k];
                loss += e * e;
                const double d = 2.0 * e / double(batch * n_pooled);
                for (std::size_t j = 0; j < model.group_size; ++j) {
                    const std::size_t idx = b * n_det + k * model.group_size + j;
                    if (y[idx] > 0.0) masked[idx] = d;
                }
            }
        }
        loss /= double(batch * n_pooled);
        if (!std::isfinite(loss))
            throw std::runtime_error(
                "train_minmax: loss diverged to a non-finite value at iteration " +
                std::to_string(it));

        // the inhibitory bias only passes gradient where it is active (< 0)
        Tensor masked_a(masked.shape(), 0.0);
        for (std::size_t i = 0; i < masked.size(); ++i)
            if (a_pre[i] < 0.0) masked_a[i] = masked[i];

        const Tensor grad_v = matmul(transpose(X), masked);
        const Tensor grad_t = matmul(transpose(Rup), masked_a);
        kernels::active_ops().axpy(-cfg.learning_rate, grad_v.raw(), model.bottom_up.raw(),
                                   grad_v.size());
        kernels::active_ops().axpy(-cfg.learning_rate, grad_t.raw(), model.top_down.raw(),
                                   grad_t.size());
        for (std::size_t j = 0; j < n_det; ++j) {
            double g = 0.0;
            for (std::size_t b = 0; b < batch; ++b) g += masked_a[b * n_det + j];
            model.bias[j] -= cfg.learning_rate * g;
        }
    }
    result.final_mse = eval_mse(256);
    return result;
}

Tensor minmax_decompose(const MinMaxModel& model, const Tensor& x,
                        const Tensor& upper_relevance, const RelevanceRule& rule) {
    if (rule.kind != RuleKind::W2 && rule.kind != RuleKind::ZPlus && rule.kind != RuleKind::ZBox)
        throw std::invalid_argument(
            "minmax_decompose: rule must be one of w2, zplus, zbox; got " + rule.name());
    // the relevance model is itself a rectified detection layer whose units
    // carry their own activation as relevance
    DetectionLayer effective;
    effective.weights = model.bottom_up;
    effective.biases = minmax_inhibitory_bias(model, upper_relevance);
    const Tensor y = minmax_detections(model, x, effective.biases);
    return apply_rule(effective, x, y, rule).input;
}

ModelArchive minmax_to_archive(const MinMaxModel& model) {
    ModelArchive a;
    a.strings["kind"] = "minmax";
    a.tensors["bottom_up"] = model.bottom_up;
    a.tensors["top_down"] = model.top_down;
    a.tensors["bias"] = model.bias;
    a.ints["group_size"] = std::int64_t(model.group_size);
    return a;
}

MinMaxModel minmax_from_archive(const ModelArchive& archive) {
    if (auto it = archive.strings.find("kind");
        it == archive.strings.end() || it->second != "minmax")
        throw IoError("archive does not hold a min-max relevance model");
    MinMaxModel m;
    m.bottom_up = archive.tensors.at("bottom_up");
    m.top_down = archive.tensors.at("top_down");
    m.bias = archive.tensors.at("bias");
    m.group_size = std::size_t(archive.ints.at("group_size"));
    if (m.group_size == 0 || m.detection_size() % m.group_size != 0)
        throw IoError("min-max archive: group size does not divide the detection extent");
    return m;
}

}  // namespace dtd
