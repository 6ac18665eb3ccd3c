#include "dtd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtd {

Heatmap sensitivity_heatmap(const Network& net, const Tensor& x, SensitivityMode mode,
                            double step_length) {
    if (step_length <= 0.0)
        throw std::invalid_argument("sensitivity_heatmap: step length must be positive");
    const double fx = forward(net, x, BoundsPolicy::Ignore).output();
    const Tensor g = gradient(net, x);

    Heatmap map;
    map.method = mode == SensitivityMode::Raw ? "sensitivity" : "sensitivity-rescaled";
    map.output_relevance = fx;
    map.consistency_guaranteed = false;
    map.rule_names.assign(net.detection_layer_count(), "gradient");

    Tensor r = mul(g, g);
    const double norm_sq = total_sum(r);
    if (mode == SensitivityMode::Raw) {
        // delta = step / |grad|; a dead region (zero gradient) stays all-zero
        const double delta = norm_sq > 0.0 ? step_length / std::sqrt(norm_sq) : 0.0;
        r = scale(r, delta);
    } else {
        const double total = norm_sq;
        r = total > 0.0 ? scale(r, fx / total) : Tensor(r.shape(), 0.0);
    }
    map.layer_sums = {fx, total_sum(r)};
    map.info["gradient_norm"] = std::sqrt(norm_sq);
    map.relevance = std::move(r);
    return map;
}

Heatmap nearest_root_taylor(const Network& net, const Tensor& x, const RootSearchConfig& cfg) {
    if (cfg.stop_ratio <= 0.0 || cfg.stop_ratio >= 1.0)
        throw std::invalid_argument("nearest_root_taylor: stop ratio must be in (0, 1)");
    if (cfg.max_iterations == 0)
        throw std::invalid_argument("nearest_root_taylor: max iterations must be positive");
    if (cfg.box_lower.has_value() != cfg.box_upper.has_value())
        throw std::invalid_argument("nearest_root_taylor: box needs both bounds");
    if (cfg.box_lower &&
        (cfg.box_lower->size() != x.size() || cfg.box_upper->size() != x.size()))
        throw ShapeError("nearest_root_taylor: box bounds must match the input extent");

    const double fx = forward(net, x, BoundsPolicy::Ignore).output();

    Heatmap map;
    map.method = "nearest-root-taylor";
    map.output_relevance = fx;
    map.consistency_guaranteed = false;
    map.rule_names.assign(net.detection_layer_count(), "taylor");

    if (fx <= 0.0) {  // x is already a root; the expansion point is x itself
        map.relevance = Tensor(x.shape(), 0.0);
        map.layer_sums = {fx, 0.0};
        map.info["root_value"] = fx;
        map.info["iterations"] = 0.0;
        return map;
    }

    Tensor root = x;
    Tensor prev = x;
    const double target = cfg.stop_ratio * fx;
    double penalty = cfg.penalty_weight;
    double f_root = fx;
    std::size_t it = 0;
    bool converged = false;
    for (; it < cfg.max_iterations; ++it) {
        f_root = forward(net, root, BoundsPolicy::Ignore).output();
        if (f_root < target) {
            converged = true;
            break;
        }
        prev = root;
        if (it > 0 && it % cfg.penalty_period == 0) penalty *= cfg.penalty_growth;
        // objective |root - x|^2 + penalty * f(root)^2
        const Tensor g = gradient(net, root);
        for (std::size_t i = 0; i < root.size(); ++i) {
            const double step = 2.0 * (root[i] - x[i]) + penalty * 2.0 * f_root * g[i];
            root[i] -= cfg.step_size * step;
            if (cfg.box_lower)
                root[i] = std::clamp(root[i], (*cfg.box_lower)[i], (*cfg.box_upper)[i]);
        }
    }
    if (converged && f_root <= 0.0) {
        // the descent overshot into the zero region where the gradient (and
        // hence the Taylor term) vanishes; bisect back toward the last
        // positive iterate for an expansion point just inside (0, target)
        Tensor lo = root, hi = prev;  // f(lo) <= 0 < target <= f(hi)
        for (int step = 0; step < 100 && (f_root <= 0.0 || f_root >= target); ++step) {
            Tensor mid(root.shape(), 0.0);
            for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
            const double f_mid = forward(net, mid, BoundsPolicy::Ignore).output();
            if (f_mid < target && f_mid > 0.0) {
                root = mid;
                f_root = f_mid;
                break;
            }
            (f_mid <= 0.0 ? lo : hi) = mid;
            root = mid;
            f_root = f_mid;
        }
        if (f_root <= 0.0) {  // band never hit (e.g. a jump across the kink)
            root = hi;
            f_root = forward(net, root, BoundsPolicy::Ignore).output();
            converged = f_root < target;
        }
    }

    const Tensor g = gradient(net, root);
    Tensor r = mul(g, sub(x, root));
    map.layer_sums = {fx, total_sum(r)};
    map.converged = converged;
    map.info["root_value"] = f_root;
    map.info["iterations"] = double(it);
    map.relevance = std::move(r);
    return map;
}

Tensor lrp_alphabeta(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance,
                     double alpha, double beta) {
    return apply_rule(layer, x, upper_relevance, RelevanceRule::alphabeta(alpha, beta)).input;
}

Tensor lrp_epsilon(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance,
                   double epsilon) {
    return apply_rule(layer, x, upper_relevance, RelevanceRule::eps(epsilon)).input;
}

Heatmap uniform_rule_heatmap(const Network& net, const Tensor& x, const RelevanceRule& rule) {
    const ActivationTrace trace = forward(net, x, BoundsPolicy::Ignore);
    RuleAssignment rules(net.detection_layer_count(), rule);
    Heatmap map = deep_taylor(net, trace, rules);
    map.method = rule.name();
    return map;
}

}  // namespace dtd
