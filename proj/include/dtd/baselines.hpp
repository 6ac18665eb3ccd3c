#pragma once

#include <cstddef>
#include <optional>

#include "dtd/network.hpp"
#include "dtd/relevance.hpp"
#include "dtd/tensor.hpp"

// Comparison heatmappers: sensitivity analysis, standard Taylor decomposition
// at an iteratively searched nearest root, and the layer-wise relevance
// propagation (LRP) alpha-beta / epsilon rules. All of them return the same
// Heatmap type as the deep Taylor engine so the diagnostics apply uniformly.

namespace dtd {

enum class SensitivityMode { Raw, Rescaled };

// Raw: R_p = delta * (df/dx_p)^2 with delta = step_length / |grad f|, i.e. the
// relevance of moving `step_length` along the gradient direction; its total is
// step_length * |grad f|, not f(x). Rescaled: normalized so the total equals
// f(x) for display comparability.
Heatmap sensitivity_heatmap(const Network& net, const Tensor& x,
                            SensitivityMode mode = SensitivityMode::Raw,
                            double step_length = 0.1);

struct RootSearchConfig {
    double step_size = 1e-3;
    std::size_t max_iterations = 2000;
    double stop_ratio = 0.1;          // stop once f(root) < stop_ratio * f(x)
    double penalty_weight = 1.0;      // initial weight on f(root)^2
    double penalty_growth = 2.0;      // multiplied in every `penalty_period` steps
    std::size_t penalty_period = 50;
    std::optional<Tensor> box_lower;  // project the iterate into [l, h] if given
    std::optional<Tensor> box_upper;
};

// Taylor decomposition at the nearest root: minimizes |root - x|^2 with a
// growing penalty on f(root)^2, then R_p = df/dx_p|_root * (x_p - root_p).
// A search that never reaches the stop ratio still returns its heatmap,
// flagged unconverged. info carries "root_value" and "iterations".
Heatmap nearest_root_taylor(const Network& net, const Tensor& x, const RootSearchConfig& cfg);

// One-layer LRP rules (full-network passes go through deep_taylor with the
// corresponding RelevanceRule).
Tensor lrp_alphabeta(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance,
                     double alpha, double beta);
Tensor lrp_epsilon(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance,
                   double epsilon);

// Runs deep_taylor with the same rule on every detection layer (used for the
// LRP comparison variants where no per-layer assignment applies).
Heatmap uniform_rule_heatmap(const Network& net, const Tensor& x, const RelevanceRule& rule);

}  // namespace dtd
