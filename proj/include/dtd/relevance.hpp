#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtd/network.hpp"
#include "dtd/tensor.hpp"

// Relevance propagation engine: proportional pooling redistribution, the
// root-point rules in matrix form (w2, z, z+, zB), the LRP comparison rules
// (alpha-beta, epsilon), the trainable min-max relevance model and the
// training-free decomposition driver.

namespace dtd {

enum class RuleKind { W2, Z, ZPlus, ZBox, AlphaBeta, Epsilon };

struct RelevanceRule {
    RuleKind kind = RuleKind::ZPlus;
    Tensor lower, upper;     // ZBox box (l <= 0 <= h element-wise)
    double alpha = 1.0;      // AlphaBeta: alpha - beta == 1
    double beta = 0.0;
    double epsilon = 1.0;    // Epsilon: > 0
    bool absorb_positive_bias = false;  // add max(0,b_j) to z+/zB denominators

    std::string name() const;
    // Whether layer-wise conservation+positivity is guaranteed by this rule.
    bool consistency_guaranteed() const;

    static RelevanceRule w2();
    static RelevanceRule z();
    static RelevanceRule zplus(bool absorb = false);
    static RelevanceRule zbox(Tensor lower, Tensor upper, bool absorb = false);
    static RelevanceRule alphabeta(double alpha, double beta);
    static RelevanceRule eps(double epsilon);
};

// One rule per detection layer, ordered input-to-output.
using RuleAssignment = std::vector<RelevanceRule>;

// Result of propagating through one detection layer. `bias` carries the
// relevance absorbed by positive bias neurons (empty unless absorption on).
struct LayerRelevance {
    Tensor input;
    Tensor bias;
};

struct Heatmap {
    Tensor relevance;             // same shape as the network input
    double output_relevance = 0;  // R_f = f(x)
    std::vector<std::string> rule_names;  // per detection layer
    // relevance total at every layer boundary, output first (audit trail)
    std::vector<double> layer_sums;
    bool consistency_guaranteed = true;
    bool converged = true;        // used by iterative baselines
    std::string method;
    double bias_absorbed = 0.0;   // relevance routed to bias neurons
    std::map<std::string, double> info;  // method-specific metadata
};

// Pooling-layer redistribution R_j = x_j / sum(x_j') * R_k per group.
// Dead groups (sum 0) receive zero.
Tensor redistribute_pool(const PoolingLayer& pool, const Tensor& detections,
                         const Tensor& pooled_relevance);

Tensor propagate_w2(const DetectionLayer& layer, const Tensor& upper_relevance);
Tensor propagate_z(const DetectionLayer& layer, const Tensor& x, const Tensor& upper_relevance);
LayerRelevance propagate_zplus(const DetectionLayer& layer, const Tensor& x,
                               const Tensor& upper_relevance, bool absorb_positive_bias = false);
LayerRelevance propagate_zbox(const DetectionLayer& layer, const Tensor& x,
                              const Tensor& upper_relevance, const Tensor& lower,
                              const Tensor& upper, bool absorb_positive_bias = false);

// Dispatch on rule kind; validates the rule's domain against x.
LayerRelevance apply_rule(const DetectionLayer& layer, const Tensor& x,
                          const Tensor& upper_relevance, const RelevanceRule& rule);

// Full backward pass from R_f = f(x) down to the input.
Heatmap deep_taylor(const Network& net, const ActivationTrace& trace,
                    const RuleAssignment& rules);

// Default assignment: zB with the network's pixel bounds on the first
// detection layer, z+ on all higher detection layers.
RuleAssignment default_assignment(const Network& net);

// ---- min-max relevance model -------------------------------------------

// Surrogate for one detection+pooling block: y_j = max(0, sum_i x_i v_ij + a_j)
// with inhibitory bias a_j = min(0, sum_l R_l t_lj + d_j) driven by upper-layer
// relevances; predicted pooled relevance is the group sum of y_j.
struct MinMaxModel {
    Tensor bottom_up;   // v_ij  [d_in x n_det]
    Tensor top_down;    // t_lj  [n_upper x n_det]
    Tensor bias;        // d_j   [n_det]
    std::size_t group_size = 1;

    std::size_t input_size() const { return bottom_up.extent(0); }
    std::size_t detection_size() const { return bottom_up.extent(1); }
    std::size_t pooled_size() const { return detection_size() / group_size; }
};

struct MinMaxSample {
    Tensor x;                // lower-layer activations [d_in]
    Tensor upper_relevance;  // R_l [n_upper]
    Tensor true_relevance;   // R_k [n_pooled]
};

MinMaxModel minmax_init(std::size_t d_in, std::size_t n_det, std::size_t n_upper,
                        std::size_t group_size, double init_std, std::uint64_t seed);

struct MinMaxTrainResult {
    double initial_mse = 0.0;
    double final_mse = 0.0;
};

MinMaxTrainResult train_minmax(MinMaxModel& model, const std::vector<MinMaxSample>& samples,
                               const TrainConfig& cfg);

// Predicted pooled relevances R^_k for one sample.
Tensor minmax_predict(const MinMaxModel& model, const Tensor& x, const Tensor& upper_relevance);

// Decomposes the model's predicted relevance onto the inputs with the chosen
// rule (W2, ZPlus or ZBox).
Tensor minmax_decompose(const MinMaxModel& model, const Tensor& x,
                        const Tensor& upper_relevance, const RelevanceRule& rule);

ModelArchive minmax_to_archive(const MinMaxModel& model);
MinMaxModel minmax_from_archive(const ModelArchive& archive);

}  // namespace dtd
