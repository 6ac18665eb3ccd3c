#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dtd/relevance.hpp"
#include "dtd/tensor.hpp"

// Quantitative evaluation of heatmappers: conservation scatter data, signed
// relevance histograms and the conservative / positive / consistent verdicts.

namespace dtd {

using Heatmapper = std::function<Heatmap(const Tensor&)>;

struct Tolerances {
    double conservation_rel = 1e-6;  // |sum R - f| / max(f, 1e-9)
    double positivity_abs = 1e-9;    // R_p >= -positivity_abs everywhere
};

struct SampleRecord {
    double f = 0.0;       // network output
    double sum_r = 0.0;   // total pixel relevance
    double rel_error = 0.0;
    double min_r = 0.0;
    bool failed = false;  // heatmapper threw; message holds the reason
    std::string message;
};

struct ConsistencyReport {
    std::string method;
    std::vector<SampleRecord> records;
    std::size_t failures = 0;

    double mean_rel_error = 0.0;
    double max_rel_error = 0.0;
    // |sum of negative relevances| / sum of |relevances|, over all samples
    double negative_mass_fraction = 0.0;
    // max gap between consecutive layer_sums entries, per boundary
    std::vector<double> per_layer_max_gap;

    bool conservative = false;
    bool positive = false;
    bool consistent = false;  // == conservative && positive

    Tolerances tolerances;
    // every relevance value seen, kept for histogram export
    std::vector<double> relevance_values;
};

// Runs the heatmapper on every sample. A sample with f(x) = 0 is checked for
// an all-zero heatmap instead of a relative error. Heatmapper exceptions are
// recorded per sample, not fatal.
ConsistencyReport evaluate(const Heatmapper& heatmapper, const std::vector<Tensor>& samples,
                           const Tolerances& tolerances = {});

// CSV with rows (f_x, sum_R), one per non-failed sample.
void export_scatter(const ConsistencyReport& report, const std::string& path);

// CSV with rows (bin_low, bin_high, count_positive, count_negative); `bins`
// uniform bins over a range symmetric around 0.
void export_histogram(const ConsistencyReport& report, const std::string& path,
                      std::size_t bins = 100);

// One verdict line, used by the comparison table.
std::string verdict_line(const ConsistencyReport& report);

}  // namespace dtd
