#include "dtd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dtd/idx.hpp"

namespace dtd {

ConsistencyReport evaluate(const Heatmapper& heatmapper, const std::vector<Tensor>& samples,
                           const Tolerances& tolerances) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples given");

    ConsistencyReport report;
    report.tolerances = tolerances;
    double neg_mass = 0.0, abs_mass = 0.0;
    double err_total = 0.0;
    std::size_t err_count = 0;
    double min_r_overall = 0.0;
    bool zero_sample_violation = false;

    for (const Tensor& x : samples) {
        SampleRecord rec;
        Heatmap map;
        try {
            map = heatmapper(x);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.message = e.what();
            ++report.failures;
            report.records.push_back(std::move(rec));
            continue;
        }
        if (report.method.empty()) report.method = map.method;

        rec.f = map.output_relevance;
        rec.sum_r = total_sum(map.relevance);
        double min_r = 0.0, max_abs = 0.0;
        for (double v : map.relevance.data()) {
            min_r = std::min(min_r, v);
            max_abs = std::max(max_abs, std::abs(v));
            if (v < 0.0) neg_mass -= v;
            abs_mass += std::abs(v);
            report.relevance_values.push_back(v);
        }
        rec.min_r = min_r;
        min_r_overall = std::min(min_r_overall, min_r);

        if (rec.f == 0.0) {
            // Definition of consistency implies f(x) = 0 => zero heatmap
            rec.rel_error = 0.0;
            if (max_abs > tolerances.positivity_abs) zero_sample_violation = true;
        } else {
            rec.rel_error = std::abs(rec.sum_r - rec.f) / std::max(rec.f, 1e-9);
            err_total += rec.rel_error;
            ++err_count;
            report.max_rel_error = std::max(report.max_rel_error, rec.rel_error);
        }

        // audit trail: gap between consecutive layer boundaries
        if (map.layer_sums.size() >= 2) {
            if (report.per_layer_max_gap.size() < map.layer_sums.size() - 1)
                report.per_layer_max_gap.resize(map.layer_sums.size() - 1, 0.0);
            for (std::size_t i = 0; i + 1 < map.layer_sums.size(); ++i) {
                const double gap = std::abs(map.layer_sums[i + 1] - map.layer_sums[i]);
                report.per_layer_max_gap[i] = std::max(report.per_layer_max_gap[i], gap);
            }
        }
        report.records.push_back(std::move(rec));
    }

    if (report.failures == report.records.size())
        throw std::runtime_error("evaluate: heatmapper failed on every sample (first: " +
                                 report.records.front().message + ")");

    report.mean_rel_error = err_count > 0 ? err_total / double(err_count) : 0.0;
    report.negative_mass_fraction = abs_mass > 0.0 ? neg_mass / abs_mass : 0.0;
    report.conservative = report.max_rel_error <= tolerances.conservation_rel &&
                          !zero_sample_violation && report.failures == 0;
    report.positive = min_r_overall >= -tolerances.positivity_abs && report.failures == 0;
    report.consistent = report.conservative && report.positive;
    return report;
}

void export_scatter(const ConsistencyReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError(path + ": cannot open for writing");
    f << "f_x,sum_R\n";
    f.precision(17);
    for (const SampleRecord& rec : report.records) {
        if (rec.failed) continue;
        f << rec.f << ',' << rec.sum_r << '\n';
    }
    if (!f) throw IoError(path + ": write failed");
}

void export_histogram(const ConsistencyReport& report, const std::string& path,
                      std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("export_histogram: need at least one bin");
    std::ofstream f(path);
    if (!f) throw IoError(path + ": cannot open for writing");
    f << "bin_low,bin_high,count_positive,count_negative\n";
    f.precision(17);

    if (!report.relevance_values.empty()) {
        double range = 0.0;
        for (double v : report.relevance_values) range = std::max(range, std::abs(v));
        if (range == 0.0) range = 1.0;  // all-zero relevances: one degenerate layout
        const double lo = -range, width = 2.0 * range / double(bins);
        std::vector<std::size_t> pos(bins, 0), neg(bins, 0);
        for (double v : report.relevance_values) {
            auto b = std::size_t((v - lo) / width);
            if (b >= bins) b = bins - 1;
            (v >= 0.0 ? pos : neg)[b]++;
        }
        for (std::size_t b = 0; b < bins; ++b)
            f << lo + double(b) * width << ',' << lo + double(b + 1) * width << ',' << pos[b]
              << ',' << neg[b] << '\n';
    }
    if (!f) throw IoError(path + ": write failed");
}

std::string verdict_line(const ConsistencyReport& report) {
    std::ostringstream out;
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    out << report.method << ": conservative=" << yn(report.conservative)
        << " positive=" << yn(report.positive) << " consistent=" << yn(report.consistent)
        << " mean_rel_err=" << report.mean_rel_error << " max_rel_err=" << report.max_rel_error
        << " neg_mass=" << report.negative_mass_fraction;
    if (report.failures > 0) out << " failures=" << report.failures;
    return out.str();
}

}  // namespace dtd
