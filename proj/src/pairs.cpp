#include "dtd/pairs.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace dtd {

namespace {

// Stamps a 28x28 digit (raw [0,1] values) into the canvas half starting at
// column col0, shifted by (dr,dc) and clipped at the canvas edge.
void stamp(Tensor& canvas, const Tensor& images, std::size_t index, std::size_t col0,
           int dr, int dc) {
    const std::size_t rows = images.extent(1), cols = images.extent(2);
    const std::size_t base = index * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
        const int rr = int(r) + dr;
        if (rr < 0 || rr >= int(canvas.extent(0))) continue;
        for (std::size_t c = 0; c < cols; ++c) {
            const int cc = int(col0 + c) + dc;
            if (cc < 0 || cc >= int(canvas.extent(1))) continue;  // clip at canvas edge
            const double raw = images[base + r * cols + c];
            double& px = canvas[std::size_t(rr) * canvas.extent(1) + std::size_t(cc)];
            px = std::max(px, remap_pixel(raw));
        }
    }
}

}  // namespace

std::vector<PairedSample> synthesize_pairs(const IdxDataset& dataset, const PairConfig& config) {
    std::vector<std::size_t> low_group, high_group;  // classes 0-3 / 4-9
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        if (dataset.labels[i] <= 3)
            low_group.push_back(i);
        else
            high_group.push_back(i);
    }
    if (low_group.empty())
        throw std::invalid_argument("synthesize_pairs: dataset has no digits of class 0-3");
    if (high_group.size() < 2)
        throw std::invalid_argument("synthesize_pairs: dataset needs at least two digits of class 4-9");

    const std::size_t rows = dataset.rows(), cols = dataset.cols();
    std::vector<PairedSample> out;
    out.reserve(config.count);

    std::mt19937_64 master(config.seed);
    for (std::size_t s = 0; s < config.count; ++s) {
        // per-sample derived seed keeps synthesis order-independent
        std::mt19937_64 rng(master());
        std::uniform_int_distribution<std::size_t> pick_low(0, low_group.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_high(0, high_group.size() - 1);
        std::uniform_int_distribution<int> coin(0, 1);
        std::uniform_int_distribution<int> offset(-config.translate_range, config.translate_range);

        const bool positive = (s % 2 == 0);  // 50/50 class balance
        std::size_t first, second;
        if (positive) {
            first = low_group[pick_low(rng)];
            second = high_group[pick_high(rng)];
        } else {
            first = high_group[pick_high(rng)];
            do {
                second = high_group[pick_high(rng)];
            } while (dataset.labels[second] == dataset.labels[first]);
        }
        if (coin(rng)) std::swap(first, second);

        PairedSample sample;
        sample.image = Tensor({rows, 2 * cols}, pixel_low);
        sample.target = positive ? target_present : target_absent;
        sample.left_label = dataset.labels[first];
        sample.right_label = dataset.labels[second];
        if (config.translate) {
            sample.left_dr = offset(rng);
            sample.left_dc = offset(rng);
            sample.right_dr = offset(rng);
            sample.right_dc = offset(rng);
        }
        stamp(sample.image, dataset.images, first, 0, sample.left_dr, sample.left_dc);
        stamp(sample.image, dataset.images, second, cols, sample.right_dr, sample.right_dc);
        out.push_back(std::move(sample));
    }
    return out;
}

}  // namespace dtd
