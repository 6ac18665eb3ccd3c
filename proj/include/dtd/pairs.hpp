#pragma once

#include <cstdint>
#include <vector>

#include "dtd/idx.hpp"
#include "dtd/tensor.hpp"

// Synthesis of the paired-digit detection task: a 28x56 canvas with a target
// digit (class 0-3) next to a distractor (class 4-9), or two distractors for
// negative samples. Pixels are remapped affinely from [0,1] to [-0.5,+1.5].

namespace dtd {

inline constexpr double pixel_low = -0.5;
inline constexpr double pixel_high = 1.5;
inline constexpr double target_present = 100.0;
inline constexpr double target_absent = 0.0;

struct PairedSample {
    Tensor image;  // [28 x 56], values in [pixel_low, pixel_high]
    double target = 0.0;
    int left_label = -1;
    int right_label = -1;
    int left_dr = 0, left_dc = 0;    // translation offsets applied
    int right_dr = 0, right_dc = 0;
};

struct PairConfig {
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    bool translate = false;
    int translate_range = 2;  // uniform offsets in [-range, +range] per axis
};

// Deterministic under a fixed seed. 50% of samples are positive (one digit
// from 0-3, one distractor from 4-9), 50% negative (two distractors of
// different classes). Throws std::invalid_argument if the dataset is missing
// a needed class group.
std::vector<PairedSample> synthesize_pairs(const IdxDataset& dataset, const PairConfig& config);

// The affine remap applied to canvas pixels: x -> 2x - 0.5.
inline double remap_pixel(double raw01) { return 2.0 * raw01 - 0.5; }

}  // namespace dtd
