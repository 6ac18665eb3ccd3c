#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtd/tensor.hpp"

// Ingestion of IDX-format datasets (the big-endian binary container used by
// the MNIST files), plus a procedural glyph generator usable as a stand-in
// when the real files are not on disk.

namespace dtd {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IdxDataset {
    Tensor images;            // [n x rows x cols], values in [0,1]
    std::vector<int> labels;  // n entries, 0..9

    std::size_t count() const { return labels.size(); }
    std::size_t rows() const { return images.extent(1); }
    std::size_t cols() const { return images.extent(2); }
};

inline constexpr std::uint32_t idx_image_magic = 0x00000803;
inline constexpr std::uint32_t idx_label_magic = 0x00000801;

// Parses an image/label IDX pair. Raw bytes are scaled by 1/255 into [0,1].
// Throws IoError naming the file and byte offset on bad magic, truncation,
// or an image/label count mismatch.
IdxDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as an IDX pair (bytes are values * 255 rounded).
void save_idx(const IdxDataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Deterministic 28x28 digit-like glyphs (seven-segment style strokes with
// mild per-sample jitter), n_per_class images for each of the 10 classes.
// A stand-in for the MNIST files when those are not available.
IdxDataset synthetic_digits(std::size_t n_per_class, std::uint64_t seed);

}  // namespace dtd
