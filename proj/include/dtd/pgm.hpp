#pragma once

#include <string>

#include "dtd/tensor.hpp"

// Binary PGM (P5) export for heatmaps and inputs. Values are min-max scaled
// to 0..255; the scaling is recorded in a sidecar text file so the raw values
// can be reconstructed up to 8-bit quantization. A CSV twin keeps the exact
// values. Layouts are documented in docs/formats.md.

namespace dtd {

// image must be rank 2 [rows x cols]. Writes `path`, `path + ".scale.txt"`.
void write_pgm(const Tensor& image, const std::string& path);

// one CSV row per image row, full double precision
void write_csv(const Tensor& image, const std::string& path);

struct PgmImage {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;
};

PgmImage read_pgm(const std::string& path);

// Reconstructs approximate raw values from a PGM plus its sidecar.
Tensor reconstruct_from_pgm(const std::string& path);

}  // namespace dtd
