#include "dtd/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "dtd/idx.hpp"

namespace dtd {

void write_pgm(const Tensor& image, const std::string& path) {
    if (image.rank() != 2)
        throw ShapeError("write_pgm: expected a rank-2 image, got " +
                         shape_to_string(image.shape()));
    double lo = image[0], hi = image[0];
    for (double v : image.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open for writing");
    f << "P5\n" << image.extent(1) << ' ' << image.extent(0) << "\n255\n";
    for (double v : image.data()) {
        const double scaled = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
        f.put(char(std::uint8_t(std::lround(scaled))));
    }
    if (!f) throw IoError(path + ": write failed");

    std::ofstream side(path + ".scale.txt");
    if (!side) throw IoError(path + ".scale.txt: cannot open for writing");
    side.precision(17);
    side << "min " << lo << "\nmax " << hi << "\n";
    if (!side) throw IoError(path + ".scale.txt: write failed");
}

void write_csv(const Tensor& image, const std::string& path) {
    if (image.rank() != 2)
        throw ShapeError("write_csv: expected a rank-2 image, got " +
                         shape_to_string(image.shape()));
    std::ofstream f(path);
    if (!f) throw IoError(path + ": cannot open for writing");
    f.precision(17);
    for (std::size_t r = 0; r < image.extent(0); ++r) {
        for (std::size_t c = 0; c < image.extent(1); ++c) {
            if (c > 0) f << ',';
            f << image.at(r, c);
        }
        f << '\n';
    }
    if (!f) throw IoError(path + ": write failed");
}

PgmImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open");
    std::string magic;
    f >> magic;
    if (magic != "P5") throw IoError(path + ": not a binary PGM (magic '" + magic + "')");
    std::size_t cols = 0, rows = 0, maxval = 0;
    f >> cols >> rows >> maxval;
    if (!f || maxval != 255)
        throw IoError(path + ": unsupported PGM header (need maxval 255)");
    f.get();  // single whitespace byte after the header
    PgmImage img;
    img.rows = rows;
    img.cols = cols;
    img.pixels.resize(rows * cols);
    f.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (std::size_t(f.gcount()) != img.pixels.size())
        throw IoError(path + ": truncated pixel data");
    return img;
}

Tensor reconstruct_from_pgm(const std::string& path) {
    const PgmImage img = read_pgm(path);
    std::ifstream side(path + ".scale.txt");
    if (!side) throw IoError(path + ".scale.txt: cannot open");
    std::string key;
    double lo = 0.0, hi = 0.0;
    side >> key >> lo >> key >> hi;
    if (!side) throw IoError(path + ".scale.txt: malformed sidecar");

    Tensor out({img.rows, img.cols}, 0.0);
    const double span = hi - lo;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        out[i] = lo + double(img.pixels[i]) / 255.0 * span;
    return out;
}

}  // namespace dtd
