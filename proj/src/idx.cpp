#include "dtd/idx.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace dtd {

namespace {

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    if (!f.read(reinterpret_cast<char*>(buf), 4))
        throw IoError(path + ": truncated at offset " + std::to_string(offset) +
                      " (expected 4 more bytes)");
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ofstream& f, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

IdxDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw IoError(images_path + ": cannot open");
    const std::uint32_t im_magic = read_u32_be(imf, images_path, 0);
    if (im_magic != idx_image_magic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", im_magic);
        throw IoError(images_path + ": bad magic " + hex + " at offset 0 (expected 0x00000803)");
    }
    const std::uint32_t n = read_u32_be(imf, images_path, 4);
    const std::uint32_t rows = read_u32_be(imf, images_path, 8);
    const std::uint32_t cols = read_u32_be(imf, images_path, 12);

    const std::size_t pixel_count = std::size_t(n) * rows * cols;
    std::vector<unsigned char> bytes(pixel_count);
    if (!imf.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(pixel_count)))
        throw IoError(images_path + ": truncated pixel data, declared " +
                      std::to_string(pixel_count) + " bytes from offset 16");
    // declared extents must agree with the byte length exactly
    imf.peek();
    if (!imf.eof())
        throw IoError(images_path + ": trailing bytes beyond declared extents " +
                      std::to_string(n) + "x" + std::to_string(rows) + "x" + std::to_string(cols));

    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw IoError(labels_path + ": cannot open");
    const std::uint32_t lb_magic = read_u32_be(lbf, labels_path, 0);
    if (lb_magic != idx_label_magic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", lb_magic);
        throw IoError(labels_path + ": bad magic " + hex + " at offset 0 (expected 0x00000801)");
    }
    const std::uint32_t n_labels = read_u32_be(lbf, labels_path, 4);
    if (n_labels != n)
        throw IoError(labels_path + ": label count " + std::to_string(n_labels) +
                      " does not match image count " + std::to_string(n) + " in " + images_path);
    std::vector<unsigned char> raw_labels(n_labels);
    if (!lbf.read(reinterpret_cast<char*>(raw_labels.data()), std::streamsize(n_labels)))
        throw IoError(labels_path + ": truncated label data from offset 8");

    IdxDataset ds;
    ds.images = Tensor({n, rows, cols}, 0.0);
    for (std::size_t i = 0; i < pixel_count; ++i) ds.images[i] = bytes[i] / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    return ds;
}

void save_idx(const IdxDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    std::ofstream imf(images_path, std::ios::binary);
    if (!imf) throw IoError(images_path + ": cannot open for writing");
    write_u32_be(imf, idx_image_magic);
    write_u32_be(imf, std::uint32_t(ds.count()));
    write_u32_be(imf, std::uint32_t(ds.rows()));
    write_u32_be(imf, std::uint32_t(ds.cols()));
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, ds.images[i]));
        const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        imf.write(reinterpret_cast<const char*>(&b), 1);
    }

    std::ofstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw IoError(labels_path + ": cannot open for writing");
    write_u32_be(lbf, idx_label_magic);
    write_u32_be(lbf, std::uint32_t(ds.count()));
    for (int label : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(label);
        lbf.write(reinterpret_cast<const char*>(&b), 1);
    }
}

namespace {

// Seven-segment layout on a 28x28 canvas. Segments: 0 top, 1 top-left,
// 2 top-right, 3 middle, 4 bottom-left, 5 bottom-right, 6 bottom.
constexpr unsigned char glyph_segments[10] = {
    0b1110111,  // 0
    0b0100100,  // 1
    0b1011101,  // 2
    0b1101101,  // 3
    0b0101110,  // 4
    0b1101011,  // 5
    0b1111011,  // 6
    0b0100101,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

void draw_box(Tensor& img, std::size_t base, int r0, int c0, int r1, int c1, double v) {
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (r >= 0 && r < 28 && c >= 0 && c < 28)
                img[base + std::size_t(r) * 28 + std::size_t(c)] = v;
}

}  // namespace

IdxDataset synthetic_digits(std::size_t n_per_class, std::uint64_t seed) {
    const std::size_t n = n_per_class * 10;
    IdxDataset ds;
    ds.images = Tensor({n, 28, 28}, 0.0);
    ds.labels.resize(n);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> jitter(-1, 1);
    std::uniform_real_distribution<double> intensity(0.75, 1.0);

    std::size_t idx = 0;
    for (std::size_t rep = 0; rep < n_per_class; ++rep) {
        for (int digit = 0; digit <= 9; ++digit, ++idx) {
            ds.labels[idx] = digit;
            const std::size_t base = idx * 28 * 28;
            const unsigned char segs = glyph_segments[digit];
            const int dr = jitter(rng), dc = jitter(rng);
            const double v = intensity(rng);
            const int t = 4, c0 = 6 + dc, c1 = 21 + dc;
            const int r_top = 3 + dr, r_mid = 12 + dr, r_bot = 21 + dr;
            if (segs & 0b0000001) draw_box(ds.images, base, r_top, c0, r_top + t - 1, c1, v);
            if (segs & 0b0000010) draw_box(ds.images, base, r_top, c0, r_mid + t - 1, c0 + t - 1, v);
            if (segs & 0b0000100) draw_box(ds.images, base, r_top, c1 - t + 1, r_mid + t - 1, c1, v);
            if (segs & 0b0001000) draw_box(ds.images, base, r_mid, c0, r_mid + t - 1, c1, v);
            if (segs & 0b0010000) draw_box(ds.images, base, r_mid, c0, r_bot + t - 1, c0 + t - 1, v);
            if (segs & 0b0100000) draw_box(ds.images, base, r_mid, c1 - t + 1, r_bot + t - 1, c1, v);
            if (segs & 0b1000000) draw_box(ds.images, base, r_bot, c0, r_bot + t - 1, c1, v);
        }
    }
    return ds;
}

}  // namespace dtd
