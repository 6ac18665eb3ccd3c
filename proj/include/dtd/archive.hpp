#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dtd/idx.hpp"
#include "dtd/tensor.hpp"

// Binary container for trained models and relevance models. Little-endian,
// 8-byte magic, u32 version, length-prefixed named records, CRC32 trailer.
// Doubles are stored as raw IEEE-754 bits so a save/load round trip is
// bit-exact. Byte layout is documented in docs/formats.md.

namespace dtd {

inline constexpr char archive_magic[8] = {'D', 'T', 'D', 'M', 'O', 'D', 'L', '\0'};
inline constexpr std::uint32_t archive_version = 1;

struct ModelArchive {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::int64_t> ints;
    std::map<std::string, double> doubles;
    std::map<std::string, std::string> strings;
};

void save_model(const ModelArchive& archive, const std::string& path);
ModelArchive load_model(const std::string& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t n);

}  // namespace dtd
