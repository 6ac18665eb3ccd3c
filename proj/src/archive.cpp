#include "dtd/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dtd {

namespace {

enum RecordKind : std::uint8_t {
    kTensor = 1,
    kInt = 2,
    kDouble = 3,
    kString = 4,
};

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::vector<std::uint8_t>& buf, const std::string& s) {
    put_u32(buf, std::uint32_t(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
}

struct Reader {
    const std::uint8_t* p;
    std::size_t remaining;
    const std::string& path;

    void need(std::size_t n) const {
        if (remaining < n)
            throw IoError(path + ": truncated archive (needed " + std::to_string(n) +
                          " more bytes)");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::uint8_t u8() {
        need(1);
        std::uint8_t v = *p++;
        --remaining;
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

void save_model(const ModelArchive& archive, const std::string& path) {
    std::vector<std::uint8_t> body;
    const std::size_t total = archive.tensors.size() + archive.ints.size() +
                              archive.doubles.size() + archive.strings.size();
    put_u32(body, std::uint32_t(total));
    for (const auto& [name, t] : archive.tensors) {
        body.push_back(kTensor);
        put_string(body, name);
        put_u32(body, std::uint32_t(t.rank()));
        for (std::size_t e : t.shape()) put_u64(body, e);
        for (double v : t.data()) put_f64(body, v);
    }
    for (const auto& [name, v] : archive.ints) {
        body.push_back(kInt);
        put_string(body, name);
        put_u64(body, std::uint64_t(v));
    }
    for (const auto& [name, v] : archive.doubles) {
        body.push_back(kDouble);
        put_string(body, name);
        put_f64(body, v);
    }
    for (const auto& [name, v] : archive.strings) {
        body.push_back(kString);
        put_string(body, name);
        put_string(body, v);
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), archive_magic, archive_magic + 8);
    put_u32(out, archive_version);
    put_u64(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32(body.data(), body.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw IoError(path + ": write failed");
}

ModelArchive load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    Reader r{bytes.data(), bytes.size(), path};

    r.need(8);
    if (std::memcmp(r.p, archive_magic, 8) != 0)
        throw IoError(path + ": not a model archive (bad magic)");
    r.p += 8;
    r.remaining -= 8;

    const std::uint32_t version = r.u32();
    if (version != archive_version)
        throw IoError(path + ": unsupported archive version " + std::to_string(version) +
                      " (expected " + std::to_string(archive_version) + ")");

    const std::uint64_t body_len = r.u64();
    r.need(body_len + 4);
    const std::uint8_t* body_start = r.p;
    const std::uint32_t stored_crc =
        std::uint32_t(body_start[body_len]) | (std::uint32_t(body_start[body_len + 1]) << 8) |
        (std::uint32_t(body_start[body_len + 2]) << 16) |
        (std::uint32_t(body_start[body_len + 3]) << 24);
    if (crc32(body_start, body_len) != stored_crc)
        throw IoError(path + ": checksum mismatch, archive is corrupt");

    Reader br{body_start, body_len, path};
    ModelArchive archive;
    const std::uint32_t count = br.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t kind = br.u8();
        const std::string name = br.str();
        switch (kind) {
            case kTensor: {
                const std::uint32_t rank = br.u32();
                Shape shape(rank);
                for (auto& e : shape) e = std::size_t(br.u64());
                std::size_t n = 1;
                for (std::size_t e : shape) n *= e;
                std::vector<double> data(n);
                for (auto& v : data) v = br.f64();
                archive.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
                break;
            }
            case kInt: archive.ints[name] = std::int64_t(br.u64()); break;
            case kDouble: archive.doubles[name] = br.f64(); break;
            case kString: archive.strings[name] = br.str(); break;
            default:
                throw IoError(path + ": unknown record kind " + std::to_string(kind) +
                              " for entry '" + name + "'");
        }
    }
    return archive;
}

}  // namespace dtd
