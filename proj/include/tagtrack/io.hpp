#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tagtrack/types.hpp"

// File formats.
//
// TGF1: 4-byte magic "TGF1", then a 4-byte little-endian unsigned length,
// then a UTF-8 JSON header {dtype:"f32", order:"row-major",
// shape:[frames,channels,height,width], coord:"xy-colrow"}, then raw
// little-endian 32-bit floats. Field channel 0 is the x (column)
// displacement, channel 1 the y (row) displacement.
//
// Landmarks: CSV with header "frame,id,x,y".
//
// Writers stage to "<path>.partial" and rename on success, so a crashed run
// never leaves a valid-looking artifact behind.

namespace tagtrack {

struct Tensor4 {
    std::array<int, 4> shape{0, 0, 0, 0};  // frames, channels, height, width
    std::vector<double> data;              // row-major over the shape

    size_t count() const {
        return static_cast<size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
    }
};

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
    uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string tgf1_serialize(const Tensor4& t) {
    require(t.data.size() == t.count(), "tensor data/shape mismatch");
    nlohmann::json header = {
        {"dtype", "f32"},
        {"order", "row-major"},
        {"shape", {t.shape[0], t.shape[1], t.shape[2], t.shape[3]}},
        {"coord", "xy-colrow"},
    };
    std::string hs = header.dump();
    std::string out;
    out.reserve(8 + hs.size() + 4 * t.data.size());
    out += "TGF1";
    uint32_t len = static_cast<uint32_t>(hs.size());
    char lenb[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
    out.append(lenb, 4);
    out += hs;
    for (double v : t.data) {
        float f = static_cast<float>(v);
        char fb[4];
        std::memcpy(fb, &f, 4);  // little-endian host
        out.append(fb, 4);
    }
    return out;
}

inline void write_tgf1(const std::filesystem::path& path, const Tensor4& t) {
    atomic_write(path, tgf1_serialize(t));
}

inline Tensor4 tgf1_parse(const std::string& bytes, const std::string& what) {
    require(bytes.size() >= 8 && bytes.compare(0, 4, "TGF1") == 0, what + ": bad TGF1 magic");
    uint32_t len = static_cast<uint8_t>(bytes[4]) | (static_cast<uint8_t>(bytes[5]) << 8) |
                   (static_cast<uint8_t>(bytes[6]) << 16) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(bytes[7])) << 24);
    require(bytes.size() >= 8 + len, what + ": truncated TGF1 header");
    nlohmann::json header = nlohmann::json::parse(bytes.substr(8, len));
    require(header.value("dtype", "") == "f32", what + ": unsupported dtype");
    require(header.value("order", "") == "row-major", what + ": unsupported order");
    Tensor4 t;
    auto shape = header.at("shape");
    require(shape.size() == 4, what + ": shape must have 4 entries");
    for (int i = 0; i < 4; ++i) t.shape[i] = shape[i].get<int>();
    size_t n = t.count();
    require(bytes.size() == 8 + len + 4 * n, what + ": payload size mismatch");
    t.data.resize(n);
    const char* p = bytes.data() + 8 + len;
    for (size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, p + 4 * i, 4);
        t.data[i] = f;
    }
    return t;
}

inline Tensor4 read_tgf1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return tgf1_parse(ss.str(), path.string());
}

// landmark trajectories: one PointSet per frame
inline void write_landmarks(const std::filesystem::path& path,
                            const std::vector<PointSet>& frames) {
    std::ostringstream out;
    out << "frame,id,x,y\n";
    char buf[64];
    for (size_t f = 0; f < frames.size(); ++f) {
        for (size_t i = 0; i < frames[f].size(); ++i) {
            const Point2& p = frames[f].points[i];
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g\n", f, i, p.x, p.y);
            out << buf;
        }
    }
    atomic_write(path, out.str());
}

inline std::vector<PointSet> read_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty landmark file");
    require(line.rfind("frame,id,x,y", 0) == 0, path.string() + ": bad landmark header");
    std::vector<PointSet> frames;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t frame, id;
        double x, y;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf", &frame, &id, &x, &y) != 4)
            throw std::invalid_argument(path.string() + ": bad landmark row: " + line);
        if (frames.size() <= frame) frames.resize(frame + 1);
        if (frames[frame].points.size() <= id) frames[frame].points.resize(id + 1);
        frames[frame].points[id] = Point2{x, y};
    }
    return frames;
}

// ---- Tensor4 <-> domain type conversions ----

inline Tensor4 images_to_tensor(const std::vector<ScalarImage>& frames) {
    require(!frames.empty(), "no frames");
    int H = frames[0].height, W = frames[0].width;
    Tensor4 t;
    t.shape = {static_cast<int>(frames.size()), 1, H, W};
    t.data.reserve(t.count());
    for (const auto& f : frames) {
        require(f.height == H && f.width == W, "inconsistent frame shapes");
        t.data.insert(t.data.end(), f.data.begin(), f.data.end());
    }
    return t;
}

inline std::vector<ScalarImage> tensor_to_images(const Tensor4& t) {
    require(t.shape[1] == 1, "expected a single-channel tensor");
    std::vector<ScalarImage> frames;
    int H = t.shape[2], W = t.shape[3];
    size_t plane = static_cast<size_t>(H) * W;
    for (int f = 0; f < t.shape[0]; ++f) {
        ScalarImage img(H, W);
        std::copy_n(t.data.begin() + f * plane, plane, img.data.begin());
        frames.push_back(std::move(img));
    }
    return frames;
}

inline Tensor4 fields_to_tensor(const std::vector<VectorField>& fields) {
    require(!fields.empty(), "no fields");
    int H = fields[0].height, W = fields[0].width;
    Tensor4 t;
    t.shape = {static_cast<int>(fields.size()), 2, H, W};
    t.data.reserve(t.count());
    for (const auto& f : fields) {
        require(f.height == H && f.width == W, "inconsistent field shapes");
        t.data.insert(t.data.end(), f.dx.begin(), f.dx.end());
        t.data.insert(t.data.end(), f.dy.begin(), f.dy.end());
    }
    return t;
}

inline std::vector<VectorField> tensor_to_fields(const Tensor4& t,
                                                 FieldKind kind = FieldKind::displacement) {
    require(t.shape[1] == 2, "expected a two-channel tensor");
    std::vector<VectorField> fields;
    int H = t.shape[2], W = t.shape[3];
    size_t plane = static_cast<size_t>(H) * W;
    for (int f = 0; f < t.shape[0]; ++f) {
        VectorField v(H, W, kind);
        std::copy_n(t.data.begin() + (2 * f) * plane, plane, v.dx.begin());
        std::copy_n(t.data.begin() + (2 * f + 1) * plane, plane, v.dy.begin());
        fields.push_back(std::move(v));
    }
    return fields;
}

}  // namespace tagtrack
