#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oracles.hpp"
#include "tagtrack/io.hpp"

using namespace tagtrack;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / "tagtrack_io_test";
    fs::create_directories(d);
    return d;
}

Tensor4 random_tensor(std::array<int, 4> shape, uint64_t seed) {
    Tensor4 t;
    t.shape = shape;
    Rng rng(seed);
    t.data.resize(t.count());
    // values forced through f32 so a round trip can be compared bitwise
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-5.0, 5.0));
    return t;
}

}  // namespace

TEST_CASE("tgf1 header layout") {
    Tensor4 t = random_tensor({2, 1, 3, 4}, 5);
    std::string bytes = tgf1_serialize(t);
    REQUIRE(bytes.compare(0, 4, "TGF1") == 0);
    uint32_t len = static_cast<uint8_t>(bytes[4]) | (static_cast<uint8_t>(bytes[5]) << 8) |
                   (static_cast<uint8_t>(bytes[6]) << 16) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(bytes[7])) << 24);
    nlohmann::json h = nlohmann::json::parse(bytes.substr(8, len));
    REQUIRE(h["dtype"] == "f32");
    REQUIRE(h["order"] == "row-major");
    REQUIRE(h["coord"] == "xy-colrow");
    REQUIRE(h["shape"] == nlohmann::json({2, 1, 3, 4}));
    REQUIRE(bytes.size() == 8 + len + 4 * t.count());
    // payload is little-endian f32
    float f;
    std::memcpy(&f, bytes.data() + 8 + len, 4);
    REQUIRE(double(f) == t.data[0]);
}

TEST_CASE("tgf1 file round trip is bitwise for f32 data") {
    fs::path p = temp_dir() / "roundtrip.tgf";
    Tensor4 t = random_tensor({3, 2, 5, 4}, 7);
    write_tgf1(p, t);
    Tensor4 back = read_tgf1(p);
    REQUIRE(back.shape == t.shape);
    REQUIRE(back.data == t.data);
    REQUIRE(!fs::exists(p.string() + ".partial"));
}

TEST_CASE("tgf1 parser rejects malformed input") {
    Tensor4 t = random_tensor({1, 1, 2, 2}, 9);
    std::string good = tgf1_serialize(t);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    REQUIRE_THROWS_WITH(tgf1_parse(bad_magic, "t"), Catch::Matchers::ContainsSubstring("magic"));

    std::string truncated = good.substr(0, 10);
    REQUIRE_THROWS_WITH(tgf1_parse(truncated, "t"),
                        Catch::Matchers::ContainsSubstring("truncated"));

    std::string short_payload = good.substr(0, good.size() - 4);
    REQUIRE_THROWS_WITH(tgf1_parse(short_payload, "t"),
                        Catch::Matchers::ContainsSubstring("size mismatch"));
}

TEST_CASE("landmark csv round trip") {
    fs::path p = temp_dir() / "marks.csv";
    std::vector<PointSet> frames(3);
    Rng rng(11);
    for (auto& f : frames)
        for (int i = 0; i < 5; ++i)
            f.points.push_back({rng.uniform(0.0, 63.0), rng.uniform(0.0, 63.0)});
    write_landmarks(p, frames);
    auto back = read_landmarks(p);
    REQUIRE(back.size() == frames.size());
    for (size_t f = 0; f < frames.size(); ++f) {
        REQUIRE(back[f].size() == frames[f].size());
        for (size_t i = 0; i < frames[f].size(); ++i) {
            REQUIRE(std::abs(back[f].points[i].x - frames[f].points[i].x) <= 1e-6);
            REQUIRE(std::abs(back[f].points[i].y - frames[f].points[i].y) <= 1e-6);
        }
    }
    // exactly representable coordinates survive bit-for-bit
    std::vector<PointSet> exact(1);
    exact[0].points = {{12.25, -3.5}, {0.0, 100.0}};
    write_landmarks(p, exact);
    auto back2 = read_landmarks(p);
    REQUIRE(back2[0].points[0].x == 12.25);
    REQUIRE(back2[0].points[0].y == -3.5);
    REQUIRE(back2[0].points[1].y == 100.0);

    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "frame,id,x,y");
}

TEST_CASE("landmark reader rejects malformed files") {
    fs::path p = temp_dir() / "bad.csv";
    {
        std::ofstream out(p);
        out << "x,y,frame,id\n";
    }
    REQUIRE_THROWS(read_landmarks(p));
    {
        std::ofstream out(p);
        out << "frame,id,x,y\n0,0,not,a-number\n";
    }
    REQUIRE_THROWS(read_landmarks(p));
}

TEST_CASE("atomic_write leaves no partial file and survives overwrite") {
    fs::path p = temp_dir() / "atomic.bin";
    atomic_write(p, "first");
    atomic_write(p, "second");
    std::ifstream in(p, std::ios::binary);
    std::string got((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(got == "second");
    REQUIRE(!fs::exists(p.string() + ".partial"));

    fs::path missing = temp_dir() / "no_such_dir" / "f.bin";
    REQUIRE_THROWS(atomic_write(missing, "x"));
    REQUIRE(!fs::exists(missing));
}

TEST_CASE("fnv1a64 matches the published test vectors") {
    REQUIRE(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
    REQUIRE(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
    REQUIRE(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
    REQUIRE(fnv1a64_hex("foobar") == "85944171f73967e8");

    fs::path p = temp_dir() / "sum.bin";
    atomic_write(p, "foobar");
    REQUIRE(file_checksum(p) == "85944171f73967e8");
}

TEST_CASE("image and field tensor conversions round trip") {
    Rng rng(13);
    std::vector<ScalarImage> frames;
    for (int f = 0; f < 3; ++f) frames.push_back(oracle::random_image(4, 6, rng));
    Tensor4 t = images_to_tensor(frames);
    REQUIRE(t.shape == std::array<int, 4>{3, 1, 4, 6});
    auto back = tensor_to_images(t);
    for (int f = 0; f < 3; ++f) REQUIRE(back[f].data == frames[f].data);

    std::vector<VectorField> fields;
    for (int f = 0; f < 2; ++f) fields.push_back(oracle::smooth_field(4, 6, 2.0, rng));
    Tensor4 ft = fields_to_tensor(fields);
    REQUIRE(ft.shape == std::array<int, 4>{2, 2, 4, 6});
    auto fback = tensor_to_fields(ft);
    for (int f = 0; f < 2; ++f) {
        REQUIRE(fback[f].dx == fields[f].dx);
        REQUIRE(fback[f].dy == fields[f].dy);
    }
    // channel 0 is the x displacement
    Tensor4 planes;
    planes.shape = {1, 2, 2, 2};
    planes.data = {1, 1, 1, 1, 2, 2, 2, 2};
    auto pf = tensor_to_fields(planes);
    REQUIRE(pf[0].dx == std::vector<double>{1, 1, 1, 1});
    REQUIRE(pf[0].dy == std::vector<double>{2, 2, 2, 2});
}
