#include <doctest.h>

#include <fstream>

#include "anomsynth/error.hpp"
#include "anomsynth/image.hpp"
#include "anomsynth/rng.hpp"
#include "support/temp_dir.hpp"

using namespace anomsynth;
using test_support::TempDir;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::vector<std::uint8_t> pnm_bytes(const std::string& header,
                                    const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    return bytes;
}

}  // namespace

TEST_CASE("reading an all-zero 8x8 P5") {
    TempDir dir("imagery");
    spit(dir / "z.pgm", pnm_bytes("P5 8 8 255\n", std::vector<std::uint8_t>(64, 0)));
    const Image img = read_image(dir / "z.pgm");
    CHECK(img.width() == 8);
    CHECK(img.height() == 8);
    CHECK(img.channels() == 1);
    for (auto v : img.data()) CHECK(v == 0);
}

TEST_CASE("2x2 P5 write produces the hand-encoded 15-byte file") {
    // oracle: "P5 2 2 255\n" is 11 header bytes, plus 4 payload bytes
    TempDir dir("imagery");
    const Image img(2, 2, 1, {0, 255, 0, 255});
    write_image(img, dir / "t.pgm");
    const auto bytes = slurp(dir / "t.pgm");
    REQUIRE(bytes.size() == 15);
    const std::string header(bytes.begin(), bytes.begin() + 11);
    CHECK(header == "P5 2 2 255\n");
    CHECK(bytes[11] == 0);
    CHECK(bytes[12] == 255);
    CHECK(bytes[13] == 0);
    CHECK(bytes[14] == 255);
}

TEST_CASE("byte-level round trips for random P5/P6 files") {
    TempDir dir("imagery");
    Rng rng(2024);
    for (int rep = 0; rep < 25; ++rep) {
        const int w = 1 + int(rng.next_below(24));
        const int h = 1 + int(rng.next_below(24));
        const int ch = rng.bernoulli(0.5) ? 1 : 3;
        std::vector<std::uint8_t> data(std::size_t(w) * h * ch);
        for (auto& v : data) v = std::uint8_t(rng.next_below(256));
        const Image img(w, h, ch, data);

        const auto p = dir / "r.pnm";
        write_image(img, p);
        const Image back = read_image(p);
        CHECK(back == img);

        // write(read(f)) is byte-identical for canonical files
        const auto original = slurp(p);
        write_image(back, dir / "r2.pnm");
        CHECK(slurp(dir / "r2.pnm") == original);
    }
}

TEST_CASE("malformed inputs are rejected") {
    TempDir dir("imagery");

    spit(dir / "trunc.pgm", pnm_bytes("P5 8 8 255\n", std::vector<std::uint8_t>(63, 7)));
    CHECK_THROWS_AS(read_image(dir / "trunc.pgm"), TruncatedPayload);

    spit(dir / "maxval.pgm", pnm_bytes("P5 2 2 65535\n", std::vector<std::uint8_t>(8, 0)));
    CHECK_THROWS_AS(read_image(dir / "maxval.pgm"), UnsupportedMaxval);

    spit(dir / "magic.pgm", pnm_bytes("P4 2 2 255\n", std::vector<std::uint8_t>(4, 0)));
    CHECK_THROWS_AS(read_image(dir / "magic.pgm"), MalformedHeader);

    spit(dir / "nohdr.pgm", pnm_bytes("P5 2", {}));
    CHECK_THROWS_AS(read_image(dir / "nohdr.pgm"), MalformedHeader);

    spit(dir / "extra.pgm", pnm_bytes("P5 2 2 255\n", std::vector<std::uint8_t>(5, 0)));
    CHECK_THROWS_AS(read_image(dir / "extra.pgm"), MalformedHeader);

    CHECK_THROWS_AS(read_image(dir / "missing.pgm"), IoFailure);
}

TEST_CASE("image invariants are enforced at construction") {
    CHECK_THROWS_AS(Image(2, 2, 2, std::vector<std::uint8_t>(8, 0)), InvalidArgument);
    CHECK_THROWS_AS(Image(2, 2, 1, std::vector<std::uint8_t>(3, 0)), InvalidArgument);
    CHECK_THROWS_AS(Image(0, 2, 1, {}), InvalidArgument);
    CHECK_THROWS_AS(Image(5000, 5000, 1), InvalidArgument);
    CHECK_THROWS_AS(PixelMask(2, 2, {0, 1, 2, 0}), InvalidArgument);
}

TEST_CASE("mask io thresholds and round trips") {
    TempDir dir("imagery");

    spit(dir / "full.pgm", pnm_bytes("P5 4 4 255\n", std::vector<std::uint8_t>(16, 255)));
    CHECK(read_mask(dir / "full.pgm").all_set());

    spit(dir / "empty.pgm", pnm_bytes("P5 4 4 255\n", std::vector<std::uint8_t>(16, 0)));
    CHECK(read_mask(dir / "empty.pgm").none_set());

    // documented thresholding rule: any nonzero byte maps to 1
    spit(dir / "mid.pgm", pnm_bytes("P5 1 1 255\n", {128}));
    CHECK(read_mask(dir / "mid.pgm").at(0, 0) == 1);

    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        const int w = 1 + int(rng.next_below(16));
        const int h = 1 + int(rng.next_below(16));
        std::vector<std::uint8_t> data(std::size_t(w) * h);
        for (auto& v : data) v = std::uint8_t(rng.next_below(2));
        const PixelMask m(w, h, data);
        write_mask(m, dir / "m.pgm");
        CHECK(read_mask(dir / "m.pgm") == m);
    }
}

TEST_CASE("nearest-neighbor mask resize keeps values binary") {
    PixelMask m(4, 4);
    m.at(0, 0) = 1;
    m.at(3, 3) = 1;
    const PixelMask up = resize_mask_nearest(m, 8, 8);
    CHECK(up.width() == 8);
    CHECK(up.at(0, 0) == 1);
    CHECK(up.at(7, 7) == 1);
    for (auto v : up.data()) CHECK(v <= 1);
    const PixelMask same = resize_mask_nearest(m, 4, 4);
    CHECK(same == m);
}
