#include "anomsynth/image.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <string>

#include "anomsynth/error.hpp"

namespace anomsynth {

namespace {

constexpr int kMaxDim = 4096;

void check_dims(int width, int height, int channels) {
    if (width < 1 || height < 1 || width > kMaxDim || height > kMaxDim)
        throw InvalidArgument("image dimensions out of range: " + std::to_string(width) +
                              "x" + std::to_string(height));
    if (channels != 1 && channels != 3)
        throw InvalidArgument("channels must be 1 or 3, got " + std::to_string(channels));
}

}  // namespace

Image::Image(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
    check_dims(width, height, channels);
    data_.assign(std::size_t(width) * height * channels, 0);
}

Image::Image(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_dims(width, height, channels);
    if (data_.size() != std::size_t(width) * height * channels)
        throw InvalidArgument("image data length does not match dimensions");
}

double Image::intensity(int x, int y) const {
    if (channels_ == 1) return at(x, y, 0);
    double s = 0;
    for (int c = 0; c < channels_; ++c) s += at(x, y, c);
    return s / channels_;
}

PixelMask::PixelMask(int width, int height) : width_(width), height_(height) {
    check_dims(width, height, 1);
    data_.assign(std::size_t(width) * height, 0);
}

PixelMask::PixelMask(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height, 1);
    if (data_.size() != std::size_t(width) * height)
        throw InvalidArgument("mask data length does not match dimensions");
    for (std::uint8_t v : data_)
        if (v > 1) throw InvalidArgument("mask values must be 0 or 1");
}

std::size_t PixelMask::area() const {
    std::size_t n = 0;
    for (std::uint8_t v : data_) n += v;
    return n;
}

namespace {

struct PnmHeader {
    int magic;  // 5 or 6
    int width, height, maxval;
    std::size_t payload_offset;
};

// Token-based header parse: magic, then three decimal fields separated by
// whitespace (with # comments), then exactly one whitespace byte before the
// payload.
PnmHeader parse_header(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw MalformedHeader(name + ": not a binary PGM/PPM file");
    const int magic = bytes[1] - '0';

    std::size_t pos = 2;
    int fields[3];
    for (int f = 0; f < 3; ++f) {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw MalformedHeader(name + ": missing header field");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1 << 20) throw MalformedHeader(name + ": header field too large");
            ++pos;
        }
        fields[f] = int(v);
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos]))
        throw MalformedHeader(name + ": header not terminated by whitespace");
    ++pos;
    return {magic, fields[0], fields[1], fields[2], pos};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoFailure("read failed: " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::uint8_t>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out.write(header.data(), std::streamsize(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
    if (!out) throw IoFailure("write failed: " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const auto hdr = parse_header(bytes, path.string());
    if (hdr.maxval != 255)
        throw UnsupportedMaxval(path.string() + ": maxval must be 255, got " +
                                std::to_string(hdr.maxval));
    if (hdr.width < 1 || hdr.height < 1)
        throw MalformedHeader(path.string() + ": non-positive dimensions");
    const int channels = hdr.magic == 5 ? 1 : 3;
    const std::size_t expect = std::size_t(hdr.width) * hdr.height * channels;
    const std::size_t have = bytes.size() - hdr.payload_offset;
    if (have < expect)
        throw TruncatedPayload(path.string() + ": payload has " + std::to_string(have) +
                               " bytes, expected " + std::to_string(expect));
    if (have > expect)
        throw MalformedHeader(path.string() + ": trailing bytes after payload");
    std::vector<std::uint8_t> data(bytes.begin() + std::ptrdiff_t(hdr.payload_offset),
                                   bytes.end());
    return Image(hdr.width, hdr.height, channels, std::move(data));
}

void write_image(const Image& img, const std::filesystem::path& path) {
    if (img.width() == 0) throw InvalidArgument("write_image: empty image");
    const std::string header = std::string(img.channels() == 1 ? "P5 " : "P6 ") +
                               std::to_string(img.width()) + " " +
                               std::to_string(img.height()) + " 255\n";
    write_file(path, header, img.data());
}

PixelMask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const auto hdr = parse_header(bytes, path.string());
    if (hdr.magic != 5) throw MalformedHeader(path.string() + ": masks must be P5");
    if (hdr.maxval != 255)
        throw UnsupportedMaxval(path.string() + ": maxval must be 255");
    const std::size_t expect = std::size_t(hdr.width) * hdr.height;
    const std::size_t have = bytes.size() - hdr.payload_offset;
    if (have < expect) throw TruncatedPayload(path.string() + ": truncated mask payload");
    if (have > expect) throw MalformedHeader(path.string() + ": trailing bytes after payload");
    std::vector<std::uint8_t> data(expect);
    for (std::size_t i = 0; i < expect; ++i)
        data[i] = bytes[hdr.payload_offset + i] ? 1 : 0;
    return PixelMask(hdr.width, hdr.height, std::move(data));
}

void write_mask(const PixelMask& mask, const std::filesystem::path& path) {
    if (mask.width() == 0) throw InvalidArgument("write_mask: empty mask");
    const std::string header = "P5 " + std::to_string(mask.width()) + " " +
                               std::to_string(mask.height()) + " 255\n";
    std::vector<std::uint8_t> payload(mask.data().size());
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = mask.data()[i] ? 255 : 0;
    write_file(path, header, payload);
}

PixelMask resize_mask_nearest(const PixelMask& mask, int width, int height) {
    if (mask.width() == 0) throw InvalidArgument("resize of empty mask");
    if (mask.width() == width && mask.height() == height) return mask;
    PixelMask out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = int(std::int64_t(y) * mask.height() / height);
        for (int x = 0; x < width; ++x) {
            const int sx = int(std::int64_t(x) * mask.width() / width);
            out.at(x, y) = mask.at(sx, sy);
        }
    }
    return out;
}

}  // namespace anomsynth
