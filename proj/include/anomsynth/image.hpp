#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace anomsynth {

// 8-bit grayscale (channels=1) or RGB (channels=3) raster, row-major,
// channels interleaved.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels);
    Image(int width, int height, int channels, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return std::size_t(width_) * height_; }

    std::uint8_t at(int x, int y, int c = 0) const {
        return data_[(std::size_t(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(int x, int y, int c = 0) {
        return data_[(std::size_t(y) * width_ + x) * channels_ + c];
    }

    // channel mean at a pixel
    double intensity(int x, int y) const;

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0, height_ = 0, channels_ = 1;
    std::vector<std::uint8_t> data_;
};

// Binary mask; data values are exactly 0 or 1.
class PixelMask {
public:
    PixelMask() = default;
    PixelMask(int width, int height);
    PixelMask(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }

    std::uint8_t at(int x, int y) const { return data_[std::size_t(y) * width_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[std::size_t(y) * width_ + x]; }

    const std::vector<std::uint8_t>& data() const { return data_; }

    std::size_t area() const;  // number of set pixels
    bool none_set() const { return area() == 0; }
    bool all_set() const { return area() == std::size_t(width_) * height_; }

    bool operator==(const PixelMask&) const = default;

private:
    int width_ = 0, height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Binary PGM (P5, 1 channel) / PPM (P6, 3 channels), maxval 255. Writing
// emits the canonical header "P5 w h 255\n" / "P6 w h 255\n" followed by the
// raw payload, so write(read(f)) is byte-identical for canonical files.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

// Masks are P5 files; any nonzero byte reads as 1, writing maps 1 to 255.
PixelMask read_mask(const std::filesystem::path& path);
void write_mask(const PixelMask& mask, const std::filesystem::path& path);

// Nearest-neighbor resize; preserves the {0,1} value set.
PixelMask resize_mask_nearest(const PixelMask& mask, int width, int height);

}  // namespace anomsynth
