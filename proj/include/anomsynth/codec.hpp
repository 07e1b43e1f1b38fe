#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "anomsynth/image.hpp"
#include "anomsynth/sha256.hpp"

namespace anomsynth {

struct Coord {
    int i = 0;  // token row
    int j = 0;  // token col
    auto operator<=>(const Coord&) const = default;
};

// Patch-prototype codebook; realizes the fixed encoder/decoder pair. The
// decoder is strictly patch-local, which is what turns token-level context
// invariance into a pixel-level guarantee.
class Codebook {
public:
    // entries is K x dim row-major, dim = patch_size^2 * channels,
    // values in [0,255]; entries must be pairwise distinct.
    Codebook(int patch_size, int channels, int K, std::vector<double> entries);

    int patch_size() const { return patch_size_; }
    int channels() const { return channels_; }
    int K() const { return K_; }
    std::size_t dim() const { return std::size_t(patch_size_) * patch_size_ * channels_; }

    std::span<const double> entry(int k) const {
        return {entries_.data() + std::size_t(k) * dim(), dim()};
    }
    const std::vector<double>& entries() const { return entries_; }

    // rounded 8-bit rendering of entry k, same layout; decode paints from this
    std::span<const std::uint8_t> entry_pixels(int k) const {
        return {entry_pixels_.data() + std::size_t(k) * dim(), dim()};
    }

    // content hash over (patch_size, channels, K, entry bits)
    const Digest256& id() const { return id_; }

private:
    int patch_size_, channels_, K_;
    std::vector<double> entries_;
    std::vector<std::uint8_t> entry_pixels_;
    Digest256 id_;
};

struct TokenLattice {
    int h = 0, w = 0;
    int K = 0;
    std::vector<std::uint16_t> tokens;  // row-major h*w, each < K
    Digest256 codebook_id{};

    std::uint16_t at(int i, int j) const { return tokens[std::size_t(i) * w + j]; }
    std::uint16_t& at(int i, int j) { return tokens[std::size_t(i) * w + j]; }
    bool same_shape(const TokenLattice& o) const { return h == o.h && w == o.w && K == o.K; }
};

// Disjoint covering split of token coordinates into context and masked sets.
struct IndexPartition {
    int h = 0, w = 0;
    std::vector<std::uint8_t> masked_flags;  // row-major, 1 = masked

    bool is_masked(int i, int j) const { return masked_flags[std::size_t(i) * w + j] != 0; }
    std::size_t masked_count() const;
    std::vector<Coord> masked() const;
    std::vector<Coord> context() const;
};

struct CodebookConfig {
    int K = 64;
    int patch_size = 8;
    int iterations = 25;
    std::uint64_t seed = 0;
};

// Seeded k-means over all non-overlapping patches. Initial centers are K
// distinct patches drawn at random; empty clusters re-seed from the patch
// farthest from its assigned center.
Codebook train_codebook(const std::vector<Image>& images, const CodebookConfig& cfg);

// Nearest entry per patch under squared Euclidean distance; ties break to the
// lowest index.
TokenLattice encode(const Image& img, const Codebook& cb);

// Paints each token's patch from its rounded entry. Patch p depends only on
// token p.
Image decode(const TokenLattice& z, const Codebook& cb);

// Token (i,j) is masked iff its patch footprint contains at least one set
// mask pixel.
IndexPartition mask_to_partition(const PixelMask& mask, int patch_size);

// "ARTL" binary lattice format: magic, LE u32 h/w/K, 32-byte codebook hash,
// h*w LE u16 tokens.
void write_lattice(const TokenLattice& z, const std::filesystem::path& path);
TokenLattice read_lattice(const std::filesystem::path& path);
TokenLattice read_lattice(const std::filesystem::path& path, const Codebook& expected);

// JSON codebook serialization: {patch_size, channels, K, entries}
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace anomsynth
