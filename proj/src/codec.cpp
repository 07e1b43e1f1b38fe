#include "anomsynth/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "anomsynth/error.hpp"
#include "anomsynth/kernels.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

namespace {

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}

Digest256 codebook_hash(int patch_size, int channels, int K,
                        const std::vector<double>& entries) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(12 + entries.size() * 8);
    append_u32(bytes, std::uint32_t(patch_size));
    append_u32(bytes, std::uint32_t(channels));
    append_u32(bytes, std::uint32_t(K));
    for (double e : entries) {
        std::uint64_t bits;
        std::memcpy(&bits, &e, 8);
        for (int k = 0; k < 8; ++k) bytes.push_back(std::uint8_t(bits >> (8 * k)));
    }
    return sha256(bytes);
}

std::uint8_t to_pixel(double v) {
    const double r = std::floor(v + 0.5);  // round half up, deterministic
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return std::uint8_t(r);
}

}  // namespace

Codebook::Codebook(int patch_size, int channels, int K, std::vector<double> entries)
    : patch_size_(patch_size), channels_(channels), K_(K), entries_(std::move(entries)) {
    if (patch_size < 1) throw InvalidArgument("patch_size must be positive");
    if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
    if (K < 2) throw InvalidArgument("codebook needs K >= 2");
    if (entries_.size() != std::size_t(K) * dim())
        throw InvalidArgument("codebook entry data has wrong length");
    for (double v : entries_)
        if (!std::isfinite(v)) throw InvalidArgument("codebook entries must be finite");
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b)
            if (std::equal(entry(a).begin(), entry(a).end(), entry(b).begin()))
                throw InvalidArgument("codebook entries must be pairwise distinct");

    entry_pixels_.resize(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) entry_pixels_[i] = to_pixel(entries_[i]);
    id_ = codebook_hash(patch_size_, channels_, K_, entries_);
}

std::size_t IndexPartition::masked_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : masked_flags) n += f;
    return n;
}

std::vector<Coord> IndexPartition::masked() const {
    std::vector<Coord> out;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (is_masked(i, j)) out.push_back({i, j});
    return out;
}

std::vector<Coord> IndexPartition::context() const {
    std::vector<Coord> out;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (!is_masked(i, j)) out.push_back({i, j});
    return out;
}

namespace {

// Non-overlapping patches of one image as flat dim-length vectors.
void extract_patches(const Image& img, int patch_size, std::vector<double>& out) {
    const int ph = img.height() / patch_size;
    const int pw = img.width() / patch_size;
    const int ch = img.channels();
    const std::size_t dim = std::size_t(patch_size) * patch_size * ch;
    out.reserve(out.size() + std::size_t(ph) * pw * dim);
    for (int i = 0; i < ph; ++i) {
        for (int j = 0; j < pw; ++j) {
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px)
                    for (int c = 0; c < ch; ++c)
                        out.push_back(double(img.at(j * patch_size + px,
                                                    i * patch_size + py, c)));
        }
    }
}

void check_encodable(const Image& img, int patch_size, int channels) {
    if (img.width() % patch_size != 0 || img.height() % patch_size != 0)
        throw DimensionMismatch("image dimensions not divisible by patch size");
    if (img.channels() != channels)
        throw DimensionMismatch("image channel count does not match codebook");
}

}  // namespace

Codebook train_codebook(const std::vector<Image>& images, const CodebookConfig& cfg) {
    if (images.empty()) throw EmptyCorpus("train_codebook: no images");
    if (cfg.K < 2) throw InvalidArgument("train_codebook: K must be >= 2");
    const int channels = images[0].channels();
    std::vector<double> patches;
    for (const Image& img : images) {
        check_encodable(img, cfg.patch_size, channels);
        extract_patches(img, cfg.patch_size, patches);
    }
    const std::size_t dim = std::size_t(cfg.patch_size) * cfg.patch_size * channels;
    const std::size_t n = patches.size() / dim;
    auto patch = [&](std::size_t p) {
        return std::span<const double>(patches.data() + p * dim, dim);
    };

    // distinct patches, keeping first occurrence order
    std::vector<std::size_t> distinct;
    {
        std::map<std::vector<double>, bool> seen;
        std::vector<double> key(dim);
        for (std::size_t p = 0; p < n; ++p) {
            key.assign(patch(p).begin(), patch(p).end());
            if (!seen.emplace(key, true).second) continue;
            distinct.push_back(p);
        }
    }
    if (distinct.size() < std::size_t(cfg.K))
        throw TooFewPatches("only " + std::to_string(distinct.size()) +
                            " distinct patches for K=" + std::to_string(cfg.K));

    Rng rng(derive_seed(cfg.seed, 0xC0DEB00Cull));
    std::vector<std::size_t> picks = distinct;
    rng.shuffle(picks);
    std::vector<double> centers(std::size_t(cfg.K) * dim);
    for (int k = 0; k < cfg.K; ++k)
        std::copy_n(patches.data() + picks[std::size_t(k)] * dim, dim,
                    centers.data() + std::size_t(k) * dim);

    std::vector<std::size_t> assign(n);
    std::vector<double> dist(n);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        for (std::size_t p = 0; p < n; ++p) {
            const auto r = kernels::argmin_sq_l2(patch(p), centers, std::size_t(cfg.K));
            assign[p] = r.index;
            dist[p] = r.distance;
        }
        std::vector<double> sums(std::size_t(cfg.K) * dim, 0.0);
        std::vector<std::size_t> counts(std::size_t(cfg.K), 0);
        for (std::size_t p = 0; p < n; ++p) {
            kernels::axpy(1.0, patch(p),
                          {sums.data() + assign[p] * dim, dim});
            ++counts[assign[p]];
        }
        std::vector<std::uint8_t> reseeded(n, 0);
        for (int k = 0; k < cfg.K; ++k) {
            if (counts[std::size_t(k)] == 0) {
                // re-seed from the farthest patch not already used this round
                std::size_t far = n;
                double far_d = -1.0;
                for (std::size_t p = 0; p < n; ++p) {
                    if (!reseeded[p] && dist[p] > far_d) {
                        far_d = dist[p];
                        far = p;
                    }
                }
                reseeded[far] = 1;
                std::copy_n(patches.data() + far * dim, dim,
                            centers.data() + std::size_t(k) * dim);
            } else {
                const double inv = 1.0 / double(counts[std::size_t(k)]);
                for (std::size_t d = 0; d < dim; ++d)
                    centers[std::size_t(k) * dim + d] = sums[std::size_t(k) * dim + d] * inv;
            }
        }
    }

    // k-means can converge onto coincident centers; the type requires
    // pairwise-distinct entries, so replace duplicates from far patches.
    for (int a = 0; a < cfg.K; ++a) {
        for (int b = a + 1; b < cfg.K; ++b) {
            const double* ca = centers.data() + std::size_t(a) * dim;
            double* cb = centers.data() + std::size_t(b) * dim;
            if (!std::equal(ca, ca + dim, cb)) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t p = 0; p < n; ++p) {
                const auto r = kernels::argmin_sq_l2(patch(p), centers, std::size_t(cfg.K));
                if (r.distance > far_d) {
                    far_d = r.distance;
                    far = p;
                }
            }
            std::copy_n(patches.data() + far * dim, dim, cb);
        }
    }

    return Codebook(cfg.patch_size, channels, cfg.K, std::move(centers));
}

TokenLattice encode(const Image& img, const Codebook& cb) {
    check_encodable(img, cb.patch_size(), cb.channels());
    TokenLattice z;
    z.h = img.height() / cb.patch_size();
    z.w = img.width() / cb.patch_size();
    z.K = cb.K();
    z.codebook_id = cb.id();
    z.tokens.resize(std::size_t(z.h) * z.w);

    const std::size_t dim = cb.dim();
    std::vector<double> buf(dim);
    const int p = cb.patch_size();
    for (int i = 0; i < z.h; ++i) {
        for (int j = 0; j < z.w; ++j) {
            std::size_t d = 0;
            for (int py = 0; py < p; ++py)
                for (int px = 0; px < p; ++px)
                    for (int c = 0; c < cb.channels(); ++c)
                        buf[d++] = double(img.at(j * p + px, i * p + py, c));
            const auto r = kernels::argmin_sq_l2(buf, cb.entries(), std::size_t(cb.K()));
            z.at(i, j) = std::uint16_t(r.index);
        }
    }
    return z;
}

Image decode(const TokenLattice& z, const Codebook& cb) {
    if (z.codebook_id != cb.id())
        throw CodebookMismatch("lattice was encoded with a different codebook");
    if (z.tokens.size() != std::size_t(z.h) * z.w)
        throw ShapeMismatch("lattice token count does not match shape");
    const int p = cb.patch_size();
    const int ch = cb.channels();
    Image img(z.w * p, z.h * p, ch);
    const std::size_t row_bytes = std::size_t(p) * ch;
    for (int i = 0; i < z.h; ++i) {
        for (int j = 0; j < z.w; ++j) {
            const std::uint16_t tok = z.at(i, j);
            if (tok >= cb.K()) throw CodebookMismatch("token out of range");
            const std::uint8_t* src = cb.entry_pixels(tok).data();
            for (int py = 0; py < p; ++py) {
                std::uint8_t* dst = &img.at(j * p, i * p + py, 0);
                std::memcpy(dst, src + std::size_t(py) * row_bytes, row_bytes);
            }
        }
    }
    return img;
}

IndexPartition mask_to_partition(const PixelMask& mask, int patch_size) {
    if (mask.width() % patch_size != 0 || mask.height() % patch_size != 0)
        throw DimensionMismatch("mask dimensions not divisible by patch size");
    IndexPartition part;
    part.h = mask.height() / patch_size;
    part.w = mask.width() / patch_size;
    part.masked_flags.assign(std::size_t(part.h) * part.w, 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y))
                part.masked_flags[std::size_t(y / patch_size) * part.w + x / patch_size] = 1;
        }
    }
    return part;
}

namespace {

constexpr char kLatticeMagic[4] = {'A', 'R', 'T', 'L'};

std::uint32_t read_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_lattice(const TokenLattice& z, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kLatticeMagic, kLatticeMagic + 4);
    append_u32(bytes, std::uint32_t(z.h));
    append_u32(bytes, std::uint32_t(z.w));
    append_u32(bytes, std::uint32_t(z.K));
    bytes.insert(bytes.end(), z.codebook_id.begin(), z.codebook_id.end());
    for (std::uint16_t t : z.tokens) {
        bytes.push_back(std::uint8_t(t));
        bytes.push_back(std::uint8_t(t >> 8));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoFailure("write failed: " + path.string());
}

TokenLattice read_lattice(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 48) throw TruncatedPayload(path.string() + ": lattice file too short");
    if (std::memcmp(bytes.data(), kLatticeMagic, 4) != 0)
        throw BadMagic(path.string() + ": not an ARTL lattice file");
    TokenLattice z;
    z.h = int(read_u32(&bytes[4]));
    z.w = int(read_u32(&bytes[8]));
    z.K = int(read_u32(&bytes[12]));
    std::copy_n(&bytes[16], 32, z.codebook_id.begin());
    const std::size_t count = std::size_t(z.h) * z.w;
    if (bytes.size() != 48 + count * 2)
        throw TruncatedPayload(path.string() + ": lattice payload size mismatch");
    z.tokens.resize(count);
    for (std::size_t t = 0; t < count; ++t) {
        z.tokens[t] = std::uint16_t(bytes[48 + 2 * t]) |
                      (std::uint16_t(bytes[48 + 2 * t + 1]) << 8);
        if (z.tokens[t] >= z.K)
            throw MalformedHeader(path.string() + ": token index out of range");
    }
    return z;
}

TokenLattice read_lattice(const std::filesystem::path& path, const Codebook& expected) {
    TokenLattice z = read_lattice(path);
    if (z.codebook_id != expected.id())
        throw HashMismatch(path.string() + ": codebook hash does not match");
    return z;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["patch_size"] = cb.patch_size();
    j["channels"] = cb.channels();
    j["K"] = cb.K();
    auto& entries = j["entries"];
    for (int k = 0; k < cb.K(); ++k)
        entries.push_back(std::vector<double>(cb.entry(k).begin(), cb.entry(k).end()));
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoFailure("write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeader(path.string() + ": " + e.what());
    }
    const int patch_size = j.at("patch_size").get<int>();
    const int channels = j.at("channels").get<int>();
    const int K = j.at("K").get<int>();
    std::vector<double> entries;
    for (const auto& row : j.at("entries"))
        for (const auto& v : row) entries.push_back(v.get<double>());
    return Codebook(patch_size, channels, K, std::move(entries));
}

}  // namespace anomsynth
