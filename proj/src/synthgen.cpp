#include "anomsynth/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "anomsynth/error.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

namespace {

constexpr const char* kTextureNames[] = {"stripes", "checker", "grain", "rings"};
constexpr const char* kCorruptionNames[] = {"none", "wrong_type", "wrong_color",
                                            "collapsed_texture"};

std::uint8_t clamp_pixel(double v) {
    const double r = std::floor(v + 0.5);
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return std::uint8_t(r);
}

}  // namespace

const char* to_string(TextureKind k) { return kTextureNames[int(k)]; }
const char* to_string(CorruptionMode m) { return kCorruptionNames[int(m)]; }

TextureKind texture_kind_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == kTextureNames[i]) return TextureKind(i);
    throw InvalidArgument("unknown texture kind: " + s);
}

Image gen_texture(const TextureSpec& spec) {
    if (spec.period < 2) throw InvalidArgument("texture period must be >= 2");
    if (spec.base < 0 || spec.base > 255)
        throw InvalidArgument("texture base intensity out of range");
    Image img(spec.width, spec.height, spec.channels);
    Rng rng(derive_seed(spec.seed, 0x7e87a3e5ull));
    const int half = spec.period / 2;
    const double cx = spec.width / 2.0, cy = spec.height / 2.0;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            double v = spec.base;
            switch (spec.kind) {
                case TextureKind::stripes:
                    v += (x % spec.period) < half ? spec.contrast : -spec.contrast;
                    break;
                case TextureKind::checker:
                    v += ((x / half + y / half) % 2 == 0) ? spec.contrast : -spec.contrast;
                    break;
                case TextureKind::grain:
                    // amplitude comes from the noise term below
                    break;
                case TextureKind::rings: {
                    const double d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                    v += (int(d) % spec.period) < half ? spec.contrast : -spec.contrast;
                    break;
                }
            }
            double noise_amp = spec.noise_amp;
            if (spec.kind == TextureKind::grain && noise_amp == 0.0)
                noise_amp = spec.contrast;
            if (noise_amp > 0.0) v += rng.uniform(-noise_amp, noise_amp);
            const std::uint8_t px = clamp_pixel(v);
            for (int c = 0; c < spec.channels; ++c) img.at(x, y, c) = px;
        }
    }
    return img;
}

namespace {

std::size_t rasterize_blob(PixelMask& m, double cx, double cy, double ax, double ay) {
    std::size_t area = 0;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            const double dx = (x + 0.5 - cx) / ax;
            const double dy = (y + 0.5 - cy) / ay;
            if (dx * dx + dy * dy <= 1.0) {
                m.at(x, y) = 1;
                ++area;
            }
        }
    }
    return area;
}

std::size_t rasterize_scratch(PixelMask& m, double x0, double y0, double x1, double y1,
                              double thickness) {
    const double vx = x1 - x0, vy = y1 - y0;
    const double len2 = vx * vx + vy * vy;
    const double half = thickness / 2.0;
    std::size_t area = 0;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            const double px = x + 0.5 - x0, py = y + 0.5 - y0;
            const double t = std::clamp((px * vx + py * vy) / len2, 0.0, 1.0);
            const double dx = px - t * vx, dy = py - t * vy;
            if (dx * dx + dy * dy <= half * half) {
                m.at(x, y) = 1;
                ++area;
            }
        }
    }
    return area;
}

}  // namespace

PixelMask gen_mask(MaskShape shape, double size_fraction, std::uint64_t seed,
                   int width, int height) {
    if (size_fraction <= 0.0 || size_fraction > 0.9)
        throw InvalidArgument("mask size fraction must be in (0, 0.9]");
    Rng rng(derive_seed(seed, 0x3a5c0ffeull));
    const double target = size_fraction * width * height;

    if (shape == MaskShape::blob) {
        const double aspect = rng.uniform(1.0, 2.0);
        double ax = std::sqrt(target * aspect / M_PI);
        double ay = ax / aspect;
        // keep the ellipse inside the frame
        const double scale =
            std::min({1.0, (width / 2.0 - 1.0) / ax, (height / 2.0 - 1.0) / ay});
        ax = std::max(0.8, ax * scale);
        ay = std::max(0.8, ay * scale);
        const double cx = rng.uniform(ax + 0.5, width - ax - 0.5);
        const double cy = rng.uniform(ay + 0.5, height - ay - 0.5);
        PixelMask m(width, height);
        std::size_t area = rasterize_blob(m, cx, cy, ax, ay);
        // one corrective pass reins in discretization error
        for (int pass = 0; pass < 3 && area > 0; ++pass) {
            const double err = double(area) / target;
            if (std::abs(err - 1.0) <= 0.08) break;
            const double adj = std::sqrt(1.0 / err);
            ax *= adj;
            ay *= adj;
            m = PixelMask(width, height);
            area = rasterize_blob(m, cx, cy, ax, ay);
        }
        if (m.none_set()) m.at(int(cx), int(cy)) = 1;
        return m;
    }

    // scratch: near-axis thick segment, length/thickness >= 12
    const double ratio = rng.uniform(12.0, 18.0);
    double length = std::sqrt(target * ratio);
    double thickness = length / ratio;
    const bool horizontal = rng.bernoulli(0.5);
    const double max_len = (horizontal ? width : height) - 4.0;
    if (length > max_len) {
        length = max_len;
        thickness = target / length;
    }
    const double tilt = rng.uniform(-0.10, 0.10);  // radians, keeps box aspect > 4
    PixelMask m(width, height);
    std::size_t area = 0;
    for (int pass = 0; pass < 4; ++pass) {
        m = PixelMask(width, height);
        const double dx = horizontal ? std::cos(tilt) : std::sin(tilt);
        const double dy = horizontal ? std::sin(tilt) : std::cos(tilt);
        const double margin = thickness + 2.0;
        const double spanx = std::abs(dx) * length, spany = std::abs(dy) * length;
        Rng place(derive_seed(seed, 0xbeef00 + std::uint64_t(pass)));
        const double x0 = place.uniform(margin, std::max(margin + 1.0, width - spanx - margin));
        const double y0 = place.uniform(margin, std::max(margin + 1.0, height - spany - margin));
        area = rasterize_scratch(m, x0, y0, x0 + dx * length, y0 + dy * length, thickness);
        const double err = area > 0 ? double(area) / target : 0.0;
        if (area > 0 && std::abs(err - 1.0) <= 0.08) break;
        thickness *= area > 0 ? 1.0 / err : 1.5;
    }
    if (m.none_set()) m.at(width / 2, height / 2) = 1;
    return m;
}

namespace {

struct MaskGeometry {
    int minx, miny, maxx, maxy;
    std::vector<std::pair<int, int>> pixels;  // row-major
};

MaskGeometry mask_geometry(const PixelMask& mask) {
    MaskGeometry g{mask.width(), mask.height(), -1, -1, {}};
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) {
                g.pixels.emplace_back(x, y);
                g.minx = std::min(g.minx, x);
                g.miny = std::min(g.miny, y);
                g.maxx = std::max(g.maxx, x);
                g.maxy = std::max(g.maxy, y);
            }
    return g;
}

// Zero-mean texture patterns, one per defect type. Each has a distinct
// signature in (spread, roughness, pit depth, anisotropy) that the image-side
// encoder can recover.
std::vector<double> type_pattern(DefectType type, const MaskGeometry& g, Rng& rng) {
    const int bw = g.maxx - g.minx + 1, bh = g.maxy - g.miny + 1;
    const double cx = (g.minx + g.maxx + 1) / 2.0, cy = (g.miny + g.maxy + 1) / 2.0;
    const bool wide = bw >= bh;
    std::vector<double> pat(g.pixels.size(), 0.0);

    switch (type) {
        case DefectType::scratch: {
            // bands flipping every 2px along the major axis
            for (std::size_t p = 0; p < g.pixels.size(); ++p) {
                const int t = wide ? g.pixels[p].first : g.pixels[p].second;
                pat[p] = (t / 2) % 2 == 0 ? 26.0 : -26.0;
            }
            break;
        }
        case DefectType::stain: {
            for (std::size_t p = 0; p < g.pixels.size(); ++p) {
                const double dx = (g.pixels[p].first + 0.5 - cx) / (bw / 2.0 + 0.5);
                const double dy = (g.pixels[p].second + 0.5 - cy) / (bh / 2.0 + 0.5);
                const double r = std::min(1.0, std::sqrt(dx * dx + dy * dy));
                pat[p] = 14.0 * std::cos(M_PI * r);
            }
            break;
        }
        case DefectType::hole: {
            for (std::size_t p = 0; p < g.pixels.size(); ++p) {
                const double dx = (g.pixels[p].first + 0.5 - cx) / (bw / 2.0 + 0.5);
                const double dy = (g.pixels[p].second + 0.5 - cy) / (bh / 2.0 + 0.5);
                const double r2 = dx * dx + dy * dy;
                pat[p] = -95.0 * std::exp(-r2 / (2.0 * 0.35 * 0.35));
            }
            break;
        }
        case DefectType::crack: {
            // jagged dark path along the major axis
            const int span = wide ? bw : bh;
            std::vector<int> lateral(std::size_t(span), 0);
            int pos = wide ? int(cy) - g.miny : int(cx) - g.minx;
            const int lat_max = (wide ? bh : bw) - 1;
            for (int t = 0; t < span; ++t) {
                pos = std::clamp(pos + rng.uniform_int(-1, 1), 0, std::max(0, lat_max));
                lateral[std::size_t(t)] = pos;
            }
            for (std::size_t p = 0; p < g.pixels.size(); ++p) {
                const int t = wide ? g.pixels[p].first - g.minx : g.pixels[p].second - g.miny;
                const int l = wide ? g.pixels[p].second - g.miny : g.pixels[p].first - g.minx;
                if (std::abs(l - lateral[std::size_t(t)]) <= 1) pat[p] = -85.0;
            }
            break;
        }
        case DefectType::contamination: {
            for (std::size_t p = 0; p < g.pixels.size(); ++p) {
                if (rng.bernoulli(0.22))
                    pat[p] = rng.bernoulli(0.5) ? 46.0 : -46.0;
            }
            break;
        }
        case DefectType::discoloration:
            break;  // pure shift, no texture
    }

    double mean = 0.0;
    for (double v : pat) mean += v;
    mean /= double(pat.size());
    for (double& v : pat) v -= mean;  // exact zero mean before clamping
    return pat;
}

}  // namespace

SynthSample paint_defect(const Image& img, const PixelMask& mask,
                         const PromptRecord& prompt, const CorruptionPolicy& policy,
                         std::uint64_t seed) {
    if (img.width() != mask.width() || img.height() != mask.height())
        throw DimensionMismatch("paint_defect: image and mask dimensions differ");
    if (mask.none_set()) throw EmptyMask("paint_defect: empty mask");

    MaskGeometry g = mask_geometry(mask);
    const BoundingBox measured{double(g.minx) / mask.width(), double(g.miny) / mask.height(),
                               double(g.maxx + 1) / mask.width(),
                               double(g.maxy + 1) / mask.height()};
    const double tol = 0.02;
    if (std::abs(measured.x0 - prompt.location.x0) > tol ||
        std::abs(measured.y0 - prompt.location.y0) > tol ||
        std::abs(measured.x1 - prompt.location.x1) > tol ||
        std::abs(measured.y1 - prompt.location.y1) > tol)
        throw BoxMismatch("paint_defect: prompt box does not match the mask");

    Rng rng(derive_seed(seed, 0x9a127001ull));

    CorruptionMode mode = CorruptionMode::none;
    if (!policy.modes.empty() && rng.bernoulli(policy.inconsistent_fraction))
        mode = policy.modes[rng.next_below(policy.modes.size())];

    DefectType paint_type = prompt.type;
    std::array<double, 3> tone = prompt.color_tone;
    bool textured = true;

    switch (mode) {
        case CorruptionMode::none:
            break;
        case CorruptionMode::wrong_type: {
            const int shift = 1 + int(rng.next_below(kDefectTypeCount - 1));
            paint_type = DefectType((int(prompt.type) + shift) % kDefectTypeCount);
            break;
        }
        case CorruptionMode::wrong_color:
            // color fails to express the prompt: wrong direction and faint
            for (double& t : tone) t = -0.15 * t;
            break;
        case CorruptionMode::collapsed_texture:
            // flat smudge: no pattern, barely any of the prompted shift
            textured = false;
            for (double& t : tone) t = 0.12 * t;
            break;
    }

    std::vector<double> pat(g.pixels.size(), 0.0);
    if (textured && paint_type != DefectType::discoloration)
        pat = type_pattern(paint_type, g, rng);

    SynthSample sample{img, mask, prompt, seed, mode};
    for (std::size_t p = 0; p < g.pixels.size(); ++p) {
        const auto [x, y] = g.pixels[p];
        for (int c = 0; c < img.channels(); ++c) {
            const double v = double(img.at(x, y, c)) + tone[std::size_t(c)] * 127.0 + pat[p];
            sample.edited.at(x, y, c) = clamp_pixel(v);
        }
    }
    return sample;
}

}  // namespace anomsynth
