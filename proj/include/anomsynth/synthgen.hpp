#pragma once

#include <cstdint>
#include <vector>

#include "anomsynth/image.hpp"
#include "anomsynth/prompting.hpp"

namespace anomsynth {

enum class TextureKind : int { stripes = 0, checker, grain, rings };
const char* to_string(TextureKind k);
TextureKind texture_kind_from_string(const std::string& s);

struct TextureSpec {
    TextureKind kind = TextureKind::stripes;
    int width = 64;
    int height = 64;
    int channels = 1;
    int period = 8;          // pattern period in pixels
    int base = 128;          // base intensity
    int contrast = 40;       // pattern amplitude
    double noise_amp = 0.0;  // additive uniform noise amplitude
    std::uint64_t seed = 0;
};

// Deterministic per seed; with noise_amp == 0 the pattern repeats exactly at
// `period`.
Image gen_texture(const TextureSpec& spec);

enum class MaskShape : int { blob = 0, scratch };

// Random blob (filled ellipse) or near-axis scratch (thick segment) whose
// pixel area lands within +-10% of size_fraction * width * height.
PixelMask gen_mask(MaskShape shape, double size_fraction, std::uint64_t seed,
                   int width, int height);

enum class CorruptionMode : int { none = 0, wrong_type, wrong_color, collapsed_texture };
const char* to_string(CorruptionMode m);

struct CorruptionPolicy {
    double inconsistent_fraction = 0.0;  // probability a sample is corrupted
    std::vector<CorruptionMode> modes = {CorruptionMode::wrong_type,
                                         CorruptionMode::wrong_color,
                                         CorruptionMode::collapsed_texture};
};

struct SynthSample {
    Image edited;
    PixelMask mask;
    PromptRecord prompt;
    std::uint64_t seed = 0;
    CorruptionMode applied = CorruptionMode::none;
};

// Paints the masked region to express the prompt: the mean intensity of the
// region shifts by tone*127 and the texture pattern encodes the defect type.
// With probability inconsistent_fraction one corruption mode is applied while
// the PromptRecord is left unchanged, producing a prompt-inconsistent sample.
// Pixels with mask == 0 are never modified.
SynthSample paint_defect(const Image& img, const PixelMask& mask,
                         const PromptRecord& prompt, const CorruptionPolicy& policy,
                         std::uint64_t seed);

}  // namespace anomsynth
