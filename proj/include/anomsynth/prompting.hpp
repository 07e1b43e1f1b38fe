#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "anomsynth/image.hpp"

namespace anomsynth {

enum class DefectType : int {
    scratch = 0,
    stain,
    hole,
    crack,
    contamination,
    discoloration,
};
constexpr int kDefectTypeCount = 6;

enum class DefectShape : int {
    elongated = 0,
    blob,
    irregular,
};
constexpr int kDefectShapeCount = 3;

const char* to_string(DefectType t);
const char* to_string(DefectShape s);
DefectType defect_type_from_string(const std::string& s);
DefectShape defect_shape_from_string(const std::string& s);

// normalized corner box, 0 <= x0 < x1 <= 1, same for y
struct BoundingBox {
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    double center_x() const { return (x0 + x1) / 2; }
    double center_y() const { return (y0 + y1) / 2; }
    double extent_x() const { return x1 - x0; }
    double extent_y() const { return y1 - y0; }
    double area() const { return extent_x() * extent_y(); }
    bool operator==(const BoundingBox&) const = default;
};

// Structured defect attributes; the text side of every consistency score.
struct PromptRecord {
    DefectType type = DefectType::scratch;
    BoundingBox location;
    double size = 1.0;                          // area fraction in (0, 1]
    std::array<double, 3> color_tone{0, 0, 0};  // per-channel shift in [-1, 1]
    DefectShape shape = DefectShape::blob;
    std::string rendered_text;

    double tone_mean() const {
        return (color_tone[0] + color_tone[1] + color_tone[2]) / 3.0;
    }
    bool operator==(const PromptRecord&) const = default;
};

// deterministic sentence, regenerable from the other fields
std::string render_prompt_text(const PromptRecord& p);

constexpr int kPromptDim = 16;

// Fixed feature layout shared by the text and image encoders.
//
//   [0..5]   defect type one-hot
//   [6..8]   shape one-hot
//   [9]      area fraction
//   [10]     mean color tone
//   [11,12]  box center
//   [13,14]  box extent
//   [15]     texture-collapse score (image side only; 0 for prompts)
namespace embed_layout {
constexpr int kType = 0;
constexpr int kShape = 6;
constexpr int kSize = 9;
constexpr int kTone = 10;
constexpr int kCenterX = 11;
constexpr int kCenterY = 12;
constexpr int kExtentX = 13;
constexpr int kExtentY = 14;
constexpr int kTextureCollapse = 15;
}  // namespace embed_layout

struct PromptEmbedding {
    std::array<double, kPromptDim> v{};
    std::span<const double> vec() const { return v; }
    double norm() const;
};

double cosine(const PromptEmbedding& a, const PromptEmbedding& b);

// Location and size are measured from the mask (tight box, exact area
// fraction); type, shape and tone are seeded draws.
PromptRecord sample_prompt(const PixelMask& mask, std::uint64_t seed);

// Unit-norm embedding of the record under the fixed layout.
PromptEmbedding embed_prompt(const PromptRecord& p);

struct Triplet {
    std::string image_ref;  // relative to the manifest directory
    std::string mask_ref;
    PromptRecord prompt;
    std::uint64_t seed = 0;
};

// For every normal image draw k masks from the pool (without replacement
// when the pool is large enough), resize them to the image, attach a seeded
// prompt, and write masks plus a JSON-lines manifest under out_dir.
std::vector<Triplet> build_triplets(const std::filesystem::path& normal_dir,
                                    const std::filesystem::path& mask_pool_dir,
                                    int k_masks_per_image, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

void write_manifest(const std::vector<Triplet>& triplets,
                    const std::filesystem::path& path);
std::vector<Triplet> read_manifest(const std::filesystem::path& path);

}  // namespace anomsynth
