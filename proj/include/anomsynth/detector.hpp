#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "anomsynth/image.hpp"
#include "anomsynth/synthgen.hpp"

namespace anomsynth {

enum class ImageScore : int { max = 0, top_fraction_mean };

struct DetectorConfig {
    int window = 7;  // odd patch side
    int epochs = 60;
    double learning_rate = 2.0;
    std::uint64_t seed = 0;
    ImageScore image_score = ImageScore::max;
    double top_fraction = 0.01;  // used by top_fraction_mean
};

// Linear per-pixel scorer over [window intensities, local mean, local
// variance], squashed through a logistic.
class PatchScorer {
public:
    PatchScorer(int window, std::vector<double> weights, double bias);
    static PatchScorer zero(int window);

    int window() const { return window_; }
    std::size_t feature_dim() const { return std::size_t(window_) * window_ + 2; }
    std::span<const double> weights() const { return weights_; }
    double bias() const { return bias_; }

    // reflect padding at borders; deterministic
    double logit_at(const Image& img, int x, int y) const;

    void gather_features(const Image& img, int x, int y, std::span<double> feat) const;

    std::span<double> mutable_weights() { return weights_; }
    double& mutable_bias() { return bias_; }

private:
    int window_;
    std::vector<double> weights_;
    double bias_;
};

struct Heatmap {
    int width = 0, height = 0;
    std::vector<double> p;  // anomaly probability per pixel, in [0, 1]
    double at(int x, int y) const { return p[std::size_t(y) * width + x]; }
};

// Weighted risk: per-pixel binary cross-entropy where each synthetic sample's
// loss is scaled by its weight; real normals carry all-zero labels and unit
// weight.
PatchScorer train_detector(const std::vector<SynthSample>& synthetic,
                           std::span<const double> weights,
                           const std::vector<Image>& normals, const DetectorConfig& cfg);

Heatmap infer(const PatchScorer& scorer, const Image& img);

// Mann-Whitney AUROC with midrank ties: the probability a random positive
// outranks a random negative, ties counted half.
double auroc(std::span<const double> scores, std::span<const double> labels);

struct TestCase {
    Image image;
    PixelMask truth;  // all-zero for normal images
    std::string category = "all";
};

struct EvalResult {
    double image_auroc = 0;
    double pixel_auroc = 0;
    std::map<std::string, std::pair<double, double>> per_category;
};

// Pixel AUROC pools every pixel of every test case; image AUROC scores each
// image by the configured aggregate of its heatmap.
EvalResult evaluate(const PatchScorer& scorer, const std::vector<TestCase>& cases,
                    const DetectorConfig& cfg);

// heatmap as P5, probability scaled by 255 and rounded
void write_heatmap(const Heatmap& h, const std::filesystem::path& path);

void save_detector(const PatchScorer& scorer, const std::filesystem::path& path);
PatchScorer load_detector(const std::filesystem::path& path);

}  // namespace anomsynth
