#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "anomsynth/image.hpp"
#include "anomsynth/prompting.hpp"

namespace anomsynth {

enum class Calibration : int { softmax = 0, hinge };
const char* to_string(Calibration c);
Calibration calibration_from_string(const std::string& s);

struct WeightConfig {
    Calibration calibration = Calibration::softmax;
    double gamma = 2.5;  // softmax temperature in phi(s) = exp(gamma * s)
    double beta = 0.20;  // hinge threshold in phi(s) = max(0, s - beta)
};

// Image-side measurement of the edited defect region, mapped into the same
// layout as embed_prompt so cosine similarity compares like with like.
struct ImageSideEmbedding {
    std::array<double, kPromptDim> v{};

    // provenance measurements
    BoundingBox box;
    double area_fraction = 0;
    double color_shift = 0;       // mean(masked) - mean(dilation ring), in tone units
    DefectShape shape_class = DefectShape::blob;
    DefectType type_estimate = DefectType::scratch;
    double texture_collapse = 0;  // 1 - normalized within-defect spread

    // raw region statistics behind the type estimate, in tone units,
    // all measured as the excess over the dilation ring
    double spread = 0;     // rms residual
    double roughness = 0;  // rms neighbor difference
    double aniso = 0;      // absolute directional roughness imbalance
    double skew = 0;       // signed cube root of the third residual moment

    std::span<const double> vec() const { return v; }
};

ImageSideEmbedding embed_image_side(const Image& edited, const PixelMask& mask);

// Eq.-style consistency score: cosine of the two unit embeddings, in [-1, 1].
double score(const Image& edited, const PixelMask& mask, const PromptRecord& prompt);

struct WeightReport {
    std::vector<double> scores;
    std::vector<double> raw_phi;
    std::vector<double> weights;  // normalized so the batch mean is 1
    double mean_weight = 0;
};

// phi(s) per the calibration, then divide by the batch mean of phi. Throws
// DegenerateBatch when every raw weight is zero (all hinge-clipped) so the
// caller must decide whether to skip or re-draw the batch.
WeightReport calibrate_and_normalize(std::span<const double> scores,
                                     const WeightConfig& cfg);

struct VarianceReport {
    double var_loss = 0;
    double var_weighted_loss = 0;
    double cov_loss_score = 0;
    double cov_loss_phi = 0;
    // central finite difference of Var(w(gamma) * loss) at gamma = 0
    double dvar_dgamma_at_zero = 0;
};

VarianceReport variance_report(std::span<const double> losses,
                               std::span<const double> scores, const WeightConfig& cfg);

struct PopulationRiskResult {
    double estimate = 0;  // mean of per-batch weighted means
    double exact = 0;     // sum(phi * loss) / sum(phi) over the population
    double gap = 0;
    double standard_error = 0;  // of the batch-mean estimator
    int batches = 0;
    int batch_size = 0;
};

// Weights are normalized against the population mean of phi (computed once,
// like dataset-build time weights), so the batch-mean estimator is exactly
// unbiased for the reweighted population risk.
PopulationRiskResult reweighted_population_risk(std::span<const double> losses,
                                                std::span<const double> scores,
                                                const WeightConfig& cfg, int batch_size,
                                                int num_batches, std::uint64_t seed);

void write_weight_report_csv(const WeightReport& report,
                             const std::filesystem::path& path);

}  // namespace anomsynth
