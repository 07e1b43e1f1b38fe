#include "anomsynth/qaw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "anomsynth/error.hpp"
#include "anomsynth/kernels.hpp"
#include "anomsynth/numeric.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

const char* to_string(Calibration c) { return c == Calibration::softmax ? "softmax" : "hinge"; }

Calibration calibration_from_string(const std::string& s) {
    if (s == "softmax") return Calibration::softmax;
    if (s == "hinge") return Calibration::hinge;
    throw InvalidArgument("unknown calibration: " + s);
}

namespace {

// Texture statistics of the painted region, in tone units (/127), all
// measured as the excess over the surrounding ring.
struct RegionStats {
    double spread = 0;     // rms residual
    double roughness = 0;  // rms neighbor difference
    double aniso = 0;      // absolute directional imbalance of the roughness
    double skew = 0;       // cube root of the third residual moment (signed)
};

// Measured signatures of the defect painter's per-type patterns
// (mean stats over seeded paints on flat backgrounds; see test fixtures).
struct TypeSignature {
    DefectType type;
    RegionStats stats;
};

constexpr TypeSignature kTypeSignatures[kDefectTypeCount] = {
    {DefectType::scratch, {0.197, 0.202, 0.277, 0.034}},
    {DefectType::stain, {0.065, 0.041, 0.050, 0.023}},
    {DefectType::hole, {0.185, 0.078, 0.095, -0.120}},
    {DefectType::crack, {0.268, 0.248, 0.180, -0.150}},
    {DefectType::contamination, {0.158, 0.228, 0.094, 0.021}},
    {DefectType::discoloration, {0.013, 0.034, 0.042, -0.004}},
};

// per-stat scales, set to the pooled spread of each statistic across the
// calibration paints
constexpr double kStatScale[4] = {0.035, 0.035, 0.05, 0.15};

double signature_distance(const RegionStats& a, const RegionStats& b) {
    const double d0 = (a.spread - b.spread) / kStatScale[0];
    const double d1 = (a.roughness - b.roughness) / kStatScale[1];
    const double d2 = (a.aniso - b.aniso) / kStatScale[2];
    const double d3 = (a.skew - b.skew) / kStatScale[3];
    return d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
}

DefectType classify_type(const RegionStats& s) {
    int best = 0;
    double best_d = signature_distance(s, kTypeSignatures[0].stats);
    for (int k = 1; k < kDefectTypeCount; ++k) {
        const double d = signature_distance(s, kTypeSignatures[k].stats);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return kTypeSignatures[best].type;
}

constexpr double kCollapseSpreadRef = 0.10;  // spread of a clearly textured defect

}  // namespace

ImageSideEmbedding embed_image_side(const Image& edited, const PixelMask& mask) {
    if (edited.width() != mask.width() || edited.height() != mask.height())
        throw DimensionMismatch("embed_image_side: image and mask dimensions differ");
    if (mask.none_set()) throw EmptyMask("embed_image_side: empty mask");

    const int W = mask.width(), H = mask.height();
    int minx = W, miny = H, maxx = -1, maxy = -1;
    std::size_t area = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (mask.at(x, y)) {
                ++area;
                minx = std::min(minx, x);
                miny = std::min(miny, y);
                maxx = std::max(maxx, x);
                maxy = std::max(maxy, y);
            }

    ImageSideEmbedding e;
    e.box = {double(minx) / W, double(miny) / H, double(maxx + 1) / W,
             double(maxy + 1) / H};
    e.area_fraction = double(area) / (double(W) * H);

    // membership map: 1 = defect region, 2 = 3-pixel dilation ring
    std::vector<std::uint8_t> zone(std::size_t(W) * H, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (mask.at(x, y)) {
                zone[std::size_t(y) * W + x] = 1;
                continue;
            }
            for (int dy = -3; dy <= 3; ++dy)
                for (int dx = -3; dx <= 3; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < W && ny < H && mask.at(nx, ny)) {
                        zone[std::size_t(y) * W + x] = 2;
                        dy = dx = 4;
                    }
                }
        }
    }

    // first and second moments per zone, plus RMS neighbor differences; all
    // defect statistics are measured as the excess over the ring, so the
    // background texture showing through the paint cancels out
    double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
    std::size_t cnt[3] = {0, 0, 0};
    double dx2[3] = {0, 0, 0}, dy2[3] = {0, 0, 0};
    std::size_t ndx[3] = {0, 0, 0}, ndy[3] = {0, 0, 0};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int z = zone[std::size_t(y) * W + x];
            if (!z) continue;
            const double v = edited.intensity(x, y);
            sum[z] += v;
            sq[z] += v * v;
            ++cnt[z];
            if (x + 1 < W && zone[std::size_t(y) * W + x + 1] == z) {
                const double d = edited.intensity(x + 1, y) - v;
                dx2[z] += d * d;
                ++ndx[z];
            }
            if (y + 1 < H && zone[std::size_t(y + 1) * W + x] == z) {
                const double d = edited.intensity(x, y + 1) - v;
                dy2[z] += d * d;
                ++ndy[z];
            }
        }
    }
    const double mask_mean = sum[1] / double(cnt[1]);
    const double ring_mean = cnt[2] ? sum[2] / double(cnt[2]) : mask_mean;
    e.color_shift = std::clamp((mask_mean - ring_mean) / 127.0, -1.0, 1.0);

    auto var_of = [&](int z) {
        if (!cnt[z]) return 0.0;
        const double m = sum[z] / double(cnt[z]);
        return std::max(0.0, sq[z] / double(cnt[z]) - m * m);
    };
    const double var_in = var_of(1), var_ring = var_of(2);

    RegionStats st;
    st.spread = std::sqrt(std::max(0.0, var_in - var_ring)) / 127.0;

    auto rms2 = [](double acc, std::size_t n) { return n ? acc / double(n) : 0.0; };
    const double ex_dx2 = std::max(0.0, rms2(dx2[1], ndx[1]) - rms2(dx2[2], ndx[2]));
    const double ex_dy2 = std::max(0.0, rms2(dy2[1], ndy[1]) - rms2(dy2[2], ndy[2]));
    st.roughness = std::sqrt((ex_dx2 + ex_dy2) / 2.0) / 127.0;
    st.aniso = std::sqrt(std::abs(ex_dx2 - ex_dy2)) / 127.0;

    // symmetric background textures contribute nothing to the third moment,
    // so the signed skew isolates pit-like patterns without ring subtraction
    double m3 = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (mask.at(x, y)) {
                const double r = edited.intensity(x, y) - mask_mean;
                m3 += r * r * r;
            }
    st.skew = std::cbrt(m3 / double(area)) / 127.0;

    e.texture_collapse = std::clamp(1.0 - st.spread / kCollapseSpreadRef, 0.0, 1.0);
    e.type_estimate = classify_type(st);
    e.spread = st.spread;
    e.roughness = st.roughness;
    e.aniso = st.aniso;
    e.skew = st.skew;

    const int bw = maxx - minx + 1, bh = maxy - miny + 1;
    const double aspect = double(std::max(bw, bh)) / double(std::min(bw, bh));
    const double fill = double(area) / (double(bw) * bh);
    if (aspect >= 3.0)
        e.shape_class = DefectShape::elongated;
    else if (fill >= 0.5)
        e.shape_class = DefectShape::blob;
    else
        e.shape_class = DefectShape::irregular;

    e.v[embed_layout::kType + int(e.type_estimate)] = 1.0;
    e.v[embed_layout::kShape + int(e.shape_class)] = 1.0;
    e.v[embed_layout::kSize] = e.area_fraction;
    e.v[embed_layout::kTone] = e.color_shift;
    e.v[embed_layout::kCenterX] = e.box.center_x();
    e.v[embed_layout::kCenterY] = e.box.center_y();
    e.v[embed_layout::kExtentX] = e.box.extent_x();
    e.v[embed_layout::kExtentY] = e.box.extent_y();
    e.v[embed_layout::kTextureCollapse] = e.texture_collapse;
    const double n = std::sqrt(kernels::dot(e.v, e.v));
    for (double& x : e.v) x /= n;
    return e;
}

double score(const Image& edited, const PixelMask& mask, const PromptRecord& prompt) {
    const ImageSideEmbedding img_side = embed_image_side(edited, mask);
    const PromptEmbedding txt_side = embed_prompt(prompt);
    return kernels::dot(img_side.v, txt_side.v);
}

namespace {

std::vector<double> raw_weights(std::span<const double> scores, const WeightConfig& cfg) {
    std::vector<double> phi(scores.size());
    if (cfg.calibration == Calibration::softmax) {
        if (cfg.gamma <= 0) throw InvalidArgument("softmax calibration needs gamma > 0");
        for (std::size_t i = 0; i < scores.size(); ++i)
            phi[i] = std::exp(cfg.gamma * scores[i]);
    } else {
        if (cfg.beta < -1.0 || cfg.beta >= 1.0)
            throw InvalidArgument("hinge calibration needs beta in [-1, 1)");
        for (std::size_t i = 0; i < scores.size(); ++i)
            phi[i] = std::max(0.0, scores[i] - cfg.beta);
    }
    return phi;
}

}  // namespace

WeightReport calibrate_and_normalize(std::span<const double> scores,
                                     const WeightConfig& cfg) {
    if (scores.empty()) throw InvalidArgument("calibrate_and_normalize: empty batch");
    WeightReport r;
    r.scores.assign(scores.begin(), scores.end());
    r.raw_phi = raw_weights(scores, cfg);
    const double total = stable_sum(r.raw_phi);
    if (total <= 0.0)
        throw DegenerateBatch("all raw weights are zero; skip or re-draw the batch");
    const double mean_phi = total / double(scores.size());
    r.weights.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) r.weights[i] = r.raw_phi[i] / mean_phi;
    r.mean_weight = stable_sum(r.weights) / double(scores.size());
    return r;
}

namespace {

// Var(w(gamma) * loss) with self-normalized softmax weights.
double weighted_variance_at_gamma(std::span<const double> losses,
                                  std::span<const double> scores, double gamma) {
    std::vector<double> phi(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) phi[i] = std::exp(gamma * scores[i]);
    const double mean_phi = stable_sum(phi) / double(phi.size());
    std::vector<double> wl(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        wl[i] = phi[i] / mean_phi * losses[i];
    return variance(wl);
}

}  // namespace

VarianceReport variance_report(std::span<const double> losses,
                               std::span<const double> scores, const WeightConfig& cfg) {
    if (losses.size() != scores.size())
        throw LengthMismatch("variance_report: losses and scores differ in length");
    if (losses.size() < 2)
        throw LengthMismatch("variance_report: need at least two samples");

    VarianceReport r;
    r.var_loss = variance(losses);
    const WeightReport wr = calibrate_and_normalize(scores, cfg);
    std::vector<double> wl(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) wl[i] = wr.weights[i] * losses[i];
    r.var_weighted_loss = variance(wl);
    r.cov_loss_score = covariance(losses, scores);
    r.cov_loss_phi = covariance(losses, wr.raw_phi);

    const double eps = 1e-5;
    r.dvar_dgamma_at_zero = (weighted_variance_at_gamma(losses, scores, eps) -
                             weighted_variance_at_gamma(losses, scores, -eps)) /
                            (2 * eps);
    return r;
}

PopulationRiskResult reweighted_population_risk(std::span<const double> losses,
                                                std::span<const double> scores,
                                                const WeightConfig& cfg, int batch_size,
                                                int num_batches, std::uint64_t seed) {
    if (losses.size() != scores.size())
        throw LengthMismatch("reweighted_population_risk: length mismatch");
    if (losses.empty()) throw DegeneratePopulation("empty population");
    if (batch_size < 1 || num_batches < 1)
        throw InvalidArgument("batch_size and num_batches must be positive");

    const std::vector<double> phi = raw_weights(scores, cfg);
    const double total_phi = stable_sum(phi);
    if (total_phi <= 0.0)
        throw DegeneratePopulation("all raw weights are zero over the population");
    const double mean_phi = total_phi / double(phi.size());

    double exact_num = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) exact_num += phi[i] * losses[i];

    PopulationRiskResult r;
    r.exact = exact_num / total_phi;
    r.batch_size = batch_size;
    r.batches = num_batches;

    Rng rng(derive_seed(seed, 0x5e1f4042ull));
    std::vector<double> estimates(std::size_t(num_batches), 0.0);
    for (int b = 0; b < num_batches; ++b) {
        double acc = 0;
        for (int k = 0; k < batch_size; ++k) {
            const std::size_t i = rng.next_below(losses.size());
            acc += phi[i] / mean_phi * losses[i];
        }
        estimates[std::size_t(b)] = acc / double(batch_size);
    }
    r.estimate = mean(estimates);
    r.standard_error =
        num_batches > 1 ? std::sqrt(variance(estimates) / double(num_batches - 1)) : 0.0;
    r.gap = r.estimate - r.exact;
    return r;
}

void write_weight_report_csv(const WeightReport& report,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << "index,s,phi,w\n";
    char buf[128];
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, report.scores[i],
                      report.raw_phi[i], report.weights[i]);
        out << buf;
    }
    if (!out) throw IoFailure("write failed: " + path.string());
}

}  // namespace anomsynth
