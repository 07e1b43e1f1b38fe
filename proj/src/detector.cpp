#include "anomsynth/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "anomsynth/error.hpp"
#include "anomsynth/kernels.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

PatchScorer::PatchScorer(int window, std::vector<double> weights, double bias)
    : window_(window), weights_(std::move(weights)), bias_(bias) {
    if (window < 1 || window % 2 == 0)
        throw InvalidArgument("detector window must be a positive odd number");
    if (weights_.size() != feature_dim())
        throw InvalidArgument("detector weight vector has the wrong length");
    for (double v : weights_)
        if (!std::isfinite(v)) throw InvalidArgument("detector weights must be finite");
}

PatchScorer PatchScorer::zero(int window) {
    return PatchScorer(window, std::vector<double>(
                                   std::size_t(window) * window + 2, 0.0), 0.0);
}

namespace {

inline int reflect(int v, int n) {
    // reflect-101 style without repeating the border pixel
    while (v < 0 || v >= n) {
        if (v < 0) v = -v;
        if (v >= n) v = 2 * n - 2 - v;
    }
    return v;
}

constexpr double kIntensityScale = 1.0 / 255.0;

}  // namespace

void PatchScorer::gather_features(const Image& img, int x, int y,
                                  std::span<double> feat) const {
    const int r = window_ / 2;
    std::size_t off = 0;
    double sum = 0, sq = 0;
    for (int dy = -r; dy <= r; ++dy) {
        const int yy = reflect(y + dy, img.height());
        for (int dx = -r; dx <= r; ++dx) {
            const int xx = reflect(x + dx, img.width());
            const double v = img.intensity(xx, yy) * kIntensityScale;
            feat[off++] = v;
            sum += v;
            sq += v * v;
        }
    }
    const double n = double(window_) * window_;
    const double mean = sum / n;
    feat[off++] = mean;
    feat[off++] = std::max(0.0, sq / n - mean * mean);
}

double PatchScorer::logit_at(const Image& img, int x, int y) const {
    std::vector<double> feat(feature_dim());
    gather_features(img, x, y, feat);
    return kernels::dot(weights_, feat) + bias_;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct TrainItem {
    const Image* image;
    const PixelMask* truth;  // nullptr => all-zero labels
    double weight;
};

}  // namespace

PatchScorer train_detector(const std::vector<SynthSample>& synthetic,
                           std::span<const double> weights,
                           const std::vector<Image>& normals, const DetectorConfig& cfg) {
    if (!weights.empty() && weights.size() != synthetic.size())
        throw WeightLengthMismatch("train_detector: weight count does not match samples");
    for (double w : weights)
        if (w < 0 || !std::isfinite(w))
            throw InvalidArgument("train_detector: weights must be finite and >= 0");

    std::vector<TrainItem> items;
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        items.push_back({&synthetic[i].edited, &synthetic[i].mask, w});
    }
    for (const Image& img : normals) items.push_back({&img, nullptr, 1.0});

    bool any_signal = !normals.empty();
    for (const TrainItem& it : items) any_signal = any_signal || it.weight > 0;
    if (items.empty() || !any_signal)
        throw EmptyCorpus("train_detector: no gradient signal in the corpus");

    PatchScorer scorer = PatchScorer::zero(cfg.window);
    const std::size_t feat_dim = scorer.feature_dim();
    std::vector<double> feat(feat_dim);
    std::vector<double> grad(feat_dim);

    Rng rng(derive_seed(cfg.seed, 0xde7ec7ull));
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t oi : order) {
            const TrainItem& it = items[oi];
            if (it.weight == 0.0) continue;
            const Image& img = *it.image;
            if (img.width() < cfg.window || img.height() < cfg.window)
                throw ImageTooSmall("train_detector: image smaller than the window");

            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_bias = 0;
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    scorer.gather_features(img, x, y, feat);
                    const double z = kernels::dot(scorer.weights(), feat) + scorer.bias();
                    const double label = it.truth && it.truth->at(x, y) ? 1.0 : 0.0;
                    const double g = logistic(z) - label;
                    kernels::axpy(g, feat, grad);
                    grad_bias += g;
                }
            }
            const double step =
                -cfg.learning_rate * it.weight / double(img.pixel_count());
            kernels::axpy(step, grad, scorer.mutable_weights());
            scorer.mutable_bias() += step * grad_bias;
        }
    }
    return scorer;
}

Heatmap infer(const PatchScorer& scorer, const Image& img) {
    if (img.width() < scorer.window() || img.height() < scorer.window())
        throw ImageTooSmall("infer: image smaller than the detector window");
    Heatmap h;
    h.width = img.width();
    h.height = img.height();
    h.p.resize(img.pixel_count());
    std::vector<double> feat(scorer.feature_dim());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            scorer.gather_features(img, x, y, feat);
            h.p[std::size_t(y) * img.width() + x] =
                logistic(kernels::dot(scorer.weights(), feat) + scorer.bias());
        }
    return h;
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size())
        throw LengthMismatch("auroc: scores and labels differ in length");
    std::size_t n_pos = 0, n_neg = 0;
    for (double l : labels) {
        if (l != 0.0 && l != 1.0) throw InvalidArgument("auroc: labels must be 0 or 1");
        if (l == 1.0) ++n_pos; else ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0)
        throw SingleClass("auroc: both classes must be present");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double midrank = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[idx[k]] == 1.0) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos - double(n_pos) * (double(n_pos) + 1.0) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

namespace {

double image_score(const Heatmap& h, const DetectorConfig& cfg) {
    if (cfg.image_score == ImageScore::max)
        return *std::max_element(h.p.begin(), h.p.end());
    std::vector<double> sorted = h.p;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t k =
        std::max<std::size_t>(1, std::size_t(cfg.top_fraction * double(sorted.size())));
    double acc = 0;
    for (std::size_t i = 0; i < k; ++i) acc += sorted[i];
    return acc / double(k);
}

}  // namespace

EvalResult evaluate(const PatchScorer& scorer, const std::vector<TestCase>& cases,
                    const DetectorConfig& cfg) {
    if (cases.empty()) throw EmptyCorpus("evaluate: no test cases");

    struct Pool {
        std::vector<double> img_scores, img_labels;
        std::vector<double> px_scores, px_labels;
    };
    Pool all;
    std::map<std::string, Pool> by_cat;

    for (const TestCase& tc : cases) {
        if (tc.image.width() != tc.truth.width() || tc.image.height() != tc.truth.height())
            throw DimensionMismatch("evaluate: truth mask does not match image");
        const Heatmap h = infer(scorer, tc.image);
        const double s = image_score(h, cfg);
        const double label = tc.truth.none_set() ? 0.0 : 1.0;
        for (Pool* pool : {&all, &by_cat[tc.category]}) {
            pool->img_scores.push_back(s);
            pool->img_labels.push_back(label);
            for (std::size_t p = 0; p < h.p.size(); ++p) {
                pool->px_scores.push_back(h.p[p]);
                pool->px_labels.push_back(double(tc.truth.data()[p]));
            }
        }
    }

    EvalResult res;
    res.image_auroc = auroc(all.img_scores, all.img_labels);
    res.pixel_auroc = auroc(all.px_scores, all.px_labels);
    for (auto& [cat, pool] : by_cat) {
        const bool img_both =
            std::count(pool.img_labels.begin(), pool.img_labels.end(), 1.0) > 0 &&
            std::count(pool.img_labels.begin(), pool.img_labels.end(), 0.0) > 0;
        const bool px_both =
            std::count(pool.px_labels.begin(), pool.px_labels.end(), 1.0) > 0 &&
            std::count(pool.px_labels.begin(), pool.px_labels.end(), 0.0) > 0;
        if (img_both && px_both)
            res.per_category[cat] = {auroc(pool.img_scores, pool.img_labels),
                                     auroc(pool.px_scores, pool.px_labels)};
    }
    return res;
}

void write_heatmap(const Heatmap& h, const std::filesystem::path& path) {
    Image img(h.width, h.height, 1);
    for (std::size_t i = 0; i < h.p.size(); ++i)
        img.data()[i] = std::uint8_t(std::lround(std::clamp(h.p[i], 0.0, 1.0) * 255.0));
    write_image(img, path);
}

void save_detector(const PatchScorer& scorer, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["window"] = scorer.window();
    j["weights"] = std::vector<double>(scorer.weights().begin(), scorer.weights().end());
    j["bias"] = scorer.bias();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << j.dump() << "\n";
    if (!out) throw IoFailure("write failed: " + path.string());
}

PatchScorer load_detector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeader(path.string() + ": " + e.what());
    }
    return PatchScorer(j.at("window").get<int>(),
                       j.at("weights").get<std::vector<double>>(),
                       j.at("bias").get<double>());
}

}  // namespace anomsynth
