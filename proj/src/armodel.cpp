#include "anomsynth/armodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "anomsynth/error.hpp"
#include "anomsynth/kernels.hpp"
#include "anomsynth/numeric.hpp"

namespace anomsynth {

PartialLattice PartialLattice::from_partition(const TokenLattice& z,
                                              const IndexPartition& part) {
    if (z.h != part.h || z.w != part.w)
        throw ShapeMismatch("partition does not match lattice shape");
    PartialLattice s;
    s.lattice = z;
    s.known.resize(z.tokens.size());
    for (std::size_t t = 0; t < z.tokens.size(); ++t)
        s.known[t] = part.masked_flags[t] ? 0 : 1;
    return s;
}

ArModel::ArModel(ArModelConfig cfg, std::vector<double> token_embed,
                 std::vector<double> weights, std::vector<double> bias)
    : cfg_(cfg),
      token_embed_(std::move(token_embed)),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
    if (cfg_.K < 2) throw InvalidArgument("ArModel needs K >= 2");
    if (cfg_.temperature <= 0) throw InvalidArgument("temperature must be positive");
    if (cfg_.window_radius < 0) throw InvalidArgument("window radius must be >= 0");
    const std::size_t embed_len = std::size_t(cfg_.K + 1) * cfg_.embed_width;
    if (token_embed_.size() != embed_len || bias_.size() != std::size_t(cfg_.K) ||
        weights_.size() != std::size_t(cfg_.K) * feature_dim())
        throw InvalidArgument("ArModel parameter sizes are inconsistent");
    for (double v : weights_)
        if (!std::isfinite(v)) throw InvalidArgument("ArModel weights must be finite");
}

ArModel ArModel::random_init(const ArModelConfig& cfg) {
    const int cells = (2 * cfg.window_radius + 1) * (2 * cfg.window_radius + 1);
    const std::size_t feat = std::size_t(cells) * cfg.embed_width + cfg.prompt_dim + 2;
    Rng rng(derive_seed(cfg.init_seed, 0xa20d31ull));
    std::vector<double> embed(std::size_t(cfg.K + 1) * cfg.embed_width);
    for (double& v : embed) v = rng.uniform(-0.5, 0.5);
    std::vector<double> weights(std::size_t(cfg.K) * feat);
    for (double& v : weights) v = rng.uniform(-0.05, 0.05);
    std::vector<double> bias(std::size_t(cfg.K), 0.0);
    return ArModel(cfg, std::move(embed), std::move(weights), std::move(bias));
}

void ArModel::set_temperature(double t) {
    if (t <= 0) throw InvalidArgument("temperature must be positive");
    cfg_.temperature = t;
}

std::span<const double> ArModel::token_embedding(int token) const {
    return {token_embed_.data() + std::size_t(token) * cfg_.embed_width,
            std::size_t(cfg_.embed_width)};
}

void ArModel::gather_features(const PartialLattice& state, Coord pos,
                              const PromptEmbedding& prompt,
                              std::span<double> feat) const {
    const TokenLattice& z = state.lattice;
    if (pos.i < 0 || pos.j < 0 || pos.i >= z.h || pos.j >= z.w)
        throw OutOfBounds("logits position outside the lattice");
    const int r = cfg_.window_radius;
    const int e = cfg_.embed_width;
    std::size_t off = 0;
    for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
            const int i = pos.i + di, j = pos.j + dj;
            int token = cfg_.K;  // UNKNOWN
            if (i >= 0 && j >= 0 && i < z.h && j < z.w &&
                state.known[std::size_t(i) * z.w + j])
                token = z.at(i, j);
            const auto emb = token_embedding(token);
            std::copy(emb.begin(), emb.end(), feat.begin() + std::ptrdiff_t(off));
            off += std::size_t(e);
        }
    }
    std::copy(prompt.v.begin(), prompt.v.end(), feat.begin() + std::ptrdiff_t(off));
    off += std::size_t(cfg_.prompt_dim);
    feat[off++] = (pos.i + 0.5) / z.h;
    feat[off++] = (pos.j + 0.5) / z.w;
}

void ArModel::logits(const PartialLattice& state, Coord pos,
                     const PromptEmbedding& prompt, std::span<double> out) const {
    const std::size_t feat_dim = feature_dim();
    std::vector<double> feat(feat_dim);
    gather_features(state, pos, prompt, feat);
    for (int k = 0; k < cfg_.K; ++k)
        out[std::size_t(k)] =
            kernels::dot({weights_.data() + std::size_t(k) * feat_dim, feat_dim}, feat) +
            bias_[std::size_t(k)];
}

double ArModel::prompt_block_opnorm() const {
    const std::size_t feat_dim = feature_dim();
    const std::size_t prompt_off = std::size_t(window_cells()) * cfg_.embed_width;
    std::vector<double> block(std::size_t(cfg_.K) * cfg_.prompt_dim);
    for (int k = 0; k < cfg_.K; ++k)
        for (int d = 0; d < cfg_.prompt_dim; ++d)
            block[std::size_t(k) * cfg_.prompt_dim + d] =
                weights_[std::size_t(k) * feat_dim + prompt_off + d];
    return spectral_norm(block, std::size_t(cfg_.K), std::size_t(cfg_.prompt_dim));
}

void softmax(std::span<const double> logits, double temperature, std::span<double> out) {
    if (temperature <= 0) throw InvalidArgument("softmax temperature must be positive");
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double total = 0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp((logits[k] - max_logit) / temperature);
        total += out[k];
    }
    for (std::size_t k = 0; k < logits.size(); ++k) out[k] /= total;
}

int sample_token(std::span<const double> logits, double temperature, Rng& rng) {
    std::vector<double> probs(logits.size());
    softmax(logits, temperature, probs);
    const double u = rng.next_unit();
    double cum = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        cum += probs[k];
        if (u < cum) return int(k);
    }
    return int(probs.size() - 1);  // fp edge
}

TrainResult train(ArModel& model,
                  const std::vector<std::pair<TokenLattice, PromptEmbedding>>& corpus,
                  const TrainConfig& cfg) {
    if (corpus.empty()) throw EmptyTrainingSet("train: no lattices");
    if (cfg.epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
    if (cfg.mask_rate_range.first <= 0 || cfg.mask_rate_range.second >= 1 ||
        cfg.mask_rate_range.first > cfg.mask_rate_range.second)
        throw InvalidArgument("train: mask_rate_range must lie inside (0, 1)");
    for (const auto& [z, prompt] : corpus) {
        (void)prompt;
        if (z.K != model.K())
            throw ShapeMismatch("train: lattice K does not match the model");
    }

    const std::size_t feat_dim = model.feature_dim();
    const int K = model.K();
    const int e = model.embed_width();
    const int batch = std::max(1, cfg.batch_size);

    std::vector<double> feat(feat_dim);
    std::vector<double> logit(std::size_t(K), 0.0);
    std::vector<double> probs(std::size_t(K), 0.0);
    std::vector<double> grad_w(model.mutable_weights().size());
    std::vector<double> grad_b(std::size_t(K), 0.0);
    std::vector<double> grad_e(model.mutable_token_embed().size());
    std::vector<double> grad_feat(feat_dim);

    TrainResult result;
    Rng rng(derive_seed(cfg.seed, 0x7de41011ull));

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t epoch_preds = 0;
        std::size_t in_batch = 0;

        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        std::fill(grad_e.begin(), grad_e.end(), 0.0);

        auto apply = [&](std::size_t count) {
            const double step = -cfg.learning_rate / double(count);
            kernels::axpy(step, grad_w, model.mutable_weights());
            kernels::axpy(step, grad_b, model.mutable_bias());
            kernels::axpy(step, grad_e, model.mutable_token_embed());
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);
            std::fill(grad_e.begin(), grad_e.end(), 0.0);
        };

        for (std::size_t oi = 0; oi < order.size(); ++oi) {
            const auto& [z, prompt] = corpus[order[oi]];
            const std::size_t n = z.tokens.size();

            // random mask set at a random rate, at least one position
            const double rate =
                rng.uniform(cfg.mask_rate_range.first, cfg.mask_rate_range.second);
            std::vector<Coord> masked;
            for (int i = 0; i < z.h; ++i)
                for (int j = 0; j < z.w; ++j)
                    if (rng.bernoulli(rate)) masked.push_back({i, j});
            if (masked.empty())
                masked.push_back({int(rng.next_below(std::uint64_t(z.h))),
                                  int(rng.next_below(std::uint64_t(z.w)))});
            rng.shuffle(masked);

            PartialLattice state;
            state.lattice = z;
            state.known.assign(n, 1);
            for (const Coord& c : masked) state.known[std::size_t(c.i) * z.w + c.j] = 0;

            double sample_loss = 0;
            const double inv = 1.0 / double(masked.size());
            for (const Coord& pos : masked) {
                model.gather_features(state, pos, prompt, feat);
                for (int k = 0; k < K; ++k)
                    logit[std::size_t(k)] =
                        kernels::dot({model.weights().data() + std::size_t(k) * feat_dim,
                                      feat_dim},
                                     feat) +
                        model.bias()[std::size_t(k)];
                softmax(logit, 1.0, probs);
                const int label = z.at(pos.i, pos.j);
                sample_loss += -std::log(std::max(probs[std::size_t(label)], 1e-300));

                std::fill(grad_feat.begin(), grad_feat.end(), 0.0);
                for (int k = 0; k < K; ++k) {
                    const double g =
                        (probs[std::size_t(k)] - (k == label ? 1.0 : 0.0)) * inv;
                    kernels::axpy(g, feat,
                                  {grad_w.data() + std::size_t(k) * feat_dim, feat_dim});
                    grad_b[std::size_t(k)] += g;
                    kernels::axpy(
                        g, {model.weights().data() + std::size_t(k) * feat_dim, feat_dim},
                        grad_feat);
                }
                // route the feature gradient into the window token embeddings
                const int r = model.window_radius();
                int cell = 0;
                for (int di = -r; di <= r; ++di) {
                    for (int dj = -r; dj <= r; ++dj, ++cell) {
                        const int ii = pos.i + di, jj = pos.j + dj;
                        int token = K;
                        if (ii >= 0 && jj >= 0 && ii < z.h && jj < z.w &&
                            state.known[std::size_t(ii) * z.w + jj])
                            token = z.at(ii, jj);
                        kernels::axpy(
                            1.0,
                            {grad_feat.data() + std::size_t(cell) * e, std::size_t(e)},
                            {grad_e.data() + std::size_t(token) * e, std::size_t(e)});
                    }
                }

                // teacher forcing: reveal the true token before moving on
                state.known[std::size_t(pos.i) * z.w + pos.j] = 1;
            }

            epoch_loss += sample_loss;
            epoch_preds += masked.size();
            if (++in_batch == std::size_t(batch)) {
                apply(std::size_t(batch));
                in_batch = 0;
            }
        }
        if (in_batch) apply(in_batch);
        result.loss_curve.push_back(epoch_loss / double(epoch_preds));
    }
    return result;
}

void write_loss_curve_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.loss_curve[i]);
        out << buf;
    }
    if (!out) throw IoFailure("write failed: " + path.string());
}

void save_armodel(const ArModel& model, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["K"] = model.cfg_.K;
    j["prompt_dim"] = model.cfg_.prompt_dim;
    j["embed_width"] = model.cfg_.embed_width;
    j["window_radius"] = model.cfg_.window_radius;
    j["temperature"] = model.cfg_.temperature;
    j["token_embed"] = model.token_embed_;
    j["weights"] = model.weights_;
    j["bias"] = model.bias_;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << j.dump() << "\n";
    if (!out) throw IoFailure("write failed: " + path.string());
}

ArModel load_armodel(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeader(path.string() + ": " + e.what());
    }
    ArModelConfig cfg;
    cfg.K = j.at("K").get<int>();
    cfg.prompt_dim = j.at("prompt_dim").get<int>();
    cfg.embed_width = j.at("embed_width").get<int>();
    cfg.window_radius = j.at("window_radius").get<int>();
    cfg.temperature = j.at("temperature").get<double>();
    return ArModel(cfg, j.at("token_embed").get<std::vector<double>>(),
                   j.at("weights").get<std::vector<double>>(),
                   j.at("bias").get<std::vector<double>>());
}

}  // namespace anomsynth
