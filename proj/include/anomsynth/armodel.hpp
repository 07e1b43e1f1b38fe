#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "anomsynth/codec.hpp"
#include "anomsynth/prompting.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

// Lattice state during masked sampling: a token is usable as conditioning
// context only once `known` is set; everything else reads as UNKNOWN.
struct PartialLattice {
    TokenLattice lattice;
    std::vector<std::uint8_t> known;

    static PartialLattice from_partition(const TokenLattice& z, const IndexPartition& part);
};

struct ArModelConfig {
    int K = 64;                 // codebook cardinality
    int prompt_dim = kPromptDim;
    int embed_width = 8;        // learned token embedding width
    int window_radius = 2;      // conditioning neighborhood radius
    double temperature = 0.7;   // sampling temperature
    std::uint64_t init_seed = 0;
};

// Conditional categorical model over codebook indices: a linear map from
// [window token embeddings, prompt embedding, normalized position] to K
// logits. Slot K of the token embedding table is the UNKNOWN token used for
// positions that are outside the lattice or not yet available.
class ArModel {
public:
    static ArModel random_init(const ArModelConfig& cfg);

    int K() const { return cfg_.K; }
    int prompt_dim() const { return cfg_.prompt_dim; }
    int embed_width() const { return cfg_.embed_width; }
    int window_radius() const { return cfg_.window_radius; }
    double temperature() const { return cfg_.temperature; }
    void set_temperature(double t);

    int window_cells() const {
        const int d = 2 * cfg_.window_radius + 1;
        return d * d;
    }
    std::size_t feature_dim() const {
        return std::size_t(window_cells()) * cfg_.embed_width + cfg_.prompt_dim + 2;
    }

    // Deterministic; depends only on the window around pos, the prompt and
    // the normalized position.
    void logits(const PartialLattice& state, Coord pos, const PromptEmbedding& prompt,
                std::span<double> out) const;

    void gather_features(const PartialLattice& state, Coord pos,
                         const PromptEmbedding& prompt, std::span<double> feat) const;

    // Certified upper bound (exact spectral norm) of the prompt weight block:
    // perturbing the prompt by delta moves the logit vector by at most
    // prompt_block_opnorm() * |delta|.
    double prompt_block_opnorm() const;

    std::span<const double> weights() const { return weights_; }
    std::span<const double> bias() const { return bias_; }
    std::span<const double> token_embedding(int token) const;

    // training accessors
    std::span<double> mutable_weights() { return weights_; }
    std::span<double> mutable_bias() { return bias_; }
    std::span<double> mutable_token_embed() { return token_embed_; }

    bool operator==(const ArModel&) const = default;

private:
    ArModel(ArModelConfig cfg, std::vector<double> token_embed, std::vector<double> weights,
            std::vector<double> bias);

    ArModelConfig cfg_;
    std::vector<double> token_embed_;  // (K+1) x embed_width
    std::vector<double> weights_;      // K x feature_dim
    std::vector<double> bias_;         // K

    friend void save_armodel(const ArModel&, const std::filesystem::path&);
    friend ArModel load_armodel(const std::filesystem::path&);
};

struct TrainConfig {
    int epochs = 200;  // the long-run reference setting is 2000
    double learning_rate = 0.05;
    int batch_size = 1;
    std::pair<double, double> mask_rate_range{0.2, 0.9};
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean cross-entropy per epoch
};

// Maximum likelihood under randomized masking that mirrors inference: draw a
// mask set and a visit order, reveal earlier positions with their true tokens
// (teacher forcing), predict the token at the visited position.
TrainResult train(ArModel& model,
                  const std::vector<std::pair<TokenLattice, PromptEmbedding>>& corpus,
                  const TrainConfig& cfg);

// Stable softmax with temperature; out sums to 1.
void softmax(std::span<const double> logits, double temperature, std::span<double> out);

// Categorical draw from softmax(logits / temperature). As temperature
// approaches 0 this becomes argmax.
int sample_token(std::span<const double> logits, double temperature, Rng& rng);

void write_loss_curve_csv(const TrainResult& result, const std::filesystem::path& path);
void save_armodel(const ArModel& model, const std::filesystem::path& path);
ArModel load_armodel(const std::filesystem::path& path);

}  // namespace anomsynth
