#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anomsynth/armodel.hpp"
#include "anomsynth/codec.hpp"
#include "anomsynth/image.hpp"
#include "anomsynth/prompting.hpp"

namespace anomsynth {

struct EditRequest {
    Image image;
    PixelMask mask;
    PromptRecord prompt;
    std::uint64_t seed = 0;
    std::optional<double> temperature;  // overrides the model default
};

struct EditResult {
    Image edited;
    TokenLattice lattice_before;
    TokenLattice lattice_after;
    IndexPartition partition;
    std::vector<Coord> order;  // visit order over the masked set
    double elapsed_seconds = 0;
};

struct GateVerdict {
    bool ok = true;
    Coord offending{};  // first violating context coordinate when !ok
};

// True iff `after` equals `before` on every context token.
GateVerdict gate_check(const TokenLattice& before, const TokenLattice& after,
                       const IndexPartition& partition);

// Fills the unknown positions of `state` in the given order, sampling each
// token from the model conditioned on context tokens, previously sampled
// tokens and the prompt. Context tokens are never touched: the hard gate is
// realized by construction.
void sample_masked(PartialLattice& state, const std::vector<Coord>& order,
                   const ArModel& model, const PromptEmbedding& prompt,
                   double temperature, Rng& rng);

// encode -> partition -> seeded uniform visit order -> masked-AR sampling ->
// decode -> pixel compositing (original bytes on context footprints).
EditResult edit(const EditRequest& req, const ArModel& model, const Codebook& cb);

struct EditOutcome {
    std::optional<EditResult> result;
    std::string error;
    bool ok() const { return result.has_value(); }
};

// Independent seeded edits; slot i of the output corresponds to request i and
// the results are identical to serial execution regardless of parallelism.
// Per-request failures land in their slot without aborting siblings.
std::vector<EditOutcome> edit_batch(const std::vector<EditRequest>& requests,
                                    const ArModel& model, const Codebook& cb,
                                    int parallelism);

}  // namespace anomsynth
