#include "anomsynth/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

#include "anomsynth/error.hpp"

namespace anomsynth {

GateVerdict gate_check(const TokenLattice& before, const TokenLattice& after,
                       const IndexPartition& partition) {
    if (!before.same_shape(after) || before.codebook_id != after.codebook_id)
        throw ShapeMismatch("gate_check: lattices are not comparable");
    if (before.h != partition.h || before.w != partition.w)
        throw ShapeMismatch("gate_check: partition shape does not match");
    for (int i = 0; i < before.h; ++i)
        for (int j = 0; j < before.w; ++j)
            if (!partition.is_masked(i, j) && before.at(i, j) != after.at(i, j))
                return {false, {i, j}};
    return {true, {}};
}

void sample_masked(PartialLattice& state, const std::vector<Coord>& order,
                   const ArModel& model, const PromptEmbedding& prompt,
                   double temperature, Rng& rng) {
    std::vector<double> logit(std::size_t(model.K()), 0.0);
    for (const Coord& pos : order) {
        model.logits(state, pos, prompt, logit);
        const int token = sample_token(logit, temperature, rng);
        state.lattice.at(pos.i, pos.j) = std::uint16_t(token);
        state.known[std::size_t(pos.i) * state.lattice.w + pos.j] = 1;
    }
}

EditResult edit(const EditRequest& req, const ArModel& model, const Codebook& cb) {
    const auto t0 = std::chrono::steady_clock::now();
    if (model.K() != cb.K())
        throw CodebookMismatch("edit: model and codebook cardinality differ");
    if (req.image.width() != req.mask.width() || req.image.height() != req.mask.height())
        throw DimensionMismatch("edit: image and mask dimensions differ");
    if (req.mask.none_set()) throw EmptyMask("edit: mask has no set pixels");

    EditResult res;
    res.lattice_before = encode(req.image, cb);
    res.partition = mask_to_partition(req.mask, cb.patch_size());
    res.order = res.partition.masked();
    if (res.order.empty())
        throw DegenerateMask("edit: no masked tokens despite a nonempty mask");

    Rng rng(derive_seed(req.seed, 0xed17ull));
    rng.shuffle(res.order);

    PartialLattice state = PartialLattice::from_partition(res.lattice_before, res.partition);
    const double temperature = req.temperature.value_or(model.temperature());
    const PromptEmbedding prompt = embed_prompt(req.prompt);
    sample_masked(state, res.order, model, prompt, temperature, rng);
    res.lattice_after = state.lattice;

    const Image decoded = decode(res.lattice_after, cb);

    // composite: original bytes on context footprints, decoded bytes on
    // masked footprints
    res.edited = decoded;
    const int p = cb.patch_size();
    const std::size_t row_bytes = std::size_t(p) * cb.channels();
    const std::size_t img_row = std::size_t(req.image.width()) * cb.channels();
    for (int i = 0; i < res.partition.h; ++i) {
        for (int j = 0; j < res.partition.w; ++j) {
            if (res.partition.is_masked(i, j)) continue;
            for (int py = 0; py < p; ++py) {
                const std::size_t off =
                    std::size_t(i * p + py) * img_row + std::size_t(j * p) * cb.channels();
                std::memcpy(res.edited.data().data() + off,
                            req.image.data().data() + off, row_bytes);
            }
        }
    }

    const GateVerdict verdict = gate_check(res.lattice_before, res.lattice_after, res.partition);
    if (!verdict.ok)
        throw Error("edit: gate violation at (" + std::to_string(verdict.offending.i) +
                    "," + std::to_string(verdict.offending.j) + ")");

    res.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<EditOutcome> edit_batch(const std::vector<EditRequest>& requests,
                                    const ArModel& model, const Codebook& cb,
                                    int parallelism) {
    std::vector<EditOutcome> outcomes(requests.size());
    if (requests.empty()) return outcomes;
    auto run_one = [&](std::size_t i) {
        try {
            outcomes[i].result = edit(requests[i], model, cb);
        } catch (const std::exception& e) {
            outcomes[i].error = e.what();
        }
    };

    const int workers = std::clamp<int>(parallelism, 1, int(requests.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) run_one(i);
        return outcomes;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= requests.size()) return;
                run_one(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
    return outcomes;
}

}  // namespace anomsynth
