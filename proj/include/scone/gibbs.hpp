#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "scone/core.hpp"
#include "scone/toy_lm.hpp"

namespace scone {

enum class GibbsInit { crude_autoregressive, uniform_random };

// How a block is resampled. The sweep refreshes positions left-to-right,
// each conditioned on the freshest local state; the enumeration variant
// draws the block jointly from its exact conditional (tabular models only)
// and exists for oracle comparisons.
enum class BlockMode { sequential_sweep, joint_enumeration };

struct GibbsConfig {
    int32_t chains = 2;
    int32_t iterations = 20;  // N, block updates per chain
    int32_t thinning = 5;
    int32_t block_size = 2;   // B
    int32_t workers = 1;      // W
    int32_t lookahead = 0;    // delta, number of free continuation positions
    GibbsInit init = GibbsInit::crude_autoregressive;
    BlockMode block_mode = BlockMode::sequential_sweep;

    // Burn-in is ceil(N/2); a state is collected at iteration t when
    // t > burn_in and (t - burn_in) % thinning == 0.
    int32_t burn_in() const { return (iterations + 1) / 2; }
    int32_t samples_per_chain() const { return (iterations - burn_in()) / thinning; }

    void validate() const;
};

// Shared mutable chain state. Token reads/writes are atomic at token
// granularity; multi-token consistency across a block is deliberately not
// guaranteed (that is the Hogwild contract).
struct GibbsState {
    std::vector<std::atomic<Token>> buffer;
    int32_t prefix_len = 0;
    std::vector<uint64_t> updates_per_worker;
    std::vector<Sequence> samples;

    GibbsState(const Sequence& initial, int32_t prefix_len, int32_t workers);
    GibbsState(const GibbsState&) = delete;
    GibbsState& operator=(const GibbsState&) = delete;

    Sequence snapshot() const;
};

// Fills positions prefix..prefix+delta-1. Crude-AR draws every position
// independently from next_token_dist(prefix); uniform-random draws uniformly
// over the vocabulary.
Sequence initialize_sequence(const LmInterface& lm, const Sequence& prefix, int32_t delta,
                             GibbsInit mode, Rng& rng);

// Single chain, single-threaded reference path (cfg.workers must be 1).
std::vector<Sequence> run_chain(const LmInterface& lm, const Sequence& prefix,
                                const GibbsConfig& cfg, const Rng& rng);

// Like run_chain but invokes `hook(iteration, state)` after every block
// update (iterations are 1-based); used for convergence diagnostics.
using IterationHook = std::function<void(int32_t, const Sequence&)>;
std::vector<Sequence> run_chain_traced(const LmInterface& lm, const Sequence& prefix,
                                       const GibbsConfig& cfg, const Rng& rng,
                                       const IterationHook& hook);

// Runs cfg.chains chains and merges their sample lists. Chain c uses the
// substream rng.derive(c). With W = 1 each chain is bit-identical to
// run_chain on that substream; with W >= 2 the chain's updates are assigned
// round-robin to W workers that share the buffer without mutual exclusion,
// synchronizing only at collection points.
std::vector<Sequence> run_hogwild(const LmInterface& lm, const Sequence& prefix,
                                  const GibbsConfig& cfg, const Rng& rng);

// Repeats run_hogwild on substreams rng.derive(0), rng.derive(1), ... until
// `count` samples are collected; extras are dropped.
std::vector<Sequence> draw_lookahead_samples(const LmInterface& lm, const Sequence& prefix,
                                             const GibbsConfig& cfg, int32_t count,
                                             const Rng& rng);

// Stand-in for an inexact masked model: perturbs the base model's masked
// conditionals with seeded log-space noise of controllable magnitude. The
// autoregressive interface passes through untouched.
class NoisyMaskedLm : public LmInterface {
public:
    NoisyMaskedLm(const LmInterface& base, double magnitude, uint64_t seed);

    const Vocab& vocab() const override { return base_.vocab(); }
    int32_t horizon() const override { return base_.horizon(); }
    ProbVector next_token_dist(const Sequence& prefix) const override;
    ProbVector masked_conditional(const Sequence& seq, int32_t pos) const override;

private:
    const LmInterface& base_;
    double magnitude_;
    uint64_t seed_;
};

}  // namespace scone
