#pragma once

#include <cstdint>
#include <vector>

#include "scone/core.hpp"
#include "scone/toy_lm.hpp"
#include "scone/verifier.hpp"

namespace scone {

enum class BonObjective { maximize, minimize };

struct SamplingParams {
    double top_p = 0.9;
    double min_p = 0.1;
    double temperature = 1.0;
    int32_t num_beams = 5;
    int32_t bon_n = 10;

    void validate() const;
};

// Per step: apply temperature, keep the smallest probability-sorted set with
// cumulative mass >= top_p, drop tokens below min_p * max prob, renormalize,
// sample.
Sequence random_sample(const LmInterface& lm, const Sequence& prefix,
                       const SamplingParams& params, Rng& rng);

// The truncated step distribution random_sample draws from, exposed so exact
// per-policy enumeration is possible.
ProbVector truncated_step_dist(const ProbVector& base, const SamplingParams& params);

// Deterministic beam search over summed log step probabilities (temperature
// applied before scoring). Ties break lexicographically on the token
// sequence, so num_beams = 1 is greedy decoding.
Sequence beam_search(const LmInterface& lm, const Sequence& prefix, const SamplingParams& params);

// Draws bon_n complete sequences via random_sample and returns the one the
// verifier scores best (worst when minimizing). Ties keep the earliest draw.
// Draw k uses the substream rng.derive(k).
Sequence best_of_n(const LmInterface& lm, const Verifier& verifier, const Sequence& prefix,
                   const SamplingParams& params, const Rng& rng, BonObjective objective);

}  // namespace scone
