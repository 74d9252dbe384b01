#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scone/circuit.hpp"
#include "scone/core.hpp"
#include "scone/gibbs.hpp"
#include "scone/toy_lm.hpp"
#include "scone/verifier.hpp"

namespace scone {

// How the per-candidate constraint estimates q are turned into log weights.
// probability-normalize treats them as probabilities (clamped away from 0/1
// before the log); logits-softmax feeds the raw averages to a log-softmax.
enum class RenormMode { probability_normalize, logits_softmax };

enum class Objective { maximize, minimize };

// clamped_candidate pins the candidate token during lookahead sampling, so
// every candidate receives exactly lookahead_samples estimates.
// sample_indexed leaves the candidate position free and credits each sample
// to the bucket of whatever token it currently carries there; buckets can end
// up empty, which is why it is not the default.
enum class AccumulationMode { clamped_candidate, sample_indexed };

struct DecodeConfig {
    int32_t top_k = 10;
    int32_t lookahead_samples = 8;  // estimates averaged per candidate
    GibbsConfig gibbs;
    double gamma = 1.0;             // constraint strength; 1 is the plain sum log p + log q
    RenormMode renorm = RenormMode::probability_normalize;
    double estimate_clamp = 1e-4;   // epsilon for [eps, 1-eps]
    Objective objective = Objective::maximize;
    GradientSpace gradient_space = GradientSpace::probability;
    AccumulationMode accumulation = AccumulationMode::clamped_candidate;

    void validate() const;
};

struct StepTrace {
    int32_t position = 0;                 // prefix length when the step ran
    std::vector<Token> candidates;        // descending base prob, ties to lower id
    std::vector<double> base_logprob;
    std::vector<double> q;                // averaged raw estimates, after objective flip
    std::vector<double> log_q;            // after renormalization
    std::vector<int32_t> sample_counts;   // estimates accumulated per candidate
    ProbVector final_dist;                // over candidates
    Token chosen = -1;
    bool shrunk_candidates = false;       // top_k exceeded the nonzero support
    bool verifier_uninformative = false;  // every estimate clamped to epsilon
    RenormMode renorm = RenormMode::probability_normalize;

    std::string to_json_line() const;
};

struct TaylorEstimate {
    double raw = 0.0;      // first-order value, may leave [0, 1]
    double clamped = 0.0;  // raw clamped into [eps, 1-eps]
};

// phi(anchor) + grad . (E[mean embedding] - anchor mean embedding), the
// closed-form estimate of the constraint probability around the anchor.
TaylorEstimate estimate_constraint_prob(const LocalFactorizedDistribution& dist,
                                        const Linearization& lin, const EmbeddingTable& table,
                                        double eps);

// One decoding step: expand the top-k candidates, estimate each one's
// constraint probability from Gibbs lookaheads, reweigh the truncated LM
// distribution, renormalize. The returned distribution is aligned with
// trace.candidates.
std::pair<ProbVector, StepTrace> constrained_next_token_dist(const LmInterface& lm,
                                                             const Verifier& verifier,
                                                             const Sequence& prefix,
                                                             const DecodeConfig& cfg,
                                                             const Rng& rng);

// Repeated constrained steps until length T, sampling each token from the
// step distribution.
std::pair<Sequence, std::vector<StepTrace>> generate(const LmInterface& lm,
                                                     const Verifier& verifier,
                                                     const Sequence& prefix,
                                                     const DecodeConfig& cfg, const Rng& rng);

// Reference reduction: top-k truncated ancestral sampling with the same rng
// stream layout as generate(). With a constant verifier (or gamma = 0),
// generate() reproduces this exactly, seed for seed.
Sequence topk_ancestral_sample(const LmInterface& lm, const Sequence& prefix, int32_t top_k,
                               const Rng& rng);

}  // namespace scone
