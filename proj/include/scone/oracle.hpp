#pragma once

#include <cstdint>
#include <vector>

#include "scone/circuit.hpp"
#include "scone/core.hpp"
#include "scone/toy_lm.hpp"
#include "scone/verifier.hpp"

namespace scone::oracle {

// Refusal bound on full-sequence evaluations per query.
inline constexpr uint64_t kEnumerationBound = 1'000'000;

struct OracleReport {
    std::vector<double> values;
    uint64_t enumeration_size = 0;
    double wall_seconds = 0.0;
};

// E over all continuations of the prefix of phi(full sequence), exact.
double exact_expected_phi(const TabularJointLM& lm, const Verifier& phi, const Sequence& prefix);
OracleReport expected_phi_report(const TabularJointLM& lm, const Verifier& phi,
                                 const Sequence& prefix);

// Entry v proportional to p(v | prefix) * E[phi | prefix v], normalized.
ProbVector exact_constrained_next_token(const TabularJointLM& lm, const Verifier& phi,
                                        const Sequence& prefix);

// sum_y ptilde_anchor(y) * mean_embedding(y), by enumerating the free
// positions. Serves as the reference for the circuit evaluator.
std::vector<double> exact_local_expected_embedding(const TabularJointLM& lm,
                                                   const Sequence& anchor, int32_t clamped,
                                                   const EmbeddingTable& table);

// E[phi] under an already-built local factorized distribution.
double exact_expected_phi_local(const LocalFactorizedDistribution& dist, const Verifier& phi);

// p(y_{i+1:T} | prefix) flattened row-major over the V^(T-i) continuations.
std::vector<double> exact_continuation_dist(const TabularJointLM& lm, const Sequence& prefix);

// Half the L1 distance between two distributions on a common support.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace scone::oracle
