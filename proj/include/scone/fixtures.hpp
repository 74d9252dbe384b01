#pragma once

#include "scone/harness.hpp"
#include "scone/toy_lm.hpp"
#include "scone/verifier.hpp"

namespace scone::fixtures {

// Default desk-scale fixture ("toy-a"): 6 tokens, horizon 5, embedding
// dimension 4, 7776 enumerable sequences. Seeds and scales are pinned so
// every derived expectation in the test suite stays reproducible.
inline constexpr int32_t kVocab = 6;
inline constexpr int32_t kHorizon = 5;
inline constexpr int32_t kDim = 4;
inline constexpr int32_t kHidden = 8;
inline constexpr uint64_t kLmSeed = 42;
inline constexpr uint64_t kVerifierSeed = 7;
inline constexpr double kSigma = 2.0;

// Scales chosen so the fixture verifier spreads scores across (0, 1) instead
// of hugging 0.5: without them a freshly initialized net is nearly constant
// and threshold tasks are vacuous.
inline constexpr double kVerifierWeightScale = 3.0;
inline constexpr double kVerifierEmbScale = 2.0;

TabularLmSpec toy_a_lm_spec();
TabularJointLM toy_a_lm();

MlpVerifierSpec toy_a_verifier_spec();
MlpVerifier toy_a_verifier();

harness::FixtureConfig toy_a_fixture_config();

}  // namespace scone::fixtures
