#include "scone/fixtures.hpp"

namespace scone::fixtures {

TabularLmSpec toy_a_lm_spec() { return {kVocab, kHorizon, kLmSeed, kSigma}; }

TabularJointLM toy_a_lm() { return TabularJointLM(toy_a_lm_spec()); }

MlpVerifierSpec toy_a_verifier_spec() {
    MlpVerifierSpec spec;
    spec.vocab = kVocab;
    spec.dim = kDim;
    spec.hidden = kHidden;
    spec.horizon = kHorizon;
    spec.seed = kVerifierSeed;
    spec.weight_scale = kVerifierWeightScale;
    spec.emb_scale = kVerifierEmbScale;
    return spec;
}

MlpVerifier toy_a_verifier() { return MlpVerifier(toy_a_verifier_spec()); }

harness::FixtureConfig toy_a_fixture_config() {
    harness::FixtureConfig fixture;
    fixture.vocab = kVocab;
    fixture.horizon = kHorizon;
    fixture.dim = kDim;
    fixture.sigma = kSigma;
    fixture.lm_seed = kLmSeed;
    fixture.verifier.kind = "mlp";
    fixture.verifier.seed = kVerifierSeed;
    fixture.verifier.hidden = kHidden;
    fixture.verifier.weight_scale = kVerifierWeightScale;
    fixture.verifier.emb_scale = kVerifierEmbScale;
    return fixture;
}

}  // namespace scone::fixtures
