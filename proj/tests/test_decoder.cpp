#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "scone/decoder.hpp"
#include "scone/fixtures.hpp"
#include "scone/oracle.hpp"

using namespace scone;

namespace {

TabularJointLM uniform_lm(int32_t vocab, int32_t horizon) {
    uint64_t n = 1;
    for (int32_t i = 0; i < horizon; ++i) n *= vocab;
    return TabularJointLM(vocab, horizon, std::vector<double>(n, 0.0));
}

LinearVerifier constant_verifier(int32_t vocab, int32_t dim, int32_t horizon) {
    return LinearVerifier(EmbeddingTable(vocab, dim), std::vector<double>(dim, 0.0), 0.0,
                          horizon);
}

LinearVerifier linear_verifier(uint64_t seed, double wscale = 1.0) {
    LinearVerifierSpec spec;
    spec.vocab = 6;
    spec.dim = 4;
    spec.horizon = 5;
    spec.seed = seed;
    spec.weight_scale = wscale;
    return LinearVerifier(spec);
}

// truly affine scorer w . x + b (no squashing), so the first-order expansion
// carries no curvature error at all
class AffineVerifier : public Verifier {
public:
    AffineVerifier(EmbeddingTable table, std::vector<double> w, double b, int32_t horizon)
        : table_(std::move(table)), w_(std::move(w)), b_(b), horizon_(horizon) {}

    const EmbeddingTable& table() const override { return table_; }
    int32_t horizon() const override { return horizon_; }
    double score_pooled(const std::vector<double>& x) const override {
        double s = b_;
        for (size_t k = 0; k < w_.size(); ++k) s += w_[k] * x[k];
        return s;
    }
    Linearization linearize_pooled(const std::vector<double>& x,
                                   GradientSpace space) const override {
        Linearization lin;
        lin.score = score_pooled(x);
        lin.logit = lin.score;
        lin.gradient = w_;
        lin.space = space;
        return lin;
    }
    void save(std::ostream&) const override {}

private:
    EmbeddingTable table_;
    std::vector<double> w_;
    double b_;
    int32_t horizon_;
};

DecodeConfig fast_config() {
    DecodeConfig cfg;
    cfg.top_k = 10;
    cfg.lookahead_samples = 4;
    cfg.gibbs.chains = 2;
    cfg.gibbs.iterations = 20;
    cfg.gibbs.thinning = 5;
    cfg.gibbs.block_size = 2;
    return cfg;
}

}  // namespace

TEST_CASE("estimate_constraint_prob") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    const Sequence anchor{2, 4, 1, 0, 3};

    SUBCASE("point mass anchors reproduce the score") {
        const auto dist = build_local_distribution(lm, anchor, 5);
        const auto lin = phi.linearize(anchor);
        const auto est = estimate_constraint_prob(dist, lin, phi.table(), 1e-4);
        CHECK(est.raw == doctest::Approx(phi.score(anchor)).epsilon(1e-12));
    }
    SUBCASE("zero gradient keeps the constant score") {
        const auto constant = constant_verifier(6, 4, 5);
        const auto dist = build_local_distribution(lm, anchor, 1);
        const auto lin = constant.linearize(anchor);
        const auto est = estimate_constraint_prob(dist, lin, constant.table(), 1e-4);
        CHECK(est.raw == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(est.clamped == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("clamping keeps log-weights finite") {
        // affine scorer pushed far outside [0, 1]
        EmbeddingTable table = phi.table();
        const AffineVerifier wild(table, {50.0, 50.0, 50.0, 50.0}, -200.0, 5);
        const auto dist = build_local_distribution(lm, anchor, 1);
        const auto lin = wild.linearize(anchor);
        const auto est = estimate_constraint_prob(dist, lin, wild.table(), 1e-4);
        CHECK(est.clamped >= 1e-4);
        CHECK(est.clamped <= 1.0 - 1e-4);
        CHECK(est.raw != est.clamped);
    }
    SUBCASE("dimension mismatch is a domain error") {
        const auto dist = build_local_distribution(lm, anchor, 1);
        Linearization lin = phi.linearize(anchor);
        lin.gradient.resize(2);
        CHECK_THROWS_AS(estimate_constraint_prob(dist, lin, phi.table(), 1e-4),
                        std::invalid_argument);
    }
}

TEST_CASE("first-order estimate is exact for affine scorers") {
    const auto lm = fixtures::toy_a_lm();
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        Rng r = rng.derive(trial);
        EmbeddingTable table(6, 4);
        for (double& x : table.data) x = r.normal();
        std::vector<double> w(4);
        for (double& x : w) x = r.normal();
        const AffineVerifier phi(table, w, r.normal(), 5);

        Sequence anchor;
        for (int i = 0; i < 5; ++i) anchor.push_back(r.uniform_int(6));
        const auto dist = build_local_distribution(lm, anchor, r.uniform_int(6));
        const auto est = estimate_constraint_prob(dist, phi.linearize(anchor), phi.table(), 1e-4);
        const double exact = oracle::exact_expected_phi_local(dist, phi);
        CHECK(std::abs(est.raw - exact) <= 1e-9);
    }
}

TEST_CASE("near-linear sigmoid verifiers agree with enumeration to 1e-3") {
    const auto lm = fixtures::toy_a_lm();
    Rng rng(4242);
    for (int k = 0; k < 50; ++k) {
        const LinearVerifier phi = linear_verifier(500 + k, 0.15);
        Rng r = rng.derive(k);
        Sequence anchor;
        for (int i = 0; i < 5; ++i) anchor.push_back(r.uniform_int(6));
        const auto dist = build_local_distribution(lm, anchor, r.uniform_int(6));
        const auto est = estimate_constraint_prob(dist, phi.linearize(anchor), phi.table(), 1e-4);
        CHECK(std::abs(est.raw - oracle::exact_expected_phi_local(dist, phi)) <= 1e-3);
    }
}

TEST_CASE("constant verifier reduces a step to the truncated base distribution") {
    const auto lm = fixtures::toy_a_lm();
    const auto constant = constant_verifier(6, 4, 5);
    const Sequence prefix{0, 1};
    const ProbVector base = lm.next_token_dist(prefix);

    for (RenormMode mode : {RenormMode::probability_normalize, RenormMode::logits_softmax}) {
        DecodeConfig cfg = fast_config();
        cfg.renorm = mode;
        auto [dist, trace] = constrained_next_token_dist(lm, constant, prefix, cfg, Rng(1));
        REQUIRE(trace.candidates.size() == 6);  // top_k 10 shrinks to the support
        CHECK(trace.shrunk_candidates);
        double max_err = 0.0;
        for (size_t ci = 0; ci < trace.candidates.size(); ++ci) {
            max_err = std::max(max_err, std::abs(dist[ci] - base[trace.candidates[ci]]));
        }
        CHECK(max_err <= 1e-12);
    }
}

TEST_CASE("gamma zero reduces a step to the truncated base distribution") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    const Sequence prefix{3};
    DecodeConfig cfg = fast_config();
    cfg.gamma = 0.0;
    auto [dist, trace] = constrained_next_token_dist(lm, phi, prefix, cfg, Rng(2));
    const ProbVector base = lm.next_token_dist(prefix);
    for (size_t ci = 0; ci < trace.candidates.size(); ++ci) {
        CHECK(std::abs(dist[ci] - base[trace.candidates[ci]]) <= 1e-12);
    }
}

TEST_CASE("equal base probabilities order by the estimates") {
    const auto lm = uniform_lm(6, 5);
    const LinearVerifier phi = linear_verifier(88, 2.0);
    DecodeConfig cfg = fast_config();
    cfg.top_k = 6;
    auto [dist, trace] = constrained_next_token_dist(lm, phi, {0, 1}, cfg, Rng(3));
    for (size_t a = 0; a < trace.candidates.size(); ++a) {
        for (size_t b = 0; b < trace.candidates.size(); ++b) {
            if (trace.q[a] > trace.q[b]) CHECK(dist[a] > dist[b]);
        }
    }
}

TEST_CASE("step trace invariants") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    DecodeConfig cfg = fast_config();
    auto [dist, trace] = constrained_next_token_dist(lm, phi, {0}, cfg, Rng(5));

    double sum = 0.0;
    for (double p : dist) {
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (int32_t c : trace.sample_counts) CHECK(c == cfg.lookahead_samples);
    CHECK(trace.position == 1);

    // candidates sorted by base probability, ties to the lower id
    const ProbVector base = lm.next_token_dist({0});
    for (size_t ci = 1; ci < trace.candidates.size(); ++ci) {
        const double prev = base[trace.candidates[ci - 1]];
        const double cur = base[trace.candidates[ci]];
        CHECK((prev > cur || (prev == cur && trace.candidates[ci - 1] < trace.candidates[ci])));
    }

    const auto parsed = nlohmann::json::parse(trace.to_json_line());
    CHECK(parsed.at("position") == 1);
    CHECK(parsed.at("candidates").size() == trace.candidates.size());
    CHECK(parsed.at("renorm") == "probability-normalize");
}

TEST_CASE("final decoding step needs no lookahead") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    const Sequence prefix{0, 1, 2, 3};
    DecodeConfig cfg = fast_config();
    auto [dist, trace] = constrained_next_token_dist(lm, phi, prefix, cfg, Rng(7));
    (void)dist;
    // with delta = 0 every estimate is the exact score of the completed sequence
    for (size_t ci = 0; ci < trace.candidates.size(); ++ci) {
        Sequence full = prefix;
        full.push_back(trace.candidates[ci]);
        CHECK(trace.q[ci] == doctest::Approx(phi.score(full)).epsilon(1e-12));
    }

    auto [seq, traces] = generate(lm, phi, prefix, cfg, Rng(8));
    CHECK(seq.size() == 5);
    CHECK(traces.size() == 1);
}

TEST_CASE("generate reproduces top-k ancestral sampling when the verifier is silent") {
    const auto lm = fixtures::toy_a_lm();
    const auto constant = constant_verifier(6, 4, 5);
    DecodeConfig cfg = fast_config();
    cfg.top_k = 4;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL, 99ULL}) {
        auto [seq, traces] = generate(lm, constant, {2}, cfg, Rng(seed));
        const Sequence reference = topk_ancestral_sample(lm, {2}, 4, Rng(seed));
        CHECK(seq == reference);
        for (const auto& t : traces) {
            CHECK(std::find(t.candidates.begin(), t.candidates.end(), t.chosen) !=
                  t.candidates.end());
        }
    }
}

TEST_CASE("objective minimize flips the estimates") {
    const auto lm = fixtures::toy_a_lm();
    const LinearVerifier phi = linear_verifier(21, 1.0);
    DecodeConfig cfg = fast_config();
    cfg.objective = Objective::maximize;
    auto [dmax, tmax] = constrained_next_token_dist(lm, phi, {1}, cfg, Rng(10));
    cfg.objective = Objective::minimize;
    auto [dmin, tmin] = constrained_next_token_dist(lm, phi, {1}, cfg, Rng(10));
    (void)dmax;
    (void)dmin;
    for (size_t ci = 0; ci < tmax.q.size(); ++ci) {
        CHECK(tmin.q[ci] == doctest::Approx(1.0 - tmax.q[ci]).epsilon(1e-12));
    }
}

TEST_CASE("candidate set shrinks when the support is smaller than top_k") {
    // first-step token 3 has (numerically) zero probability
    std::vector<double> logits(16, 0.0);  // V=4, T=2
    for (int second = 0; second < 4; ++second) logits[3 * 4 + second] = -2000.0;
    const TabularJointLM lm(4, 2, logits);
    const auto constant = constant_verifier(4, 2, 2);
    DecodeConfig cfg = fast_config();
    cfg.top_k = 4;
    auto [dist, trace] = constrained_next_token_dist(lm, constant, {}, cfg, Rng(11));
    CHECK(trace.candidates.size() == 3);
    CHECK(trace.shrunk_candidates);
    CHECK(dist.size() == 3);
}

TEST_CASE("uninformative verifier is flagged and falls back to the base ranking") {
    const auto lm = fixtures::toy_a_lm();
    // scores astronomically negative: every estimate clamps to epsilon
    const LinearVerifier phi(EmbeddingTable(6, 4), std::vector<double>(4, 0.0), -40.0, 5);
    DecodeConfig cfg = fast_config();
    auto [dist, trace] = constrained_next_token_dist(lm, phi, {0, 1}, cfg, Rng(12));
    CHECK(trace.verifier_uninformative);
    const ProbVector base = lm.next_token_dist({0, 1});
    for (size_t ci = 0; ci < trace.candidates.size(); ++ci) {
        CHECK(dist[ci] == doctest::Approx(base[trace.candidates[ci]]).epsilon(1e-9));
    }
}

TEST_CASE("sample-indexed accumulation stays well-formed") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    DecodeConfig cfg = fast_config();
    cfg.accumulation = AccumulationMode::sample_indexed;
    auto [dist, trace] = constrained_next_token_dist(lm, phi, {0, 1}, cfg, Rng(13));
    double sum = 0.0;
    for (double p : dist) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    int32_t total = 0;
    for (int32_t c : trace.sample_counts) {
        CHECK(c >= 0);
        total += c;
    }
    // every candidate contributes lookahead_samples draws, some may drift away
    CHECK(total <= cfg.lookahead_samples * static_cast<int32_t>(trace.candidates.size()));
    CHECK(total > 0);
    for (double q : trace.q) CHECK(std::isfinite(q));

    auto [dist2, trace2] = constrained_next_token_dist(lm, phi, {0, 1}, cfg, Rng(13));
    CHECK(dist == dist2);
    CHECK(trace.q == trace2.q);
}

TEST_CASE("decode config validation") {
    DecodeConfig cfg = fast_config();
    cfg.top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = fast_config();
    cfg.estimate_clamp = 0.7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = fast_config();
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = fast_config();
    CHECK_THROWS_AS(
        constrained_next_token_dist(fixtures::toy_a_lm(), fixtures::toy_a_verifier(),
                                    {0, 1, 2, 3, 4}, cfg, Rng(1)),
        std::invalid_argument);
}

TEST_CASE("candidate evaluation order cannot leak between candidates") {
    // two configs that differ only in top_k: the shared candidates' estimates
    // must be identical because each candidate derives its own stream
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    DecodeConfig small = fast_config();
    small.top_k = 3;
    DecodeConfig large = fast_config();
    large.top_k = 6;
    auto [d1, t1] = constrained_next_token_dist(lm, phi, {2}, small, Rng(14));
    auto [d2, t2] = constrained_next_token_dist(lm, phi, {2}, large, Rng(14));
    (void)d1;
    (void)d2;
    for (size_t ci = 0; ci < t1.candidates.size(); ++ci) {
        CHECK(t1.candidates[ci] == t2.candidates[ci]);
        CHECK(t1.q[ci] == t2.q[ci]);
    }
}

TEST_CASE("logit-space expansion is exact in the logit for linear verifiers") {
    const auto lm = fixtures::toy_a_lm();
    Rng rng(314);
    for (int trial = 0; trial < 20; ++trial) {
        Rng r = rng.derive(trial);
        const LinearVerifier phi = linear_verifier(r.next_u64(), 1.5);
        Sequence anchor;
        for (int i = 0; i < 5; ++i) anchor.push_back(r.uniform_int(6));
        const auto dist = build_local_distribution(lm, anchor, r.uniform_int(6));

        const auto lin = phi.linearize(anchor, GradientSpace::logit);
        const auto exe = expected_mean_embedding(dist, phi.table());
        double expanded = lin.logit;
        for (size_t k = 0; k < exe.size(); ++k) {
            expanded += lin.gradient[k] * (exe[k] - lin.anchor_embedding[k]);
        }
        // the expansion reproduces E[logit] exactly; only the sigmoid bends
        double exact_logit = phi.b;
        for (size_t k = 0; k < exe.size(); ++k) exact_logit += phi.w[k] * exe[k];
        CHECK(expanded == doctest::Approx(exact_logit).epsilon(1e-9));

        const auto est = estimate_constraint_prob(dist, lin, phi.table(), 1e-4);
        CHECK(est.raw == doctest::Approx(sigmoid(exact_logit)).epsilon(1e-9));
    }
}
