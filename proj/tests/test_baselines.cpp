#include <algorithm>
#include <cmath>
#include <functional>

#include "doctest.h"
#include "scone/baselines.hpp"
#include "scone/fixtures.hpp"
#include "scone/oracle.hpp"

using namespace scone;

namespace {

TabularJointLM uniform_lm(int32_t vocab, int32_t horizon) {
    uint64_t n = 1;
    for (int32_t i = 0; i < horizon; ++i) n *= vocab;
    return TabularJointLM(vocab, horizon, std::vector<double>(n, 0.0));
}

// exact joint over complete sequences induced by the truncated sampling
// policy (the distribution random_sample actually draws from)
void walk_policy(const TabularJointLM& lm, const SamplingParams& params, Sequence& seq,
                 double weight, const std::function<void(const Sequence&, double)>& visit) {
    if (static_cast<int32_t>(seq.size()) == lm.horizon()) {
        visit(seq, weight);
        return;
    }
    const ProbVector step = truncated_step_dist(lm.next_token_dist(seq), params);
    for (Token v = 0; v < lm.vocab().size; ++v) {
        if (step[v] == 0.0) continue;
        seq.push_back(v);
        walk_policy(lm, params, seq, weight * step[v], visit);
        seq.pop_back();
    }
}

struct MaxOrderStats {
    double mean = 0.0;
    double sd = 0.0;
};

// E and sd of max(phi) over n i.i.d. policy draws, from the exact discrete
// score distribution: P(max <= s) = F(s)^n
MaxOrderStats analytic_best_of(const TabularJointLM& lm, const Verifier& phi,
                               const SamplingParams& params, const Sequence& prefix, int32_t n) {
    std::vector<std::pair<double, double>> scored;  // (score, prob)
    Sequence seq = prefix;
    walk_policy(lm, params, seq, 1.0, [&](const Sequence& full, double w) {
        scored.emplace_back(phi.score(full), w);
    });
    std::sort(scored.begin(), scored.end());

    MaxOrderStats out;
    double cdf_prev = 0.0;
    double cdf = 0.0;
    double ex = 0.0, ex2 = 0.0;
    for (size_t i = 0; i < scored.size();) {
        size_t j = i;
        double mass = 0.0;
        while (j < scored.size() && scored[j].first == scored[i].first) mass += scored[j++].second;
        cdf_prev = cdf;
        cdf += mass;
        const double p_max = std::pow(cdf, n) - std::pow(cdf_prev, n);
        ex += scored[i].first * p_max;
        ex2 += scored[i].first * scored[i].first * p_max;
        i = j;
    }
    out.mean = ex;
    out.sd = std::sqrt(std::max(0.0, ex2 - ex * ex));
    return out;
}

}  // namespace

TEST_CASE("truncated_step_dist") {
    const ProbVector base{0.5, 0.25, 0.15, 0.1};

    SUBCASE("no truncation returns the base distribution") {
        SamplingParams p;
        p.top_p = 1.0;
        p.min_p = 0.0;
        p.temperature = 1.0;
        const auto out = truncated_step_dist(base, p);
        for (size_t v = 0; v < base.size(); ++v) {
            CHECK(out[v] == doctest::Approx(base[v]).epsilon(1e-12));
        }
    }
    SUBCASE("top_p keeps the smallest covering set") {
        SamplingParams p;
        p.top_p = 0.7;
        p.min_p = 0.0;
        p.temperature = 1.0;
        const auto out = truncated_step_dist(base, p);
        CHECK(out[0] == doctest::Approx(0.5 / 0.75).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(0.25 / 0.75).epsilon(1e-12));
        CHECK(out[2] == 0.0);
        CHECK(out[3] == 0.0);
    }
    SUBCASE("min_p drops tokens below the relative floor") {
        SamplingParams p;
        p.top_p = 1.0;
        p.min_p = 0.25;  // floor = 0.125
        p.temperature = 1.0;
        const auto out = truncated_step_dist(base, p);
        CHECK(out[3] == 0.0);
        CHECK(out[2] > 0.0);
        double sum = 0.0;
        for (double x : out) sum += x;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("min_p approaching one keeps only the argmax") {
        SamplingParams p;
        p.top_p = 1.0;
        p.min_p = 0.999;
        p.temperature = 1.0;
        const auto out = truncated_step_dist(base, p);
        CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-12));
        for (size_t v = 1; v < out.size(); ++v) CHECK(out[v] == 0.0);
    }
    SUBCASE("tiny temperature concentrates on the argmax") {
        SamplingParams p;
        p.top_p = 1.0;
        p.min_p = 0.0;
        p.temperature = 1e-3;
        const auto out = truncated_step_dist(base, p);
        CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("parameter validation") {
        SamplingParams p;
        p.top_p = 0.0;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
        p = SamplingParams{};
        p.min_p = 1.0;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
        p = SamplingParams{};
        p.temperature = 0.0;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    }
}

TEST_CASE("plain ancestral sampling matches the joint") {
    const TabularJointLM lm({4, 3, 5, 2.0});
    SamplingParams p;
    p.top_p = 1.0;
    p.min_p = 0.0;
    p.temperature = 1.0;

    std::vector<double> counts(64, 0.0);
    Rng rng(71);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const Sequence s = random_sample(lm, {}, p, rng);
        uint64_t idx = 0;
        for (Token t : s) idx = idx * 4 + t;
        counts[idx] += 1.0;
    }
    for (double& c : counts) c /= draws;
    std::vector<double> exact(64);
    for (uint64_t r = 0; r < 64; ++r) exact[r] = lm.joint_prob(lm.unrank(r));
    CHECK(oracle::tv_distance(counts, exact) < 0.05);
}

TEST_CASE("beam search") {
    const auto lm = fixtures::toy_a_lm();

    SUBCASE("frozen five-beam result on the fixture") {
        SamplingParams p;
        p.temperature = 1.0;
        p.num_beams = 5;
        CHECK(beam_search(lm, {0}, p) == Sequence{0, 4, 1, 3, 2});
    }
    SUBCASE("full width recovers the enumeration argmax") {
        SamplingParams p;
        p.temperature = 1.0;
        p.num_beams = 1296;  // 6^4 continuations of a length-1 prefix
        const Sequence found = beam_search(lm, {0}, p);
        double best = -1.0;
        Sequence argmax;
        for (uint64_t r = 0; r < lm.num_sequences(); ++r) {
            const Sequence y = lm.unrank(r);
            if (y[0] != 0) continue;
            if (lm.joint_prob(y) > best) {
                best = lm.joint_prob(y);
                argmax = y;
            }
        }
        CHECK(found == argmax);
    }
    SUBCASE("single beam is greedy decoding") {
        SamplingParams p;
        p.temperature = 1.0;
        p.num_beams = 1;
        Sequence greedy{2};
        while (static_cast<int32_t>(greedy.size()) < 5) {
            const ProbVector step = lm.next_token_dist(greedy);
            greedy.push_back(static_cast<Token>(
                std::max_element(step.begin(), step.end()) - step.begin()));
        }
        CHECK(beam_search(lm, {2}, p) == greedy);
    }
    SUBCASE("deterministic and seed-free") {
        SamplingParams p;
        p.num_beams = 5;
        p.temperature = 0.3;
        CHECK(beam_search(lm, {1}, p) == beam_search(lm, {1}, p));
    }
    SUBCASE("ties break lexicographically") {
        const auto uni = uniform_lm(4, 4);
        SamplingParams p;
        p.temperature = 1.0;
        p.num_beams = 3;
        CHECK(beam_search(uni, {1}, p) == Sequence{1, 0, 0, 0});
    }
}

TEST_CASE("best_of_n") {
    const auto lm = fixtures::toy_a_lm();
    const auto phi = fixtures::toy_a_verifier();
    SamplingParams p;
    p.top_p = 0.9;
    p.min_p = 0.1;
    p.temperature = 1.0;

    SUBCASE("n = 1 is a single random draw") {
        p.bon_n = 1;
        const Sequence bon = best_of_n(lm, phi, {0}, p, Rng(81), BonObjective::maximize);
        Rng draw = Rng(81).derive(0);
        CHECK(bon == random_sample(lm, {0}, p, draw));
    }
    SUBCASE("constant verifier keeps the first draw") {
        const LinearVerifier constant(EmbeddingTable(6, 4), std::vector<double>(4, 0.0), 0.0, 5);
        p.bon_n = 10;
        const Sequence bon = best_of_n(lm, constant, {0}, p, Rng(82), BonObjective::maximize);
        Rng draw = Rng(82).derive(0);
        CHECK(bon == random_sample(lm, {0}, p, draw));
    }
    SUBCASE("mean best score matches the order-statistics expectation") {
        p.bon_n = 10;
        const Sequence prefix{0};
        const auto stats = analytic_best_of(lm, phi, p, prefix, 10);

        const int trials = 200;
        double mean = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Sequence best =
                best_of_n(lm, phi, prefix, p, Rng(5000).derive(t), BonObjective::maximize);
            mean += phi.score(best) / trials;
        }
        const double se = stats.sd / std::sqrt(static_cast<double>(trials));
        CHECK(std::abs(mean - stats.mean) <= 2.0 * se);
    }
    SUBCASE("selected score is monotone in n within noise") {
        const Sequence prefix{3};
        const int trials = 500;
        double prev_mean = -1.0;
        double prev_se = 0.0;
        for (int32_t n : {1, 3, 10}) {
            p.bon_n = n;
            double mean = 0.0, m2 = 0.0;
            for (int t = 0; t < trials; ++t) {
                const Sequence best =
                    best_of_n(lm, phi, prefix, p, Rng(6000).derive(t), BonObjective::maximize);
                const double s = phi.score(best);
                mean += s;
                m2 += s * s;
            }
            mean /= trials;
            const double var = m2 / trials - mean * mean;
            const double se = std::sqrt(std::max(0.0, var) / trials);
            if (prev_mean >= 0.0) CHECK(mean >= prev_mean - 2.0 * (se + prev_se));
            prev_mean = mean;
            prev_se = se;
        }
    }
    SUBCASE("minimize picks the lowest scorer") {
        p.bon_n = 10;
        const Sequence lo = best_of_n(lm, phi, {0}, p, Rng(83), BonObjective::minimize);
        const Sequence hi = best_of_n(lm, phi, {0}, p, Rng(83), BonObjective::maximize);
        CHECK(phi.score(lo) <= phi.score(hi));
    }
}

TEST_CASE("truncation never empties the candidate set") {
    const auto lm = fixtures::toy_a_lm();
    Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        Rng r = rng.derive(trial);
        SamplingParams p;
        p.top_p = 0.05 + 0.95 * r.uniform01();
        p.min_p = 0.9 * r.uniform01();
        p.temperature = 0.05 + 2.0 * r.uniform01();
        Sequence prefix;
        const int32_t len = r.uniform_int(4);
        for (int32_t i = 0; i < len; ++i) prefix.push_back(r.uniform_int(6));
        const auto out = truncated_step_dist(lm.next_token_dist(prefix), p);
        double sum = 0.0;
        for (double x : out) sum += x;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}
