#include "scone/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace scone {

void DecodeConfig::validate() const {
    if (top_k < 1) throw std::invalid_argument("decode: top_k must be >= 1");
    if (lookahead_samples < 1) throw std::invalid_argument("decode: lookahead_samples must be >= 1");
    if (!(gamma >= 0.0)) throw std::invalid_argument("decode: gamma must be >= 0");
    if (!(estimate_clamp > 0.0 && estimate_clamp < 0.5)) {
        throw std::invalid_argument("decode: estimate clamp must lie in (0, 0.5)");
    }
}

std::string StepTrace::to_json_line() const {
    nlohmann::json j;
    j["position"] = position;
    j["candidates"] = candidates;
    j["base_logprob"] = base_logprob;
    j["q"] = q;
    j["log_q"] = log_q;
    j["sample_counts"] = sample_counts;
    j["final_dist"] = final_dist;
    j["chosen"] = chosen;
    j["shrunk_candidates"] = shrunk_candidates;
    j["verifier_uninformative"] = verifier_uninformative;
    j["renorm"] = renorm == RenormMode::probability_normalize ? "probability-normalize"
                                                              : "logits-softmax";
    return j.dump();
}

TaylorEstimate estimate_constraint_prob(const LocalFactorizedDistribution& dist,
                                        const Linearization& lin, const EmbeddingTable& table,
                                        double eps) {
    if (static_cast<int32_t>(lin.gradient.size()) != table.dim ||
        static_cast<int32_t>(lin.anchor_embedding.size()) != table.dim) {
        throw std::invalid_argument("estimate_constraint_prob: dimension mismatch");
    }
    const std::vector<double> exe = expected_mean_embedding(dist, table);
    double shift = 0.0;
    for (int32_t k = 0; k < table.dim; ++k) {
        shift += lin.gradient[k] * (exe[k] - lin.anchor_embedding[k]);
    }
    TaylorEstimate est;
    est.raw = lin.space == GradientSpace::probability ? lin.score + shift
                                                      : sigmoid(lin.logit + shift);
    est.clamped = std::clamp(est.raw, eps, 1.0 - eps);
    return est;
}

namespace {

// Candidate tokens ordered by base probability, descending, ties broken by
// the lower token id; zero-probability tokens never qualify.
std::vector<Token> select_candidates(const ProbVector& base, int32_t top_k, bool& shrunk) {
    std::vector<Token> order(base.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Token a, Token b) {
        if (base[a] != base[b]) return base[a] > base[b];
        return a < b;
    });
    std::vector<Token> candidates;
    for (Token t : order) {
        if (static_cast<int32_t>(candidates.size()) == top_k) break;
        if (base[t] <= 0.0) break;
        candidates.push_back(t);
    }
    shrunk = static_cast<int32_t>(candidates.size()) < top_k;
    if (candidates.empty()) throw std::runtime_error("no candidate has positive probability");
    return candidates;
}

GibbsConfig step_gibbs_config(const GibbsConfig& base, int32_t delta) {
    GibbsConfig cfg = base;
    cfg.lookahead = delta;
    if (delta > 0) cfg.block_size = std::min(base.block_size, delta);
    return cfg;
}

double mean_estimate(const LocalFactorizedDistribution& dist, const Verifier& verifier,
                     const Sequence& anchor, GradientSpace space, double eps, double& raw_acc) {
    const Linearization lin = verifier.linearize(anchor, space);
    const TaylorEstimate est = estimate_constraint_prob(dist, lin, verifier.table(), eps);
    raw_acc += est.raw;
    return est.raw;
}

}  // namespace

std::pair<ProbVector, StepTrace> constrained_next_token_dist(const LmInterface& lm,
                                                             const Verifier& verifier,
                                                             const Sequence& prefix,
                                                             const DecodeConfig& cfg,
                                                             const Rng& rng) {
    cfg.validate();
    const int32_t horizon = lm.horizon();
    const auto i = static_cast<int32_t>(prefix.size());
    if (i >= horizon) throw std::invalid_argument("decode step past the horizon");

    const ProbVector base = lm.next_token_dist(prefix);

    StepTrace trace;
    trace.position = i;
    trace.renorm = cfg.renorm;
    trace.candidates = select_candidates(base, cfg.top_k, trace.shrunk_candidates);
    const auto n_cand = trace.candidates.size();

    trace.base_logprob.resize(n_cand);
    for (size_t ci = 0; ci < n_cand; ++ci) {
        trace.base_logprob[ci] = std::log(base[trace.candidates[ci]]);
    }

    // Accumulate Taylor estimates of the constraint probability per candidate.
    // Stream 0 of the step rng is reserved for the final token draw; the
    // candidate with token id c derives stream 1 + c, so evaluation order
    // cannot change any result.
    std::vector<double> acc(n_cand, 0.0);
    trace.sample_counts.assign(n_cand, 0);
    const int32_t delta = horizon - i - 1;  // free positions beyond the candidate

    if (cfg.accumulation == AccumulationMode::clamped_candidate) {
        for (size_t ci = 0; ci < n_cand; ++ci) {
            const Token c = trace.candidates[ci];
            const Rng cand_rng = rng.derive(1 + static_cast<uint64_t>(c));
            Sequence extended = prefix;
            extended.push_back(c);

            std::vector<Sequence> lookaheads;
            if (delta == 0) {
                lookaheads.assign(cfg.lookahead_samples, extended);
            } else {
                lookaheads = draw_lookahead_samples(lm, extended,
                                                    step_gibbs_config(cfg.gibbs, delta),
                                                    cfg.lookahead_samples, cand_rng);
            }
            for (const Sequence& s : lookaheads) {
                const LocalFactorizedDistribution local = build_local_distribution(lm, s, i + 1);
                mean_estimate(local, verifier, s, cfg.gradient_space, cfg.estimate_clamp,
                              acc[ci]);
                ++trace.sample_counts[ci];
            }
        }
    } else {
        // Paper-style indexing: the candidate position stays free during
        // sampling and each lookahead credits the bucket of its own token.
        std::vector<int32_t> cand_index(base.size(), -1);
        for (size_t ci = 0; ci < n_cand; ++ci) cand_index[trace.candidates[ci]] = static_cast<int32_t>(ci);
        for (size_t ci = 0; ci < n_cand; ++ci) {
            const Token c = trace.candidates[ci];
            const Rng cand_rng = rng.derive(1 + static_cast<uint64_t>(c));
            Sequence extended = prefix;
            extended.push_back(c);

            std::vector<Sequence> lookaheads;
            if (delta == 0) {
                lookaheads.assign(cfg.lookahead_samples, extended);
            } else {
                GibbsConfig gcfg = step_gibbs_config(cfg.gibbs, delta + 1);
                lookaheads =
                    draw_lookahead_samples(lm, prefix, gcfg, cfg.lookahead_samples, cand_rng);
            }
            for (const Sequence& s : lookaheads) {
                const int32_t bucket = cand_index[s[i]];
                if (bucket < 0) continue;  // drifted outside the candidate set
                const LocalFactorizedDistribution local = build_local_distribution(lm, s, i + 1);
                mean_estimate(local, verifier, s, cfg.gradient_space, cfg.estimate_clamp,
                              acc[bucket]);
                ++trace.sample_counts[bucket];
            }
        }
    }

    trace.q.resize(n_cand);
    for (size_t ci = 0; ci < n_cand; ++ci) {
        // empty buckets (sample_indexed only) fall to the clamp floor
        double q = trace.sample_counts[ci] > 0 ? acc[ci] / trace.sample_counts[ci]
                                               : cfg.estimate_clamp;
        if (cfg.objective == Objective::minimize) q = 1.0 - q;
        trace.q[ci] = q;
    }

    trace.log_q.resize(n_cand);
    if (cfg.renorm == RenormMode::probability_normalize) {
        std::vector<double> clamped(n_cand);
        bool all_floor = true;
        double sum = 0.0;
        for (size_t ci = 0; ci < n_cand; ++ci) {
            clamped[ci] = std::clamp(trace.q[ci], cfg.estimate_clamp, 1.0 - cfg.estimate_clamp);
            all_floor = all_floor && clamped[ci] == cfg.estimate_clamp;
            sum += clamped[ci];
        }
        trace.verifier_uninformative = all_floor;
        for (size_t ci = 0; ci < n_cand; ++ci) {
            trace.log_q[ci] = std::log(clamped[ci]) - std::log(sum);
        }
    } else {
        const double lse = log_sum_exp(trace.q);
        for (size_t ci = 0; ci < n_cand; ++ci) trace.log_q[ci] = trace.q[ci] - lse;
    }

    std::vector<double> w(n_cand);
    for (size_t ci = 0; ci < n_cand; ++ci) {
        w[ci] = trace.base_logprob[ci] + cfg.gamma * trace.log_q[ci];
    }
    const double lse_w = log_sum_exp(w);
    trace.final_dist.resize(n_cand);
    for (size_t ci = 0; ci < n_cand; ++ci) trace.final_dist[ci] = std::exp(w[ci] - lse_w);

    return {trace.final_dist, std::move(trace)};
}

std::pair<Sequence, std::vector<StepTrace>> generate(const LmInterface& lm,
                                                     const Verifier& verifier,
                                                     const Sequence& prefix,
                                                     const DecodeConfig& cfg, const Rng& rng) {
    if (static_cast<int32_t>(prefix.size()) >= lm.horizon()) {
        throw std::invalid_argument("generate: prefix already complete");
    }
    Sequence seq = prefix;
    std::vector<StepTrace> traces;
    while (static_cast<int32_t>(seq.size()) < lm.horizon()) {
        const Rng step_rng = rng.derive(seq.size());
        auto [dist, trace] = constrained_next_token_dist(lm, verifier, seq, cfg, step_rng);
        Rng draw_rng = step_rng.derive(0);
        const int32_t idx = sample_categorical(dist, draw_rng);
        trace.chosen = trace.candidates[idx];
        seq.push_back(trace.chosen);
        traces.push_back(std::move(trace));
    }
    return {std::move(seq), std::move(traces)};
}

Sequence topk_ancestral_sample(const LmInterface& lm, const Sequence& prefix, int32_t top_k,
                               const Rng& rng) {
    if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    Sequence seq = prefix;
    while (static_cast<int32_t>(seq.size()) < lm.horizon()) {
        const Rng step_rng = rng.derive(seq.size());
        const ProbVector base = lm.next_token_dist(seq);
        bool shrunk = false;
        const std::vector<Token> candidates = select_candidates(base, top_k, shrunk);
        ProbVector dist(candidates.size());
        double sum = 0.0;
        for (size_t ci = 0; ci < candidates.size(); ++ci) sum += base[candidates[ci]];
        for (size_t ci = 0; ci < candidates.size(); ++ci) dist[ci] = base[candidates[ci]] / sum;
        Rng draw_rng = step_rng.derive(0);
        seq.push_back(candidates[sample_categorical(dist, draw_rng)]);
    }
    return seq;
}

}  // namespace scone
