#include "scone/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace scone {

void SamplingParams::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
    if (!(min_p >= 0.0 && min_p < 1.0)) throw std::invalid_argument("min_p must be in [0, 1)");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (num_beams < 1) throw std::invalid_argument("num_beams must be >= 1");
    if (bon_n < 1) throw std::invalid_argument("bon_n must be >= 1");
}

namespace {

ProbVector apply_temperature(const ProbVector& base, double temperature) {
    if (temperature == 1.0) return base;
    ProbVector out(base.size(), 0.0);
    double z = 0.0;
    for (size_t v = 0; v < base.size(); ++v) {
        if (base[v] > 0.0) {
            out[v] = std::pow(base[v], 1.0 / temperature);
            z += out[v];
        }
    }
    for (double& p : out) p /= z;
    return out;
}

}  // namespace

ProbVector truncated_step_dist(const ProbVector& base, const SamplingParams& params) {
    params.validate();
    const ProbVector scaled = apply_temperature(base, params.temperature);

    std::vector<int32_t> order(scaled.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        if (scaled[a] != scaled[b]) return scaled[a] > scaled[b];
        return a < b;
    });

    // smallest prefix of the sorted tokens with cumulative mass >= top_p
    size_t keep = order.size();
    double cum = 0.0;
    for (size_t k = 0; k < order.size(); ++k) {
        cum += scaled[order[k]];
        if (cum >= params.top_p) {
            keep = k + 1;
            break;
        }
    }

    const double floor = params.min_p * scaled[order[0]];
    ProbVector out(scaled.size(), 0.0);
    double z = 0.0;
    for (size_t k = 0; k < keep; ++k) {
        const int32_t v = order[k];
        if (scaled[v] < floor) continue;  // the max always survives
        out[v] = scaled[v];
        z += scaled[v];
    }
    for (double& p : out) p /= z;
    return out;
}

Sequence random_sample(const LmInterface& lm, const Sequence& prefix,
                       const SamplingParams& params, Rng& rng) {
    params.validate();
    if (static_cast<int32_t>(prefix.size()) >= lm.horizon()) {
        throw std::invalid_argument("random_sample: prefix already complete");
    }
    Sequence seq = prefix;
    while (static_cast<int32_t>(seq.size()) < lm.horizon()) {
        const ProbVector step = truncated_step_dist(lm.next_token_dist(seq), params);
        seq.push_back(sample_categorical(step, rng));
    }
    return seq;
}

Sequence beam_search(const LmInterface& lm, const Sequence& prefix,
                     const SamplingParams& params) {
    params.validate();
    if (static_cast<int32_t>(prefix.size()) >= lm.horizon()) {
        throw std::invalid_argument("beam_search: prefix already complete");
    }

    struct Beam {
        Sequence seq;
        double score = 0.0;  // sum of log temperature-scaled step probs
    };
    auto better = [](const Beam& a, const Beam& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.seq < b.seq;
    };

    std::vector<Beam> beams{{prefix, 0.0}};
    while (static_cast<int32_t>(beams.front().seq.size()) < lm.horizon()) {
        std::vector<Beam> expanded;
        expanded.reserve(beams.size() * lm.vocab().size);
        for (const Beam& beam : beams) {
            const ProbVector step = apply_temperature(lm.next_token_dist(beam.seq),
                                                      params.temperature);
            for (int32_t v = 0; v < lm.vocab().size; ++v) {
                if (step[v] <= 0.0) continue;
                Beam next;
                next.seq = beam.seq;
                next.seq.push_back(v);
                next.score = beam.score + std::log(step[v]);
                expanded.push_back(std::move(next));
            }
        }
        std::sort(expanded.begin(), expanded.end(), better);
        if (static_cast<int32_t>(expanded.size()) > params.num_beams) {
            expanded.resize(params.num_beams);
        }
        beams = std::move(expanded);
    }
    return beams.front().seq;
}

Sequence best_of_n(const LmInterface& lm, const Verifier& verifier, const Sequence& prefix,
                   const SamplingParams& params, const Rng& rng, BonObjective objective) {
    params.validate();
    Sequence best;
    double best_score = 0.0;
    for (int32_t k = 0; k < params.bon_n; ++k) {
        Rng draw_rng = rng.derive(k);
        Sequence draw = random_sample(lm, prefix, params, draw_rng);
        double s = verifier.score(draw);
        if (objective == BonObjective::minimize) s = 1.0 - s;
        if (k == 0 || s > best_score) {
            best = std::move(draw);
            best_score = s;
        }
    }
    return best;
}

}  // namespace scone
