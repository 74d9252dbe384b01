#include "scone/oracle.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace scone::oracle {

namespace {

uint64_t pow_u64(uint64_t base, int32_t exp) {
    uint64_t r = 1;
    for (int32_t k = 0; k < exp; ++k) r *= base;
    return r;
}

uint64_t checked_enumeration_size(int32_t vocab, int32_t free_positions) {
    uint64_t n = 1;
    for (int32_t k = 0; k < free_positions; ++k) {
        if (n > kEnumerationBound / static_cast<uint64_t>(vocab)) {
            throw std::runtime_error("oracle refusing: enumeration would exceed 10^6 sequences");
        }
        n *= static_cast<uint64_t>(vocab);
    }
    return n;
}

// Writes the c-th assignment (row-major) into seq[start..start+len).
void apply_assignment(Sequence& seq, int32_t start, int32_t len, uint64_t c, int32_t vocab) {
    for (int32_t k = len - 1; k >= 0; --k) {
        seq[start + k] = static_cast<Token>(c % static_cast<uint64_t>(vocab));
        c /= static_cast<uint64_t>(vocab);
    }
}

}  // namespace

double exact_expected_phi(const TabularJointLM& lm, const Verifier& phi, const Sequence& prefix) {
    const int32_t horizon = lm.horizon();
    const auto i = static_cast<int32_t>(prefix.size());
    if (i > horizon) throw std::invalid_argument("prefix longer than horizon");
    if (i == horizon) return phi.score(prefix);

    const int32_t free = horizon - i;
    const uint64_t combos = checked_enumeration_size(lm.vocab().size, free);

    Sequence full = prefix;
    full.resize(horizon, 0);
    double mass = 0.0;
    double weighted = 0.0;
    for (uint64_t c = 0; c < combos; ++c) {
        apply_assignment(full, i, free, c, lm.vocab().size);
        const double p = lm.joint_prob(full);
        mass += p;
        weighted += p * phi.score(full);
    }
    if (mass <= 0.0) throw std::runtime_error("prefix has zero probability mass");
    return weighted / mass;
}

OracleReport expected_phi_report(const TabularJointLM& lm, const Verifier& phi,
                                 const Sequence& prefix) {
    const auto start = std::chrono::steady_clock::now();
    OracleReport report;
    report.enumeration_size =
        pow_u64(lm.vocab().size, lm.horizon() - static_cast<int32_t>(prefix.size()));
    report.values = {exact_expected_phi(lm, phi, prefix)};
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

ProbVector exact_constrained_next_token(const TabularJointLM& lm, const Verifier& phi,
                                        const Sequence& prefix) {
    if (static_cast<int32_t>(prefix.size()) >= lm.horizon()) {
        throw std::invalid_argument("prefix length must be < horizon");
    }
    const ProbVector base = lm.next_token_dist(prefix);
    ProbVector out(lm.vocab().size, 0.0);
    double z = 0.0;
    Sequence extended = prefix;
    extended.push_back(0);
    for (int32_t v = 0; v < lm.vocab().size; ++v) {
        extended.back() = v;
        if (base[v] > 0.0) {
            out[v] = base[v] * exact_expected_phi(lm, phi, extended);
        }
        z += out[v];
    }
    if (z <= 0.0) throw std::runtime_error("degenerate constraint: all continuations score zero");
    for (double& p : out) p /= z;
    return out;
}

std::vector<double> exact_local_expected_embedding(const TabularJointLM& lm,
                                                   const Sequence& anchor, int32_t clamped,
                                                   const EmbeddingTable& table) {
    LocalFactorizedDistribution dist = build_local_distribution(lm, anchor, clamped);

    const int32_t horizon = lm.horizon();
    const int32_t free = horizon - clamped;
    const uint64_t combos = checked_enumeration_size(lm.vocab().size, free);

    Sequence seq = anchor;
    std::vector<double> acc(table.dim, 0.0);
    for (uint64_t c = 0; c < combos; ++c) {
        apply_assignment(seq, clamped, free, c, lm.vocab().size);
        double w = 1.0;
        for (int32_t pos = clamped; pos < horizon; ++pos) {
            w *= dist.categoricals[pos][seq[pos]];
        }
        if (w == 0.0) continue;
        const std::vector<double> emb = mean_embedding(seq, table);
        for (int32_t k = 0; k < table.dim; ++k) acc[k] += w * emb[k];
    }
    return acc;
}

double exact_expected_phi_local(const LocalFactorizedDistribution& dist, const Verifier& phi) {
    const auto horizon = static_cast<int32_t>(dist.categoricals.size());
    const int32_t clamped = dist.clamped;
    const int32_t vocab = static_cast<int32_t>(dist.categoricals.front().size());
    const int32_t free = horizon - clamped;
    const uint64_t combos = checked_enumeration_size(vocab, free);

    Sequence seq = dist.anchor;
    double acc = 0.0;
    for (uint64_t c = 0; c < combos; ++c) {
        apply_assignment(seq, clamped, free, c, vocab);
        double w = 1.0;
        for (int32_t pos = clamped; pos < horizon; ++pos) {
            w *= dist.categoricals[pos][seq[pos]];
        }
        if (w == 0.0) continue;
        acc += w * phi.score(seq);
    }
    return acc;
}

std::vector<double> exact_continuation_dist(const TabularJointLM& lm, const Sequence& prefix) {
    const int32_t horizon = lm.horizon();
    const auto i = static_cast<int32_t>(prefix.size());
    if (i >= horizon) throw std::invalid_argument("prefix must leave free positions");
    const int32_t free = horizon - i;
    const uint64_t combos = checked_enumeration_size(lm.vocab().size, free);

    Sequence full = prefix;
    full.resize(horizon, 0);
    std::vector<double> out(combos);
    double mass = 0.0;
    for (uint64_t c = 0; c < combos; ++c) {
        apply_assignment(full, i, free, c, lm.vocab().size);
        out[c] = lm.joint_prob(full);
        mass += out[c];
    }
    if (mass <= 0.0) throw std::runtime_error("prefix has zero probability mass");
    for (double& p : out) p /= mass;
    return out;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("tv_distance: support mismatch (" + std::to_string(p.size()) +
                                    " vs " + std::to_string(q.size()) + ")");
    }
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

}  // namespace scone::oracle
