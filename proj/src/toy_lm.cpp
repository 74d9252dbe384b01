#include "scone/toy_lm.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace scone {

std::string TabularLmSpec::to_line() const {
    std::ostringstream os;
    os << "tabular " << vocab << " " << horizon << " " << seed << " " << sigma;
    return os.str();
}

TabularLmSpec TabularLmSpec::from_line(const std::string& line) {
    std::istringstream is(line);
    std::string tag;
    TabularLmSpec spec;
    if (!(is >> tag >> spec.vocab >> spec.horizon >> spec.seed >> spec.sigma) || tag != "tabular") {
        throw std::invalid_argument("bad tabular lm spec line: " + line);
    }
    return spec;
}

TabularJointLM::TabularJointLM(const TabularLmSpec& spec) : spec_(spec), vocab_(spec.vocab) {
    if (spec.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(spec.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");

    const uint64_t n = init_places();
    Rng rng(spec.seed);
    std::vector<double> logits(n);
    for (double& l : logits) l = rng.normal(0.0, spec.sigma);
    init_from_logits(logits);
}

TabularJointLM::TabularJointLM(int32_t vocab, int32_t horizon,
                               const std::vector<double>& logits)
    : spec_{vocab, horizon, 0, 0.0}, vocab_(vocab) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const uint64_t n = init_places();
    if (logits.size() != n) {
        throw std::invalid_argument("expected " + std::to_string(n) + " logits");
    }
    init_from_logits(logits);
}

uint64_t TabularJointLM::init_places() {
    uint64_t n = 1;
    place_.assign(spec_.horizon, 0);
    for (int32_t i = spec_.horizon - 1; i >= 0; --i) {
        place_[i] = n;
        if (n > kMaxSequences / static_cast<uint64_t>(spec_.vocab)) {
            throw std::invalid_argument("V^T exceeds the enumerability bound of 10^6");
        }
        n *= static_cast<uint64_t>(spec_.vocab);
    }
    return n;
}

void TabularJointLM::init_from_logits(const std::vector<double>& logits) {
    const uint64_t n = logits.size();
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double l : logits) max_logit = std::max(max_logit, l);

    double z = 0.0;
    joint_.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        joint_[i] = std::exp(logits[i] - max_logit);
        z += joint_[i];
    }
    for (double& p : joint_) p /= z;

    // prefix_mass_[i][r] = total probability of sequences whose first i
    // tokens have rank r; level T aliases the joint itself.
    prefix_mass_.resize(spec_.horizon);
    const std::vector<double>* below = &joint_;
    for (int32_t level = spec_.horizon - 1; level >= 0; --level) {
        uint64_t sz = 1;
        for (int32_t k = 0; k < level; ++k) sz *= static_cast<uint64_t>(spec_.vocab);
        prefix_mass_[level].assign(sz, 0.0);
        for (uint64_t r = 0; r < sz; ++r) {
            double acc = 0.0;
            for (int32_t v = 0; v < spec_.vocab; ++v) {
                acc += (*below)[r * static_cast<uint64_t>(spec_.vocab) + v];
            }
            prefix_mass_[level][r] = acc;
        }
        below = &prefix_mass_[level];
    }
}

uint64_t TabularJointLM::rank(const Sequence& seq) const {
    if (static_cast<int32_t>(seq.size()) != spec_.horizon) {
        throw std::invalid_argument("rank is defined for complete sequences");
    }
    vocab_.check_sequence(seq);
    uint64_t r = 0;
    for (size_t i = 0; i < seq.size(); ++i) r += static_cast<uint64_t>(seq[i]) * place_[i];
    return r;
}

Sequence TabularJointLM::unrank(uint64_t index) const {
    Sequence seq(spec_.horizon);
    for (int32_t i = spec_.horizon - 1; i >= 0; --i) {
        seq[i] = static_cast<Token>(index % static_cast<uint64_t>(spec_.vocab));
        index /= static_cast<uint64_t>(spec_.vocab);
    }
    return seq;
}

double TabularJointLM::joint_prob(const Sequence& seq) const {
    if (static_cast<int32_t>(seq.size()) != spec_.horizon) {
        throw std::invalid_argument("joint_prob needs a complete sequence of length " +
                                    std::to_string(spec_.horizon));
    }
    vocab_.check_sequence(seq);
    uint64_t r = 0;
    for (size_t i = 0; i < seq.size(); ++i) r += static_cast<uint64_t>(seq[i]) * place_[i];
    return joint_[r];
}

ProbVector TabularJointLM::next_token_dist(const Sequence& prefix) const {
    const auto i = static_cast<int32_t>(prefix.size());
    if (i >= spec_.horizon) {
        throw std::invalid_argument("prefix length must be < horizon");
    }
    vocab_.check_sequence(prefix);
    uint64_t r = 0;
    for (int32_t k = 0; k < i; ++k) {
        r = r * static_cast<uint64_t>(spec_.vocab) + static_cast<uint64_t>(prefix[k]);
    }
    const double total = prefix_mass_[i][r];
    const std::vector<double>& next =
        (i + 1 == spec_.horizon) ? joint_ : prefix_mass_[i + 1];
    ProbVector out(spec_.vocab);
    for (int32_t v = 0; v < spec_.vocab; ++v) {
        out[v] = next[r * static_cast<uint64_t>(spec_.vocab) + static_cast<uint64_t>(v)] / total;
    }
    return out;
}

ProbVector TabularJointLM::masked_conditional(const Sequence& seq, int32_t pos) const {
    if (static_cast<int32_t>(seq.size()) != spec_.horizon) {
        throw std::invalid_argument("masked_conditional needs a complete sequence");
    }
    if (pos < 0 || pos >= spec_.horizon) {
        throw std::invalid_argument("masked_conditional position out of range");
    }
    vocab_.check_sequence(seq);
    uint64_t base = 0;
    for (size_t i = 0; i < seq.size(); ++i) base += static_cast<uint64_t>(seq[i]) * place_[i];
    base -= static_cast<uint64_t>(seq[pos]) * place_[pos];

    ProbVector out(spec_.vocab);
    double z = 0.0;
    for (int32_t v = 0; v < spec_.vocab; ++v) {
        out[v] = joint_[base + static_cast<uint64_t>(v) * place_[pos]];
        z += out[v];
    }
    for (double& p : out) p /= z;
    return out;
}

std::vector<double> TabularJointLM::block_conditional(const Sequence& seq, int32_t start,
                                                      int32_t len) const {
    if (static_cast<int32_t>(seq.size()) != spec_.horizon) {
        throw std::invalid_argument("block_conditional needs a complete sequence");
    }
    if (start < 0 || len < 1 || start + len > spec_.horizon) {
        throw std::invalid_argument("block_conditional range out of bounds");
    }
    uint64_t combos = 1;
    for (int32_t k = 0; k < len; ++k) combos *= static_cast<uint64_t>(spec_.vocab);

    Sequence work = seq;
    std::vector<double> out(combos);
    double z = 0.0;
    for (uint64_t c = 0; c < combos; ++c) {
        uint64_t rem = c;
        for (int32_t k = len - 1; k >= 0; --k) {
            work[start + k] = static_cast<Token>(rem % static_cast<uint64_t>(spec_.vocab));
            rem /= static_cast<uint64_t>(spec_.vocab);
        }
        out[c] = joint_prob(work);
        z += out[c];
    }
    if (z <= 0.0) throw std::runtime_error("block_conditional: zero conditioning mass");
    for (double& p : out) p /= z;
    return out;
}

std::vector<ProbVector> conditional_marginals(const LmInterface& lm, const Sequence& seq,
                                              const std::set<int32_t>& free_positions) {
    std::vector<ProbVector> rows;
    rows.reserve(free_positions.size());
    for (int32_t pos : free_positions) {
        rows.push_back(lm.masked_conditional(seq, pos));
    }
    return rows;
}

double perplexity(const TabularJointLM& eval_lm, const std::vector<Sequence>& seqs) {
    if (seqs.empty()) throw std::invalid_argument("perplexity over an empty sample set");
    double log_acc = 0.0;
    for (const Sequence& seq : seqs) {
        const double p = eval_lm.joint_prob(seq);
        if (p <= 0.0) return std::numeric_limits<double>::infinity();
        log_acc += std::log(p);
    }
    const double n = static_cast<double>(seqs.size()) * eval_lm.horizon();
    return std::exp(-log_acc / n);
}

}  // namespace scone
