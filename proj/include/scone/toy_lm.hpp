#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "scone/core.hpp"

namespace scone {

// Pluggable language-model boundary. The decoder and sampler only need the
// autoregressive next-token distribution and the masked conditional, so a
// neural model can slot in behind this interface later.
class LmInterface {
public:
    virtual ~LmInterface() = default;

    virtual const Vocab& vocab() const = 0;
    virtual int32_t horizon() const = 0;

    // p(y_{i+1} | y_{1:i}); prefix length must be < horizon
    virtual ProbVector next_token_dist(const Sequence& prefix) const = 0;

    // p(y_pos | y_{-pos}); seq must be complete
    virtual ProbVector masked_conditional(const Sequence& seq, int32_t pos) const = 0;
};

// Parameters a tabular model is regenerated from. Models are never shipped
// as raw tables, only as (V, T, seed, sigma).
struct TabularLmSpec {
    int32_t vocab = 0;
    int32_t horizon = 0;
    uint64_t seed = 0;
    double sigma = 2.0;  // stddev of the i.i.d. per-sequence logits

    std::string to_line() const;
    static TabularLmSpec from_line(const std::string& line);
};

// Explicit joint distribution over all length-T sequences. Per-sequence
// logits are drawn i.i.d. Normal(0, sigma) from the seed and normalized by
// softmax, which makes every conditional exact and cheap: prefix masses are
// aggregated once at construction, so next_token_dist is O(V) and
// masked_conditional is O(V) joint lookups.
//
// Sequences are indexed row-major with the first position most significant:
// rank(y) = sum_i y_i * V^(T-1-i).
class TabularJointLM : public LmInterface {
public:
    // enumerability bound on V^T
    static constexpr uint64_t kMaxSequences = 1'000'000;

    explicit TabularJointLM(const TabularLmSpec& spec);

    // Explicitly stored logits, one per length-T sequence in rank order
    // (tests build uniform and fully factorized models this way).
    TabularJointLM(int32_t vocab, int32_t horizon, const std::vector<double>& logits);

    const Vocab& vocab() const override { return vocab_; }
    int32_t horizon() const override { return spec_.horizon; }
    const TabularLmSpec& spec() const { return spec_; }

    uint64_t num_sequences() const { return joint_.size(); }

    double joint_prob(const Sequence& seq) const;
    ProbVector next_token_dist(const Sequence& prefix) const override;
    ProbVector masked_conditional(const Sequence& seq, int32_t pos) const override;

    // Exact joint conditional over a block of positions given the rest of
    // seq, flattened row-major over V^len block assignments.
    std::vector<double> block_conditional(const Sequence& seq, int32_t start, int32_t len) const;

    uint64_t rank(const Sequence& seq) const;
    Sequence unrank(uint64_t index) const;

private:
    uint64_t init_places();
    void init_from_logits(const std::vector<double>& logits);

    TabularLmSpec spec_;
    Vocab vocab_;
    std::vector<double> joint_;                    // normalized, size V^T
    std::vector<std::vector<double>> prefix_mass_; // level i: V^i totals
    std::vector<uint64_t> place_;                  // place_[i] = V^(T-1-i)
};

// Masked conditionals for every free position of a complete sequence.
// Row k corresponds to free_positions in ascending order.
std::vector<ProbVector> conditional_marginals(const LmInterface& lm, const Sequence& seq,
                                              const std::set<int32_t>& free_positions);

// exp(-(1/(N*T)) sum log joint(seq)). Returns +inf if any sequence has zero
// probability; callers flag that in reports.
double perplexity(const TabularJointLM& eval_lm, const std::vector<Sequence>& seqs);

}  // namespace scone
