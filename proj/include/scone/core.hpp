#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scone {

using Token = int32_t;

// A (possibly partial) generation. Length is just size(); a prefix of
// length i and a complete sequence of length T share the representation.
using Sequence = std::vector<Token>;

// Distribution over the vocabulary. Entries are probabilities; validity
// is checked where it matters rather than enforced by the type.
using ProbVector = std::vector<double>;

inline constexpr double kProbTolerance = 1e-9;

struct Vocab {
    int32_t size = 0;

    explicit Vocab(int32_t v);
    bool contains(Token t) const { return t >= 0 && t < size; }
    void check_sequence(const Sequence& seq) const;
};

// Row-major V x d embedding table.
struct EmbeddingTable {
    int32_t vocab = 0;
    int32_t dim = 0;
    std::vector<double> data;  // vocab * dim

    EmbeddingTable() = default;
    EmbeddingTable(int32_t vocab, int32_t dim);

    std::span<const double> row(Token t) const;
    double* mutable_row(Token t) { return data.data() + static_cast<size_t>(t) * dim; }
};

// mean over positions of the token embeddings, (1/L) sum_j rows[seq[j]]
std::vector<double> mean_embedding(const Sequence& seq, const EmbeddingTable& table);

// true iff all entries >= 0 and |sum - 1| <= 1e-9; throws on wrong length
bool validate_prob_vector(const ProbVector& v, const Vocab& vocab);

// --------------------------------------------------------------------------
// Seeded randomness.
//
// Every stochastic component takes an Rng (or a seed) explicitly. Streams
// for workers/chains/candidates are derived from the parent seed, never from
// consumption state, so results do not depend on evaluation order.

struct RngSpec {
    uint64_t seed = 0;
    std::string family = "splitmix-xoshiro256ss";
};

class Rng {
public:
    explicit Rng(uint64_t seed);
    explicit Rng(const RngSpec& spec);

    uint64_t next_u64();
    double uniform01();                  // [0, 1)
    int32_t uniform_int(int32_t n);      // [0, n)
    double normal(double mean = 0.0, double stddev = 1.0);

    // Independent substream keyed by `stream`; depends only on the seed this
    // Rng was constructed with, not on how much has been consumed.
    Rng derive(uint64_t stream) const;

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_ = 0;
    uint64_t state_[4] = {};
};

uint64_t splitmix64(uint64_t x);

// Inverse-CDF draw from a categorical distribution.
int32_t sample_categorical(const ProbVector& probs, Rng& rng);

// log(sum_i exp(x_i)) with max-shift
double log_sum_exp(std::span<const double> x);

}  // namespace scone
