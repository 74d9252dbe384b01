#include "scone/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scone {

Vocab::Vocab(int32_t v) : size(v) {
    if (v < 2) {
        throw std::invalid_argument("vocab size must be >= 2, got " + std::to_string(v));
    }
}

void Vocab::check_sequence(const Sequence& seq) const {
    for (Token t : seq) {
        if (!contains(t)) {
            throw std::invalid_argument("token " + std::to_string(t) +
                                        " out of range for vocab of size " + std::to_string(size));
        }
    }
}

EmbeddingTable::EmbeddingTable(int32_t vocab_, int32_t dim_) : vocab(vocab_), dim(dim_) {
    if (vocab < 1 || dim < 1) {
        throw std::invalid_argument("embedding table needs positive vocab and dim");
    }
    data.assign(static_cast<size_t>(vocab) * dim, 0.0);
}

std::span<const double> EmbeddingTable::row(Token t) const {
    if (t < 0 || t >= vocab) {
        throw std::invalid_argument("embedding row " + std::to_string(t) + " out of range");
    }
    return {data.data() + static_cast<size_t>(t) * dim, static_cast<size_t>(dim)};
}

std::vector<double> mean_embedding(const Sequence& seq, const EmbeddingTable& table) {
    if (seq.empty()) {
        throw std::invalid_argument("mean_embedding of an empty sequence");
    }
    std::vector<double> acc(table.dim, 0.0);
    for (Token t : seq) {
        auto r = table.row(t);
        for (int32_t k = 0; k < table.dim; ++k) acc[k] += r[k];
    }
    const double inv = 1.0 / static_cast<double>(seq.size());
    for (double& x : acc) x *= inv;
    return acc;
}

bool validate_prob_vector(const ProbVector& v, const Vocab& vocab) {
    if (static_cast<int32_t>(v.size()) != vocab.size) {
        throw std::invalid_argument("prob vector has " + std::to_string(v.size()) +
                                    " entries, expected " + std::to_string(vocab.size));
    }
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) return false;  // also rejects NaN
        sum += x;
    }
    return std::abs(sum - 1.0) <= kProbTolerance;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

// xoshiro256** seeded through splitmix64. Hand-rolled rather than
// std::mt19937_64 + std::*_distribution so streams are identical across
// standard library implementations.
Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    for (auto& w : state_) {
        s = splitmix64(s);
        w = s;
    }
}

Rng::Rng(const RngSpec& spec) : Rng(spec.seed) {
    if (spec.family != "splitmix-xoshiro256ss") {
        throw std::invalid_argument("unknown rng family: " + spec.family);
    }
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int32_t Rng::uniform_int(int32_t n) {
    if (n <= 0) throw std::invalid_argument("uniform_int needs n > 0");
    return static_cast<int32_t>((static_cast<__uint128_t>(next_u64()) * static_cast<uint64_t>(n)) >> 64);
}

double Rng::normal(double mean, double stddev) {
    // Box-Muller, cosine branch only: every call consumes exactly two words.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

Rng Rng::derive(uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x6A09E667F3BCC909ULL)));
}

int32_t sample_categorical(const ProbVector& probs, Rng& rng) {
    if (probs.empty()) throw std::invalid_argument("sample_categorical on empty distribution");
    const double u = rng.uniform01();
    double cum = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int32_t>(i);
    }
    // u landed past the accumulated mass (rounding); return last nonzero entry
    for (size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) return static_cast<int32_t>(i);
    }
    return static_cast<int32_t>(probs.size()) - 1;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("log_sum_exp of empty span");
    const double m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double v : x) acc += std::exp(v - m);
    return m + std::log(acc);
}

}  // namespace scone
