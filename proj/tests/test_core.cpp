#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "scone/core.hpp"
#include "scone/fixtures.hpp"

using namespace scone;

TEST_CASE("mean_embedding basics") {
    EmbeddingTable table(3, 2);
    table.mutable_row(0)[0] = 1.0;
    table.mutable_row(0)[1] = 0.0;
    table.mutable_row(1)[0] = 0.0;
    table.mutable_row(1)[1] = 1.0;
    table.mutable_row(2)[0] = 2.0;
    table.mutable_row(2)[1] = -3.0;

    SUBCASE("single token mean is the row") {
        const auto m = mean_embedding({2}, table);
        CHECK(m[0] == doctest::Approx(2.0));
        CHECK(m[1] == doctest::Approx(-3.0));
    }
    SUBCASE("symmetric average") {
        const auto m = mean_embedding({0, 1}, table);
        CHECK(m[0] == doctest::Approx(0.5));
        CHECK(m[1] == doctest::Approx(0.5));
    }
    SUBCASE("empty sequence is a domain error") {
        CHECK_THROWS_AS(mean_embedding({}, table), std::invalid_argument);
    }
}

TEST_CASE("mean_embedding properties") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        Rng r = rng.derive(trial);
        const int32_t vocab = 4 + r.uniform_int(5);
        const int32_t dim = 1 + r.uniform_int(6);
        EmbeddingTable table(vocab, dim);
        for (double& x : table.data) x = r.normal();

        Sequence seq;
        const int32_t len = 1 + r.uniform_int(8);
        for (int32_t i = 0; i < len; ++i) seq.push_back(r.uniform_int(vocab));

        const auto base = mean_embedding(seq, table);

        // permutation invariance
        Sequence shuffled = seq;
        for (size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[r.uniform_int(static_cast<int32_t>(i))]);
        }
        const auto perm = mean_embedding(shuffled, table);
        for (int32_t k = 0; k < dim; ++k) CHECK(perm[k] == doctest::Approx(base[k]).epsilon(1e-12));

        // all-identical tokens give back that row (up to the final rounding)
        const Token t = seq[0];
        const Sequence same(static_cast<size_t>(len), t);
        const auto m = mean_embedding(same, table);
        const auto row = table.row(t);
        for (int32_t k = 0; k < dim; ++k) {
            CHECK(m[k] == doctest::Approx(row[k]).epsilon(1e-15));
        }

        // linearity in the table
        const double c = 0.25 + r.uniform01() * 3.0;
        EmbeddingTable scaled = table;
        for (double& x : scaled.data) x *= c;
        const auto ms = mean_embedding(seq, scaled);
        for (int32_t k = 0; k < dim; ++k) {
            CHECK(ms[k] == doctest::Approx(c * base[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fixture mean embedding with an independent summation oracle") {
    const auto table = fixtures::toy_a_verifier().table();
    const Sequence seq{0, 1, 2, 3, 4};
    const auto m = mean_embedding(seq, table);

    // independent per-component accumulation, reversed order
    for (int32_t k = 0; k < table.dim; ++k) {
        double acc = 0.0;
        for (size_t j = seq.size(); j-- > 0;) acc += table.row(seq[j])[k];
        CHECK(std::abs(m[k] - acc / 5.0) <= 1e-12);
    }

    const std::vector<double> frozen{-0.17026016964219692, 0.18746061153148671,
                                     -0.59165223850922544, -0.62033194243511647};
    for (int32_t k = 0; k < table.dim; ++k) {
        CHECK(m[k] == doctest::Approx(frozen[k]).epsilon(1e-12));
    }
}

TEST_CASE("validate_prob_vector") {
    const Vocab vocab(4);
    CHECK(validate_prob_vector({0.25, 0.25, 0.25, 0.25}, vocab));
    CHECK_FALSE(validate_prob_vector({0.25, 0.25, 0.0, 0.0}, vocab));
    CHECK(validate_prob_vector({0.0, 0.0, 0.0, 1.0}, vocab));
    CHECK_FALSE(validate_prob_vector({-0.1, 0.5, 0.3, 0.3}, vocab));
    CHECK_THROWS_AS(validate_prob_vector({0.5, 0.5}, vocab), std::invalid_argument);
}

TEST_CASE("rng determinism and derivation") {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // derive depends on the seed, not consumption
    Rng c(7);
    c.next_u64();
    Rng d1 = c.derive(3);
    Rng d2 = Rng(7).derive(3);
    for (int i = 0; i < 10; ++i) CHECK(d1.next_u64() == d2.next_u64());

    // distinct streams
    Rng e1 = Rng(7).derive(0);
    Rng e2 = Rng(7).derive(1);
    CHECK(e1.next_u64() != e2.next_u64());

    CHECK_THROWS_AS(Rng(RngSpec{1, "mt19937"}), std::invalid_argument);
}

TEST_CASE("uniform_int and uniform01 ranges") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int32_t k = rng.uniform_int(7);
        CHECK(k >= 0);
        CHECK(k < 7);
    }
}

TEST_CASE("sample_categorical respects the distribution") {
    Rng rng(5);
    const ProbVector probs{0.5, 0.0, 0.25, 0.25};
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 20000; ++i) ++counts[sample_categorical(probs, rng)];
    CHECK(counts[1] == 0);
    CHECK(counts[0] > 9500);
    CHECK(counts[0] < 10500);
    CHECK(counts[2] + counts[3] > 9500);
}

TEST_CASE("log_sum_exp") {
    const std::vector<double> x{std::log(1.0), std::log(2.0), std::log(3.0)};
    CHECK(log_sum_exp(x) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}
