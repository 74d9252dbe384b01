#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scone/core.hpp"
#include "scone/toy_lm.hpp"

namespace scone {

enum class NodeKind { leaf, sum, product };

// Node of a smooth, decomposable circuit over sequence positions. Leaves are
// categoricals over one position; sums mix children of identical scope;
// products are binary with disjoint scopes.
struct CircuitNode {
    NodeKind kind = NodeKind::leaf;
    std::vector<int32_t> scope;  // sorted position indices

    // leaf
    int32_t position = -1;
    ProbVector categorical;

    // sum / product
    std::vector<std::shared_ptr<const CircuitNode>> children;
    std::vector<double> weights;  // sum nodes only
};

using CircuitNodePtr = std::shared_ptr<const CircuitNode>;

CircuitNodePtr make_leaf(int32_t position, ProbVector categorical);
CircuitNodePtr make_sum(std::vector<CircuitNodePtr> children, std::vector<double> weights);
CircuitNodePtr make_product(CircuitNodePtr left, CircuitNodePtr right);

// Pseudolikelihood of sequences in the neighborhood of an anchor: position i
// carries p(y_i | anchor_{-i}), except clamped prefix positions which are
// one-hot at the anchor token. Fully factorized, built as a right-deep chain
// of binary products so the generic circuit machinery is exercised.
struct LocalFactorizedDistribution {
    Sequence anchor;
    int32_t clamped = 0;                 // prefix length held fixed
    std::vector<ProbVector> categoricals;  // one per position
    CircuitNodePtr root;

    int32_t num_positions() const { return static_cast<int32_t>(categoricals.size()); }
};

LocalFactorizedDistribution build_local_distribution(const LmInterface& lm,
                                                     const Sequence& anchor, int32_t clamped);

// Bottom-up point evaluation; equals the product of per-position entries for
// the factorized chain.
double circuit_likelihood(const LocalFactorizedDistribution& dist, const Sequence& seq);
double evaluate_circuit(const CircuitNode& node, const Sequence& seq);

// E[(1/T) sum_i emb(y_i)] under the circuit distribution. Leaves emit their
// categorical-weighted embedding expectation, sums mix, products add, and the
// subtree normalization is carried along so unnormalized leaves stay correct.
std::vector<double> expected_mean_embedding(const LocalFactorizedDistribution& dist,
                                            const EmbeddingTable& table);

// Empty iff every sum is smooth, every product is binary and decomposable,
// and scopes are consistent with children. Violations are data, not errors.
std::vector<std::string> validate_structure(const CircuitNode& root);

}  // namespace scone
