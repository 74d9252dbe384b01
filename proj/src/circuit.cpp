#include "scone/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scone {

CircuitNodePtr make_leaf(int32_t position, ProbVector categorical) {
    if (position < 0) throw std::invalid_argument("leaf position must be >= 0");
    auto node = std::make_shared<CircuitNode>();
    node->kind = NodeKind::leaf;
    node->position = position;
    node->scope = {position};
    node->categorical = std::move(categorical);
    return node;
}

CircuitNodePtr make_sum(std::vector<CircuitNodePtr> children, std::vector<double> weights) {
    if (children.empty() || children.size() != weights.size()) {
        throw std::invalid_argument("sum node needs matching children and weights");
    }
    auto node = std::make_shared<CircuitNode>();
    node->kind = NodeKind::sum;
    node->scope = children.front()->scope;
    node->children = std::move(children);
    node->weights = std::move(weights);
    return node;
}

CircuitNodePtr make_product(CircuitNodePtr left, CircuitNodePtr right) {
    auto node = std::make_shared<CircuitNode>();
    node->kind = NodeKind::product;
    node->scope.resize(left->scope.size() + right->scope.size());
    std::merge(left->scope.begin(), left->scope.end(), right->scope.begin(), right->scope.end(),
               node->scope.begin());
    node->children = {std::move(left), std::move(right)};
    return node;
}

LocalFactorizedDistribution build_local_distribution(const LmInterface& lm,
                                                     const Sequence& anchor, int32_t clamped) {
    const int32_t horizon = lm.horizon();
    if (static_cast<int32_t>(anchor.size()) != horizon) {
        throw std::invalid_argument("anchor must be a complete sequence");
    }
    if (clamped < 0 || clamped > horizon) {
        throw std::invalid_argument("clamped prefix length out of range");
    }

    LocalFactorizedDistribution dist;
    dist.anchor = anchor;
    dist.clamped = clamped;
    dist.categoricals.reserve(horizon);
    for (int32_t pos = 0; pos < horizon; ++pos) {
        if (pos < clamped) {
            ProbVector onehot(lm.vocab().size, 0.0);
            onehot[anchor[pos]] = 1.0;
            dist.categoricals.push_back(std::move(onehot));
        } else {
            dist.categoricals.push_back(lm.masked_conditional(anchor, pos));
        }
    }

    CircuitNodePtr chain = make_leaf(horizon - 1, dist.categoricals[horizon - 1]);
    for (int32_t pos = horizon - 2; pos >= 0; --pos) {
        chain = make_product(make_leaf(pos, dist.categoricals[pos]), std::move(chain));
    }
    dist.root = std::move(chain);
    return dist;
}

double evaluate_circuit(const CircuitNode& node, const Sequence& seq) {
    switch (node.kind) {
        case NodeKind::leaf: {
            const Token t = seq.at(node.position);
            if (t < 0 || t >= static_cast<Token>(node.categorical.size())) {
                throw std::invalid_argument("token out of leaf categorical range");
            }
            return node.categorical[t];
        }
        case NodeKind::sum: {
            double acc = 0.0;
            for (size_t k = 0; k < node.children.size(); ++k) {
                acc += node.weights[k] * evaluate_circuit(*node.children[k], seq);
            }
            return acc;
        }
        case NodeKind::product: {
            double acc = 1.0;
            for (const auto& child : node.children) acc *= evaluate_circuit(*child, seq);
            return acc;
        }
    }
    throw std::logic_error("unreachable");
}

double circuit_likelihood(const LocalFactorizedDistribution& dist, const Sequence& seq) {
    if (seq.size() != dist.categoricals.size()) {
        throw std::invalid_argument("sequence length does not match distribution");
    }
    return evaluate_circuit(*dist.root, seq);
}

namespace {

struct EmbStat {
    double norm = 1.0;            // subtree normalization constant
    std::vector<double> moment;   // norm * E[sum of embeddings over scope]
};

EmbStat embedding_pass(const CircuitNode& node, const EmbeddingTable& table) {
    switch (node.kind) {
        case NodeKind::leaf: {
            if (static_cast<int32_t>(node.categorical.size()) != table.vocab) {
                throw std::invalid_argument("leaf categorical size does not match table vocab");
            }
            EmbStat stat;
            stat.norm = 0.0;
            stat.moment.assign(table.dim, 0.0);
            for (int32_t v = 0; v < table.vocab; ++v) {
                const double p = node.categorical[v];
                if (p == 0.0) continue;
                stat.norm += p;
                auto r = table.row(v);
                for (int32_t k = 0; k < table.dim; ++k) stat.moment[k] += p * r[k];
            }
            return stat;
        }
        case NodeKind::sum: {
            EmbStat stat;
            stat.norm = 0.0;
            stat.moment.assign(table.dim, 0.0);
            for (size_t c = 0; c < node.children.size(); ++c) {
                EmbStat child = embedding_pass(*node.children[c], table);
                stat.norm += node.weights[c] * child.norm;
                for (int32_t k = 0; k < table.dim; ++k) {
                    stat.moment[k] += node.weights[c] * child.moment[k];
                }
            }
            return stat;
        }
        case NodeKind::product: {
            EmbStat left = embedding_pass(*node.children[0], table);
            EmbStat right = embedding_pass(*node.children[1], table);
            EmbStat stat;
            stat.norm = left.norm * right.norm;
            stat.moment.assign(table.dim, 0.0);
            for (int32_t k = 0; k < table.dim; ++k) {
                stat.moment[k] = left.norm * right.moment[k] + right.norm * left.moment[k];
            }
            return stat;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

std::vector<double> expected_mean_embedding(const LocalFactorizedDistribution& dist,
                                            const EmbeddingTable& table) {
    if (dist.categoricals.empty()) {
        throw std::invalid_argument("distribution has no positions");
    }
    EmbStat stat = embedding_pass(*dist.root, table);
    if (stat.norm <= 0.0) throw std::runtime_error("circuit has zero total mass");
    const double scale = 1.0 / (stat.norm * dist.num_positions());
    for (double& x : stat.moment) x *= scale;
    return stat.moment;
}

namespace {

void validate_node(const CircuitNode& node, std::vector<std::string>& out) {
    switch (node.kind) {
        case NodeKind::leaf: {
            if (node.scope.size() != 1 || node.scope[0] != node.position) {
                out.push_back("leaf at position " + std::to_string(node.position) +
                              " has inconsistent scope");
            }
            for (double p : node.categorical) {
                if (!(p >= 0.0)) {
                    out.push_back("leaf at position " + std::to_string(node.position) +
                                  " has a negative categorical entry");
                    break;
                }
            }
            return;
        }
        case NodeKind::sum: {
            double wsum = 0.0;
            for (double w : node.weights) {
                if (w < 0.0) out.push_back("sum node has a negative weight");
                wsum += w;
            }
            if (std::abs(wsum - 1.0) > kProbTolerance) {
                out.push_back("sum node weights do not sum to 1");
            }
            for (const auto& child : node.children) {
                if (child->scope != node.children.front()->scope) {
                    out.push_back("smoothness violation: sum children have different scopes");
                    break;
                }
            }
            if (!node.children.empty() && node.scope != node.children.front()->scope) {
                out.push_back("sum node scope differs from its children");
            }
            break;
        }
        case NodeKind::product: {
            if (node.children.size() != 2) {
                out.push_back("product node is not binary");
            }
            std::vector<int32_t> merged;
            for (const auto& child : node.children) {
                merged.insert(merged.end(), child->scope.begin(), child->scope.end());
            }
            std::sort(merged.begin(), merged.end());
            if (std::adjacent_find(merged.begin(), merged.end()) != merged.end()) {
                out.push_back("decomposability violation: product children share scope");
            }
            if (merged != node.scope) {
                out.push_back("product node scope is not the union of child scopes");
            }
            break;
        }
    }
    for (const auto& child : node.children) validate_node(*child, out);
}

}  // namespace

std::vector<std::string> validate_structure(const CircuitNode& root) {
    std::vector<std::string> violations;
    validate_node(root, violations);
    return violations;
}

}  // namespace scone
