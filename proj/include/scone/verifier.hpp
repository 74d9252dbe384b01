#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "scone/core.hpp"

namespace scone {

// Which quantity the stored gradient differentiates. The default expands the
// post-sigmoid probability; logit space is kept for experimentation.
enum class GradientSpace { probability, logit };

// First-order view of the verifier at an anchor sequence.
struct Linearization {
    double score = 0.0;   // sigma(logit), in (0,1)
    double logit = 0.0;   // pre-sigmoid value
    std::vector<double> gradient;          // d-vector w.r.t. the pooled embedding
    std::vector<double> anchor_embedding;  // mean_embedding of the anchor
    GradientSpace space = GradientSpace::probability;
};

// Differentiable sequence scorer: embedding table -> mean pool -> score.
// Scoring any pooled point is exposed so tests can finite-difference the
// gradient without touching tokens.
class Verifier {
public:
    virtual ~Verifier() = default;

    virtual const EmbeddingTable& table() const = 0;
    virtual int32_t horizon() const = 0;

    virtual double score_pooled(const std::vector<double>& x) const = 0;
    virtual Linearization linearize_pooled(const std::vector<double>& x,
                                           GradientSpace space) const = 0;

    virtual double score(const Sequence& seq) const;
    virtual Linearization linearize(const Sequence& seq,
                                    GradientSpace space = GradientSpace::probability) const;

    virtual void save(std::ostream& os) const = 0;

protected:
    void check_complete(const Sequence& seq) const;
};

struct MlpVerifierSpec {
    int32_t vocab = 0;
    int32_t dim = 0;
    int32_t hidden = 0;
    int32_t horizon = 0;
    uint64_t seed = 0;
    // multipliers on top of the Normal(0, 1/sqrt(fan_in)) weight init and the
    // Normal(0, 1) embedding rows; biases start at zero
    double weight_scale = 1.0;
    double emb_scale = 1.0;
};

// sigma(w2 . tanh(W1 x + b1) + b2) on the mean-pooled embedding x.
class MlpVerifier : public Verifier {
public:
    explicit MlpVerifier(const MlpVerifierSpec& spec);

    const EmbeddingTable& table() const override { return table_; }
    int32_t horizon() const override { return horizon_; }

    double score_pooled(const std::vector<double>& x) const override;
    Linearization linearize_pooled(const std::vector<double>& x,
                                   GradientSpace space) const override;

    void save(std::ostream& os) const override;
    static MlpVerifier load(std::istream& is);

    EmbeddingTable table_;
    std::vector<double> w1;  // hidden x dim, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
    int32_t hidden = 0;
    int32_t horizon_ = 0;

private:
    MlpVerifier() = default;
};

struct LinearVerifierSpec {
    int32_t vocab = 0;
    int32_t dim = 0;
    int32_t horizon = 0;
    uint64_t seed = 0;
    double weight_scale = 1.0;  // w ~ Normal(0, weight_scale / sqrt(dim))
    double emb_scale = 1.0;
};

// sigma(w . x + b). Affine in the pooled embedding, so the first-order
// expansion of the logit is exact; exists to make the estimator testable.
class LinearVerifier : public Verifier {
public:
    explicit LinearVerifier(const LinearVerifierSpec& spec);

    // explicit weights (e.g. the constant verifier w = 0, b = 0)
    LinearVerifier(EmbeddingTable table, std::vector<double> w, double b, int32_t horizon);

    const EmbeddingTable& table() const override { return table_; }
    int32_t horizon() const override { return horizon_; }

    double score_pooled(const std::vector<double>& x) const override;
    Linearization linearize_pooled(const std::vector<double>& x,
                                   GradientSpace space) const override;

    void save(std::ostream& os) const override;
    static LinearVerifier load(std::istream& is);

    EmbeddingTable table_;
    std::vector<double> w;
    double b = 0.0;
    int32_t horizon_ = 0;
};

// Dispatches on the header tag ("mlp" | "linear").
std::unique_ptr<Verifier> load_verifier(std::istream& is);

double sigmoid(double x);

}  // namespace scone
