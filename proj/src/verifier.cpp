#include "scone/verifier.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace scone {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void Verifier::check_complete(const Sequence& seq) const {
    if (static_cast<int32_t>(seq.size()) != horizon()) {
        throw std::invalid_argument("verifier expects a complete sequence of length " +
                                    std::to_string(horizon()) + ", got " +
                                    std::to_string(seq.size()));
    }
}

double Verifier::score(const Sequence& seq) const {
    check_complete(seq);
    return score_pooled(mean_embedding(seq, table()));
}

Linearization Verifier::linearize(const Sequence& seq, GradientSpace space) const {
    check_complete(seq);
    std::vector<double> x = mean_embedding(seq, table());
    Linearization lin = linearize_pooled(x, space);
    lin.anchor_embedding = std::move(x);
    return lin;
}

namespace {

EmbeddingTable random_table(int32_t vocab, int32_t dim, Rng& rng, double scale) {
    EmbeddingTable table(vocab, dim);
    for (double& x : table.data) x = rng.normal(0.0, scale);
    return table;
}

void write_values(std::ostream& os, const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    os << "\n";
}

std::vector<double> read_values(std::istream& is, size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        if (!(is >> x)) throw std::invalid_argument("truncated verifier file");
    }
    return v;
}

}  // namespace

MlpVerifier::MlpVerifier(const MlpVerifierSpec& spec) {
    if (spec.dim < 1 || spec.hidden < 1 || spec.vocab < 2 || spec.horizon < 1) {
        throw std::invalid_argument("bad mlp verifier spec");
    }
    Rng rng(spec.seed);
    Rng table_rng = rng.derive(0);
    Rng w1_rng = rng.derive(1);
    Rng w2_rng = rng.derive(2);

    table_ = random_table(spec.vocab, spec.dim, table_rng, spec.emb_scale);
    hidden = spec.hidden;
    horizon_ = spec.horizon;

    const double s1 = spec.weight_scale / std::sqrt(static_cast<double>(spec.dim));
    const double s2 = spec.weight_scale / std::sqrt(static_cast<double>(spec.hidden));
    w1.resize(static_cast<size_t>(hidden) * spec.dim);
    for (double& x : w1) x = w1_rng.normal(0.0, s1);
    b1.assign(hidden, 0.0);
    w2.resize(hidden);
    for (double& x : w2) x = w2_rng.normal(0.0, s2);
    b2 = 0.0;
}

double MlpVerifier::score_pooled(const std::vector<double>& x) const {
    if (static_cast<int32_t>(x.size()) != table_.dim) {
        throw std::invalid_argument("pooled embedding dimension mismatch");
    }
    double logit = b2;
    for (int32_t j = 0; j < hidden; ++j) {
        double z = b1[j];
        const double* row = w1.data() + static_cast<size_t>(j) * table_.dim;
        for (int32_t k = 0; k < table_.dim; ++k) z += row[k] * x[k];
        logit += w2[j] * std::tanh(z);
    }
    return sigmoid(logit);
}

Linearization MlpVerifier::linearize_pooled(const std::vector<double>& x,
                                            GradientSpace space) const {
    if (static_cast<int32_t>(x.size()) != table_.dim) {
        throw std::invalid_argument("pooled embedding dimension mismatch");
    }
    std::vector<double> t(hidden);
    double logit = b2;
    for (int32_t j = 0; j < hidden; ++j) {
        double z = b1[j];
        const double* row = w1.data() + static_cast<size_t>(j) * table_.dim;
        for (int32_t k = 0; k < table_.dim; ++k) z += row[k] * x[k];
        t[j] = std::tanh(z);
        logit += w2[j] * t[j];
    }
    const double s = sigmoid(logit);

    Linearization lin;
    lin.score = s;
    lin.logit = logit;
    lin.space = space;
    lin.gradient.assign(table_.dim, 0.0);
    // d logit / dx = W1^T (w2 ⊙ (1 - tanh^2 z))
    for (int32_t j = 0; j < hidden; ++j) {
        const double c = w2[j] * (1.0 - t[j] * t[j]);
        const double* row = w1.data() + static_cast<size_t>(j) * table_.dim;
        for (int32_t k = 0; k < table_.dim; ++k) lin.gradient[k] += c * row[k];
    }
    if (space == GradientSpace::probability) {
        const double sp = s * (1.0 - s);
        for (double& g : lin.gradient) g *= sp;
    }
    return lin;
}

void MlpVerifier::save(std::ostream& os) const {
    os << "mlp " << table_.vocab << " " << table_.dim << " " << hidden << " " << horizon_ << "\n";
    os.precision(17);
    write_values(os, table_.data);
    write_values(os, w1);
    write_values(os, b1);
    write_values(os, w2);
    os << b2 << "\n";
}

MlpVerifier MlpVerifier::load(std::istream& is) {
    int32_t vocab = 0, dim = 0, hidden = 0, horizon = 0;
    if (!(is >> vocab >> dim >> hidden >> horizon)) {
        throw std::invalid_argument("bad mlp verifier header");
    }
    MlpVerifier v;
    v.table_ = EmbeddingTable(vocab, dim);
    v.table_.data = read_values(is, static_cast<size_t>(vocab) * dim);
    v.w1 = read_values(is, static_cast<size_t>(hidden) * dim);
    v.b1 = read_values(is, static_cast<size_t>(hidden));
    v.w2 = read_values(is, static_cast<size_t>(hidden));
    v.b2 = read_values(is, 1)[0];
    v.hidden = hidden;
    v.horizon_ = horizon;
    return v;
}

LinearVerifier::LinearVerifier(const LinearVerifierSpec& spec) {
    if (spec.dim < 1 || spec.vocab < 2 || spec.horizon < 1) {
        throw std::invalid_argument("bad linear verifier spec");
    }
    Rng rng(spec.seed);
    Rng table_rng = rng.derive(0);
    Rng w_rng = rng.derive(1);
    table_ = random_table(spec.vocab, spec.dim, table_rng, spec.emb_scale);
    w.resize(spec.dim);
    const double s = spec.weight_scale / std::sqrt(static_cast<double>(spec.dim));
    for (double& x : w) x = w_rng.normal(0.0, s);
    b = 0.0;
    horizon_ = spec.horizon;
}

LinearVerifier::LinearVerifier(EmbeddingTable table, std::vector<double> weights, double bias,
                               int32_t horizon)
    : table_(std::move(table)), w(std::move(weights)), b(bias), horizon_(horizon) {
    if (static_cast<int32_t>(w.size()) != table_.dim) {
        throw std::invalid_argument("linear verifier weight dimension mismatch");
    }
}

double LinearVerifier::score_pooled(const std::vector<double>& x) const {
    if (x.size() != w.size()) {
        throw std::invalid_argument("pooled embedding dimension mismatch");
    }
    double logit = b;
    for (size_t k = 0; k < w.size(); ++k) logit += w[k] * x[k];
    return sigmoid(logit);
}

Linearization LinearVerifier::linearize_pooled(const std::vector<double>& x,
                                               GradientSpace space) const {
    if (x.size() != w.size()) {
        throw std::invalid_argument("pooled embedding dimension mismatch");
    }
    double logit = b;
    for (size_t k = 0; k < w.size(); ++k) logit += w[k] * x[k];
    const double s = sigmoid(logit);

    Linearization lin;
    lin.score = s;
    lin.logit = logit;
    lin.space = space;
    lin.gradient = w;
    if (space == GradientSpace::probability) {
        const double sp = s * (1.0 - s);
        for (double& g : lin.gradient) g *= sp;
    }
    return lin;
}

void LinearVerifier::save(std::ostream& os) const {
    os << "linear " << table_.vocab << " " << table_.dim << " " << horizon_ << "\n";
    os.precision(17);
    write_values(os, table_.data);
    write_values(os, w);
    os << b << "\n";
}

LinearVerifier LinearVerifier::load(std::istream& is) {
    int32_t vocab = 0, dim = 0, horizon = 0;
    if (!(is >> vocab >> dim >> horizon)) {
        throw std::invalid_argument("bad linear verifier header");
    }
    EmbeddingTable table(vocab, dim);
    table.data = read_values(is, static_cast<size_t>(vocab) * dim);
    std::vector<double> w = read_values(is, static_cast<size_t>(dim));
    const double b = read_values(is, 1)[0];
    return LinearVerifier(std::move(table), std::move(w), b, horizon);
}

std::unique_ptr<Verifier> load_verifier(std::istream& is) {
    std::string tag;
    if (!(is >> tag)) throw std::invalid_argument("empty verifier stream");
    if (tag == "mlp") return std::make_unique<MlpVerifier>(MlpVerifier::load(is));
    if (tag == "linear") return std::make_unique<LinearVerifier>(LinearVerifier::load(is));
    throw std::invalid_argument("unknown verifier tag: " + tag);
}

}  // namespace scone
