#include "scone/gibbs.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace scone {

void GibbsConfig::validate() const {
    if (chains < 1) throw std::invalid_argument("gibbs: chains must be >= 1");
    if (iterations < 1) throw std::invalid_argument("gibbs: iterations must be >= 1");
    if (thinning < 1 || thinning > iterations) {
        throw std::invalid_argument("gibbs: thinning must be in [1, iterations]");
    }
    if (workers < 1) throw std::invalid_argument("gibbs: workers must be >= 1");
    if (lookahead < 0) throw std::invalid_argument("gibbs: lookahead must be >= 0");
    if (lookahead > 0 && (block_size < 1 || block_size > lookahead)) {
        throw std::invalid_argument("gibbs: block size must be in [1, lookahead]");
    }
    if (samples_per_chain() < 1) {
        throw std::invalid_argument(
            "gibbs: no collection points; need burn_in + thinning <= iterations");
    }
}

GibbsState::GibbsState(const Sequence& initial, int32_t prefix, int32_t workers)
    : buffer(initial.size()), prefix_len(prefix), updates_per_worker(workers, 0) {
    for (size_t i = 0; i < initial.size(); ++i) {
        buffer[i].store(initial[i], std::memory_order_relaxed);
    }
}

Sequence GibbsState::snapshot() const {
    Sequence out(buffer.size());
    for (size_t i = 0; i < buffer.size(); ++i) out[i] = buffer[i].load(std::memory_order_relaxed);
    return out;
}

Sequence initialize_sequence(const LmInterface& lm, const Sequence& prefix, int32_t delta,
                             GibbsInit mode, Rng& rng) {
    if (static_cast<int32_t>(prefix.size()) + delta != lm.horizon()) {
        throw std::invalid_argument("initialize_sequence: prefix length + lookahead != horizon");
    }
    Sequence seq = prefix;
    if (delta == 0) return seq;
    seq.reserve(prefix.size() + delta);
    if (mode == GibbsInit::crude_autoregressive) {
        const ProbVector crude = lm.next_token_dist(prefix);
        for (int32_t k = 0; k < delta; ++k) seq.push_back(sample_categorical(crude, rng));
    } else {
        for (int32_t k = 0; k < delta; ++k) seq.push_back(rng.uniform_int(lm.vocab().size));
    }
    return seq;
}

namespace {

// One block update against `local`, writing each resampled token through
// `write`. `local` always reflects this worker's own writes, so within the
// block positions are conditioned on the freshest local state.
template <typename WriteFn>
void block_update(const LmInterface& lm, const TabularJointLM* tabular, const GibbsConfig& cfg,
                  Sequence& local, int32_t prefix_len, Rng& rng, WriteFn&& write) {
    const int32_t delta = cfg.lookahead;
    const int32_t b = cfg.block_size;
    const int32_t j = prefix_len + rng.uniform_int(delta - b + 1);

    if (cfg.block_mode == BlockMode::joint_enumeration) {
        if (tabular == nullptr) {
            throw std::invalid_argument("joint_enumeration block mode needs a tabular model");
        }
        const std::vector<double> dist = tabular->block_conditional(local, j, b);
        uint64_t c = static_cast<uint64_t>(sample_categorical(dist, rng));
        for (int32_t k = b - 1; k >= 0; --k) {
            const Token t = static_cast<Token>(c % static_cast<uint64_t>(lm.vocab().size));
            c /= static_cast<uint64_t>(lm.vocab().size);
            local[j + k] = t;
        }
        for (int32_t k = 0; k < b; ++k) write(j + k, local[j + k]);
        return;
    }

    for (int32_t pos = j; pos < j + b; ++pos) {
        const ProbVector pv = lm.masked_conditional(local, pos);
        const Token t = sample_categorical(pv, rng);
        local[pos] = t;
        write(pos, t);
    }
}

std::vector<Sequence> run_single_chain(const LmInterface& lm, const Sequence& prefix,
                                       const GibbsConfig& cfg, const Rng& chain_rng,
                                       const IterationHook* hook) {
    const auto prefix_len = static_cast<int32_t>(prefix.size());
    const TabularJointLM* tabular = dynamic_cast<const TabularJointLM*>(&lm);

    Rng init_rng = chain_rng.derive(0);
    Sequence state = initialize_sequence(lm, prefix, cfg.lookahead, cfg.init, init_rng);
    Rng worker_rng = chain_rng.derive(1);

    const int32_t burn = cfg.burn_in();
    std::vector<Sequence> samples;
    samples.reserve(cfg.samples_per_chain());
    for (int32_t t = 1; t <= cfg.iterations; ++t) {
        if (cfg.lookahead > 0) {
            block_update(lm, tabular, cfg, state, prefix_len, worker_rng,
                         [](int32_t, Token) {});
        }
        if (hook != nullptr) (*hook)(t, state);
        if (t > burn && (t - burn) % cfg.thinning == 0) samples.push_back(state);
    }
    return samples;
}

void run_chain_parallel(const LmInterface& lm, const Sequence& prefix, const GibbsConfig& cfg,
                        const Rng& chain_rng, std::vector<Sequence>& out) {
    const auto prefix_len = static_cast<int32_t>(prefix.size());
    const TabularJointLM* tabular = dynamic_cast<const TabularJointLM*>(&lm);

    Rng init_rng = chain_rng.derive(0);
    Sequence initial = initialize_sequence(lm, prefix, cfg.lookahead, cfg.init, init_rng);
    GibbsState state(initial, prefix_len, cfg.workers);

    std::vector<Rng> worker_rngs;
    worker_rngs.reserve(cfg.workers);
    for (int32_t w = 0; w < cfg.workers; ++w) worker_rngs.push_back(chain_rng.derive(1 + w));

    // Update u (0-based) belongs to worker u % W. Workers run their share of
    // each inter-collection segment concurrently and meet at a barrier
    // (thread join) before the state is snapshotted.
    const int32_t burn = cfg.burn_in();
    int32_t prev = 0;
    auto run_segment = [&](int32_t upto) {
        if (upto <= prev || cfg.lookahead == 0) {
            prev = std::max(prev, upto);
            return;
        }
        std::vector<std::thread> threads;
        threads.reserve(cfg.workers);
        for (int32_t w = 0; w < cfg.workers; ++w) {
            int64_t count = 0;
            for (int32_t u = prev; u < upto; ++u) {
                if (u % cfg.workers == w) ++count;
            }
            threads.emplace_back([&, w, count]() {
                for (int64_t n = 0; n < count; ++n) {
                    // read (potentially stale) shared state at block start
                    Sequence local = state.snapshot();
                    block_update(lm, tabular, cfg, local, prefix_len, worker_rngs[w],
                                 [&](int32_t pos, Token t) {
                                     state.buffer[pos].store(t, std::memory_order_relaxed);
                                 });
                    ++state.updates_per_worker[w];
                }
            });
        }
        for (auto& th : threads) th.join();
        prev = upto;
    };

    for (int32_t t = burn + cfg.thinning; t <= cfg.iterations; t += cfg.thinning) {
        run_segment(t);
        state.samples.push_back(state.snapshot());
    }
    run_segment(cfg.iterations);

    out.insert(out.end(), state.samples.begin(), state.samples.end());
}

}  // namespace

std::vector<Sequence> run_chain(const LmInterface& lm, const Sequence& prefix,
                                const GibbsConfig& cfg, const Rng& rng) {
    cfg.validate();
    if (cfg.workers != 1) throw std::invalid_argument("run_chain requires workers == 1");
    if (static_cast<int32_t>(prefix.size()) + cfg.lookahead != lm.horizon()) {
        throw std::invalid_argument("run_chain: prefix length + lookahead != horizon");
    }
    return run_single_chain(lm, prefix, cfg, rng, nullptr);
}

std::vector<Sequence> run_chain_traced(const LmInterface& lm, const Sequence& prefix,
                                       const GibbsConfig& cfg, const Rng& rng,
                                       const IterationHook& hook) {
    cfg.validate();
    if (cfg.workers != 1) throw std::invalid_argument("run_chain requires workers == 1");
    if (static_cast<int32_t>(prefix.size()) + cfg.lookahead != lm.horizon()) {
        throw std::invalid_argument("run_chain: prefix length + lookahead != horizon");
    }
    return run_single_chain(lm, prefix, cfg, rng, &hook);
}

std::vector<Sequence> run_hogwild(const LmInterface& lm, const Sequence& prefix,
                                  const GibbsConfig& cfg, const Rng& rng) {
    cfg.validate();
    if (static_cast<int32_t>(prefix.size()) + cfg.lookahead != lm.horizon()) {
        throw std::invalid_argument("run_hogwild: prefix length + lookahead != horizon");
    }
    std::vector<Sequence> merged;
    merged.reserve(static_cast<size_t>(cfg.chains) * cfg.samples_per_chain());
    for (int32_t c = 0; c < cfg.chains; ++c) {
        const Rng chain_rng = rng.derive(c);
        if (cfg.workers == 1) {
            auto samples = run_single_chain(lm, prefix, cfg, chain_rng, nullptr);
            merged.insert(merged.end(), samples.begin(), samples.end());
        } else {
            run_chain_parallel(lm, prefix, cfg, chain_rng, merged);
        }
    }
    return merged;
}

std::vector<Sequence> draw_lookahead_samples(const LmInterface& lm, const Sequence& prefix,
                                             const GibbsConfig& cfg, int32_t count,
                                             const Rng& rng) {
    if (count < 1) throw std::invalid_argument("draw_lookahead_samples: count must be >= 1");
    std::vector<Sequence> out;
    out.reserve(count);
    for (uint64_t run = 0; static_cast<int32_t>(out.size()) < count; ++run) {
        auto samples = run_hogwild(lm, prefix, cfg, rng.derive(run));
        for (auto& s : samples) {
            if (static_cast<int32_t>(out.size()) >= count) break;
            out.push_back(std::move(s));
        }
    }
    return out;
}

NoisyMaskedLm::NoisyMaskedLm(const LmInterface& base, double magnitude, uint64_t seed)
    : base_(base), magnitude_(magnitude), seed_(seed) {
    if (magnitude < 0.0) throw std::invalid_argument("noise magnitude must be >= 0");
}

ProbVector NoisyMaskedLm::next_token_dist(const Sequence& prefix) const {
    return base_.next_token_dist(prefix);
}

ProbVector NoisyMaskedLm::masked_conditional(const Sequence& seq, int32_t pos) const {
    ProbVector pv = base_.masked_conditional(seq, pos);
    if (magnitude_ == 0.0) return pv;

    // Noise is a pure function of (seed, masked context, position), so the
    // adapter behaves like a fixed approximate model, not a noisy channel.
    uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<uint64_t>(pos)));
    for (size_t i = 0; i < seq.size(); ++i) {
        if (static_cast<int32_t>(i) == pos) continue;
        h = splitmix64(h ^ splitmix64(static_cast<uint64_t>(seq[i]) + 0x9E37 * (i + 1)));
    }
    double z = 0.0;
    for (size_t v = 0; v < pv.size(); ++v) {
        if (pv[v] == 0.0) continue;
        const uint64_t hv = splitmix64(h ^ splitmix64(v * 2 + 1));
        const double u1 = 1.0 - static_cast<double>(hv >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(splitmix64(hv) >> 11) * 0x1.0p-53;
        const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        pv[v] = std::exp(std::log(pv[v]) + magnitude_ * g);
        z += pv[v];
    }
    for (double& p : pv) p /= z;
    return pv;
}

}  // namespace scone
