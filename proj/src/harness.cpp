#include "scone/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "scone/gibbs.hpp"
#include "scone/oracle.hpp"

namespace scone::harness {

namespace {

double round2(double pct) { return std::round(pct * 100.0) / 100.0; }

void check_groups(const std::vector<std::vector<double>>& groups) {
    if (groups.empty()) throw std::invalid_argument("metrics need at least one prompt group");
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("metrics: empty generation group");
    }
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

double average_score(const std::vector<std::vector<double>>& groups) {
    check_groups(groups);
    double sum = 0.0;
    size_t n = 0;
    for (const auto& g : groups) {
        for (double s : g) sum += s;
        n += g.size();
    }
    return 100.0 * sum / static_cast<double>(n);
}

double constraint_probability(const std::vector<std::vector<double>>& groups, double tau,
                              ConstraintMode mode, double fraction) {
    check_groups(groups);
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0, 1)");
    const size_t group_size = groups.front().size();
    for (const auto& g : groups) {
        if (g.size() != group_size) {
            throw std::invalid_argument("constraint_probability: inconsistent group sizes");
        }
    }
    int32_t satisfied = 0;
    for (const auto& g : groups) {
        int32_t passes = 0;
        for (double s : g) passes += s >= tau ? 1 : 0;
        if (mode == ConstraintMode::any) {
            satisfied += passes >= 1 ? 1 : 0;
        } else {
            satisfied += static_cast<double>(passes) >= fraction * static_cast<double>(g.size())
                             ? 1
                             : 0;
        }
    }
    return 100.0 * static_cast<double>(satisfied) / static_cast<double>(groups.size());
}

double expected_worst_score(const std::vector<std::vector<double>>& groups, WorstDirection dir) {
    check_groups(groups);
    double sum = 0.0;
    for (const auto& g : groups) {
        double worst = g.front();
        for (double s : g) worst = dir == WorstDirection::max ? std::max(worst, s)
                                                              : std::min(worst, s);
        sum += worst;
    }
    return 100.0 * sum / static_cast<double>(groups.size());
}

// ---------------------------------------------------------------------------

namespace {

Objective objective_from_string(const std::string& s) {
    if (s == "maximize") return Objective::maximize;
    if (s == "minimize") return Objective::minimize;
    throw std::invalid_argument("unknown objective: " + s);
}

std::string objective_to_string(Objective o) {
    return o == Objective::maximize ? "maximize" : "minimize";
}

RenormMode renorm_from_string(const std::string& s) {
    if (s == "probability-normalize") return RenormMode::probability_normalize;
    if (s == "logits-softmax") return RenormMode::logits_softmax;
    throw std::invalid_argument("unknown renorm mode: " + s);
}

GibbsInit gibbs_init_from_string(const std::string& s) {
    if (s == "crude-ar") return GibbsInit::crude_autoregressive;
    if (s == "uniform") return GibbsInit::uniform_random;
    throw std::invalid_argument("unknown gibbs init mode: " + s);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("fixture")) {
        const auto& f = j.at("fixture");
        cfg.fixture.vocab = f.value("vocab", cfg.fixture.vocab);
        cfg.fixture.horizon = f.value("horizon", cfg.fixture.horizon);
        cfg.fixture.dim = f.value("dim", cfg.fixture.dim);
        cfg.fixture.sigma = f.value("sigma", cfg.fixture.sigma);
        cfg.fixture.lm_seed = f.value("lm_seed", cfg.fixture.lm_seed);
        if (f.contains("verifier")) {
            const auto& v = f.at("verifier");
            cfg.fixture.verifier.kind = v.value("kind", cfg.fixture.verifier.kind);
            cfg.fixture.verifier.seed = v.value("seed", cfg.fixture.verifier.seed);
            cfg.fixture.verifier.hidden = v.value("hidden", cfg.fixture.verifier.hidden);
            cfg.fixture.verifier.weight_scale =
                v.value("weight_scale", cfg.fixture.verifier.weight_scale);
            cfg.fixture.verifier.emb_scale = v.value("emb_scale", cfg.fixture.verifier.emb_scale);
        }
    }
    if (j.contains("method")) {
        const auto& m = j.at("method");
        cfg.method.name = m.value("name", cfg.method.name);
        cfg.method.sampling.top_p = m.value("top_p", cfg.method.sampling.top_p);
        cfg.method.sampling.min_p = m.value("min_p", cfg.method.sampling.min_p);
        cfg.method.sampling.temperature = m.value("temperature", cfg.method.sampling.temperature);
        cfg.method.sampling.num_beams = m.value("num_beams", cfg.method.sampling.num_beams);
        cfg.method.sampling.bon_n = m.value("n", cfg.method.sampling.bon_n);
        cfg.method.decode.top_k = m.value("top_k", cfg.method.decode.top_k);
        cfg.method.decode.lookahead_samples =
            m.value("lookahead_samples", cfg.method.decode.lookahead_samples);
        cfg.method.decode.gamma = m.value("gamma", cfg.method.decode.gamma);
        cfg.method.decode.estimate_clamp =
            m.value("estimate_clamp", cfg.method.decode.estimate_clamp);
        if (m.contains("renorm")) {
            cfg.method.decode.renorm = renorm_from_string(m.at("renorm").get<std::string>());
        }
        if (m.contains("gibbs")) {
            const auto& g = m.at("gibbs");
            auto& gc = cfg.method.decode.gibbs;
            gc.chains = g.value("chains", gc.chains);
            gc.iterations = g.value("iterations", gc.iterations);
            gc.thinning = g.value("thinning", gc.thinning);
            gc.block_size = g.value("block_size", gc.block_size);
            gc.workers = g.value("workers", gc.workers);
            if (g.contains("init")) {
                gc.init = gibbs_init_from_string(g.at("init").get<std::string>());
            }
        }
    }
    if (j.contains("task")) {
        const auto& t = j.at("task");
        if (t.contains("objective")) {
            cfg.task.objective = objective_from_string(t.at("objective").get<std::string>());
        }
        cfg.task.tau = t.value("tau", cfg.task.tau);
        cfg.task.threshold_direction =
            t.value("threshold_direction", cfg.task.objective == Objective::maximize
                                               ? std::string("at_least")
                                               : std::string("at_most"));
        cfg.task.worst_direction =
            t.value("worst_direction",
                    cfg.task.objective == Objective::maximize ? std::string("min")
                                                              : std::string("max"));
    }
    if (j.contains("prompts")) {
        for (const auto& p : j.at("prompts")) {
            cfg.prompts.push_back(p.get<Sequence>());
        }
    }
    cfg.generations_per_prompt = j.value("generations_per_prompt", cfg.generations_per_prompt);
    if (j.contains("eval_lm")) {
        const auto& e = j.at("eval_lm");
        cfg.eval_lm.kind = e.value("kind", cfg.eval_lm.kind);
        cfg.eval_lm.seed = e.value("seed", cfg.eval_lm.seed);
        cfg.eval_lm.sigma = e.value("sigma", cfg.eval_lm.sigma);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output")) {
        const auto& o = j.at("output");
        cfg.output.directory = o.value("directory", cfg.output.directory);
        cfg.output.stem = o.value("stem", cfg.output.stem);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["fixture"] = {
        {"vocab", fixture.vocab},       {"horizon", fixture.horizon},
        {"dim", fixture.dim},           {"sigma", fixture.sigma},
        {"lm_seed", fixture.lm_seed},
        {"verifier",
         {{"kind", fixture.verifier.kind},
          {"seed", fixture.verifier.seed},
          {"hidden", fixture.verifier.hidden},
          {"weight_scale", fixture.verifier.weight_scale},
          {"emb_scale", fixture.verifier.emb_scale}}},
    };
    nlohmann::json m;
    m["name"] = method.name;
    if (method.name == "random" || method.name == "bon") {
        m["top_p"] = method.sampling.top_p;
        m["min_p"] = method.sampling.min_p;
        m["temperature"] = method.sampling.temperature;
    }
    if (method.name == "beamsearch") {
        m["num_beams"] = method.sampling.num_beams;
        m["temperature"] = method.sampling.temperature;
    }
    if (method.name == "bon") m["n"] = method.sampling.bon_n;
    if (method.name == "scone") {
        m["top_k"] = method.decode.top_k;
        m["lookahead_samples"] = method.decode.lookahead_samples;
        m["gamma"] = method.decode.gamma;
        m["estimate_clamp"] = method.decode.estimate_clamp;
        m["renorm"] = method.decode.renorm == RenormMode::probability_normalize
                          ? "probability-normalize"
                          : "logits-softmax";
        m["gibbs"] = {{"chains", method.decode.gibbs.chains},
                      {"iterations", method.decode.gibbs.iterations},
                      {"thinning", method.decode.gibbs.thinning},
                      {"block_size", method.decode.gibbs.block_size},
                      {"workers", method.decode.gibbs.workers},
                      {"init", method.decode.gibbs.init == GibbsInit::crude_autoregressive
                                   ? "crude-ar"
                                   : "uniform"}};
    }
    j["method"] = m;
    j["task"] = {{"objective", objective_to_string(task.objective)},
                 {"tau", task.tau},
                 {"threshold_direction", task.threshold_direction},
                 {"worst_direction", task.worst_direction}};
    j["prompts"] = prompts;
    j["generations_per_prompt"] = generations_per_prompt;
    j["eval_lm"] = {{"kind", eval_lm.kind}, {"seed", eval_lm.seed}, {"sigma", eval_lm.sigma}};
    j["seed"] = seed;
    j["output"] = {{"directory", output.directory}, {"stem", output.stem}};
    return j;
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    if (fixture.vocab < 2) errors.push_back("fixture.vocab must be >= 2");
    if (fixture.horizon < 1) errors.push_back("fixture.horizon must be >= 1");
    if (fixture.dim < 1) errors.push_back("fixture.dim must be >= 1");
    if (!(fixture.sigma >= 0.0)) errors.push_back("fixture.sigma must be >= 0");
    if (fixture.verifier.kind != "mlp" && fixture.verifier.kind != "linear" &&
        fixture.verifier.kind != "constant") {
        errors.push_back("fixture.verifier.kind must be mlp, linear, or constant");
    }
    if (fixture.verifier.kind == "mlp" && fixture.verifier.hidden < 1) {
        errors.push_back("fixture.verifier.hidden must be >= 1");
    }
    if (fixture.vocab >= 2 && fixture.horizon >= 1) {
        double combos = std::pow(static_cast<double>(fixture.vocab),
                                 static_cast<double>(fixture.horizon));
        if (combos > 1e6) errors.push_back("fixture V^T exceeds the enumerability bound of 10^6");
    }
    if (method.name != "scone" && method.name != "random" && method.name != "beamsearch" &&
        method.name != "bon") {
        errors.push_back("method.name must be scone, random, beamsearch, or bon");
    }
    try {
        method.sampling.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("method sampling params: ") + e.what());
    }
    if (method.name == "scone") {
        try {
            method.decode.validate();
            method.decode.gibbs.validate();
        } catch (const std::exception& e) {
            errors.push_back(std::string("method decode params: ") + e.what());
        }
    }
    if (!(task.tau > 0.0 && task.tau < 1.0)) errors.push_back("task.tau must be in (0, 1)");
    if (task.threshold_direction != "at_least" && task.threshold_direction != "at_most") {
        errors.push_back("task.threshold_direction must be at_least or at_most");
    }
    if (task.worst_direction != "min" && task.worst_direction != "max") {
        errors.push_back("task.worst_direction must be min or max");
    }
    if (prompts.empty()) errors.push_back("prompts must be non-empty");
    for (size_t i = 0; i < prompts.size(); ++i) {
        if (static_cast<int32_t>(prompts[i].size()) >= fixture.horizon) {
            errors.push_back("prompt " + std::to_string(i) + " is not shorter than the horizon");
        }
        for (Token t : prompts[i]) {
            if (t < 0 || t >= fixture.vocab) {
                errors.push_back("prompt " + std::to_string(i) + " has an out-of-vocab token");
                break;
            }
        }
    }
    if (generations_per_prompt < 1) errors.push_back("generations_per_prompt must be >= 1");
    if (eval_lm.kind != "base" && eval_lm.kind != "external") {
        errors.push_back("eval_lm.kind must be base or external");
    }
    if (output.directory.empty()) errors.push_back("output.directory must be non-empty");
    if (output.stem.empty()) errors.push_back("output.stem must be non-empty");
    return errors;
}

std::unique_ptr<Verifier> build_verifier(const FixtureConfig& fixture) {
    const auto& v = fixture.verifier;
    if (v.kind == "mlp") {
        MlpVerifierSpec spec;
        spec.vocab = fixture.vocab;
        spec.dim = fixture.dim;
        spec.hidden = v.hidden;
        spec.horizon = fixture.horizon;
        spec.seed = v.seed;
        spec.weight_scale = v.weight_scale;
        spec.emb_scale = v.emb_scale;
        return std::make_unique<MlpVerifier>(spec);
    }
    if (v.kind == "linear") {
        LinearVerifierSpec spec;
        spec.vocab = fixture.vocab;
        spec.dim = fixture.dim;
        spec.horizon = fixture.horizon;
        spec.seed = v.seed;
        spec.weight_scale = v.weight_scale;
        spec.emb_scale = v.emb_scale;
        return std::make_unique<LinearVerifier>(spec);
    }
    // constant: sigma(0) = 0.5 everywhere, zero gradient
    EmbeddingTable table(fixture.vocab, fixture.dim);
    return std::make_unique<LinearVerifier>(std::move(table),
                                            std::vector<double>(fixture.dim, 0.0), 0.0,
                                            fixture.horizon);
}

namespace {

std::string tokens_to_string(const Sequence& seq) {
    std::string out;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(seq[i]);
    }
    return out;
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& config) {
    {
        const auto errors = config.validate();
        if (!errors.empty()) {
            std::string msg = "invalid experiment config:";
            for (const auto& e : errors) msg += "\n  - " + e;
            throw std::invalid_argument(msg);
        }
    }

    const TabularJointLM lm({config.fixture.vocab, config.fixture.horizon, config.fixture.lm_seed,
                             config.fixture.sigma});
    const std::unique_ptr<Verifier> verifier = build_verifier(config.fixture);
    const TabularJointLM eval_lm =
        config.eval_lm.kind == "base"
            ? TabularJointLM(lm.spec())
            : TabularJointLM({config.fixture.vocab, config.fixture.horizon, config.eval_lm.seed,
                              config.eval_lm.sigma});

    const Rng master(config.seed);
    const BonObjective bon_obj = config.task.objective == Objective::maximize
                                     ? BonObjective::maximize
                                     : BonObjective::minimize;
    DecodeConfig decode = config.method.decode;
    decode.objective = config.task.objective;

    MetricsReport report;
    report.scores.resize(config.prompts.size());
    report.generations.resize(config.prompts.size());

    std::vector<std::string> trace_lines;
    for (size_t p = 0; p < config.prompts.size(); ++p) {
        const Sequence& prompt = config.prompts[p];
        const Rng prompt_rng = master.derive(p);
        for (int32_t g = 0; g < config.generations_per_prompt; ++g) {
            const Rng gen_rng = prompt_rng.derive(g);
            Sequence seq;
            if (config.method.name == "random") {
                Rng r = gen_rng;
                seq = random_sample(lm, prompt, config.method.sampling, r);
            } else if (config.method.name == "beamsearch") {
                seq = beam_search(lm, prompt, config.method.sampling);
            } else if (config.method.name == "bon") {
                seq = best_of_n(lm, *verifier, prompt, config.method.sampling, gen_rng, bon_obj);
            } else {
                auto [generated, traces] = generate(lm, *verifier, prompt, decode, gen_rng);
                seq = std::move(generated);
                for (const StepTrace& t : traces) {
                    nlohmann::json line = nlohmann::json::parse(t.to_json_line());
                    line["prompt"] = p;
                    line["generation"] = g;
                    trace_lines.push_back(line.dump());
                }
            }
            report.scores[p].push_back(verifier->score(seq));
            report.generations[p].push_back(std::move(seq));
        }
    }

    const bool at_least = config.task.threshold_direction == "at_least";
    std::vector<std::vector<double>> pass_scores = report.scores;
    double tau = config.task.tau;
    if (!at_least) {
        // phi <= tau is (1 - phi) >= (1 - tau)
        for (auto& g : pass_scores) {
            for (double& s : g) s = 1.0 - s;
        }
        tau = 1.0 - tau;
    }

    report.average_score = round2(average_score(report.scores));
    report.constraint_prob_any =
        round2(constraint_probability(pass_scores, tau, ConstraintMode::any));
    report.constraint_prob_fraction =
        round2(constraint_probability(pass_scores, tau, ConstraintMode::fraction));
    const WorstDirection dir =
        config.task.worst_direction == "max" ? WorstDirection::max : WorstDirection::min;
    report.expected_worst = round2(expected_worst_score(report.scores, dir));

    std::vector<Sequence> all;
    for (const auto& group : report.generations) {
        all.insert(all.end(), group.begin(), group.end());
    }
    report.perplexity = perplexity(eval_lm, all);
    report.perplexity_infinite = std::isinf(report.perplexity);

    for (size_t p = 0; p < config.prompts.size(); ++p) {
        PromptBreakdown b;
        b.prompt = static_cast<int32_t>(p);
        b.average = round2(average_score({report.scores[p]}));
        b.worst = round2(expected_worst_score({report.scores[p]}, dir));
        for (double s : pass_scores[p]) b.passes += s >= tau ? 1 : 0;
        report.per_prompt.push_back(b);
    }

    namespace fs = std::filesystem;
    fs::create_directories(config.output.directory);
    const std::string base = config.output.directory + "/" + config.output.stem;
    report.report_path = base + ".report.json";
    report.csv_path = base + ".generations.csv";

    {
        std::ofstream csv(report.csv_path);
        csv << "prompt,generation,tokens,score\n";
        for (size_t p = 0; p < report.generations.size(); ++p) {
            for (size_t g = 0; g < report.generations[p].size(); ++g) {
                csv << p << "," << g << "," << tokens_to_string(report.generations[p][g]) << ","
                    << format_double(report.scores[p][g]) << "\n";
            }
        }
    }

    if (config.method.name == "scone") {
        report.traces_path = base + ".traces.jsonl";
        std::ofstream traces(report.traces_path);
        for (const auto& line : trace_lines) traces << line << "\n";
    }

    {
        nlohmann::json j;
        j["tool_version"] = kToolVersion;
        j["config"] = config.to_json();
        j["metrics"] = {
            {"average_score", report.average_score},
            {"constraint_probability_any", report.constraint_prob_any},
            {"constraint_probability_fraction", report.constraint_prob_fraction},
            {"expected_worst_score", report.expected_worst},
            {"perplexity", report.perplexity_infinite ? nlohmann::json("infinite")
                                                      : nlohmann::json(report.perplexity)},
        };
        nlohmann::json pp = nlohmann::json::array();
        for (const auto& b : report.per_prompt) {
            pp.push_back({{"prompt", b.prompt},
                          {"average", b.average},
                          {"worst", b.worst},
                          {"passes", b.passes}});
        }
        j["per_prompt"] = pp;
        j["artifacts"] = {{"csv", report.csv_path}, {"traces", report.traces_path}};
        std::ofstream out(report.report_path);
        out << j.dump(2) << "\n";
    }

    return report;
}

// ---------------------------------------------------------------------------

namespace {

// Battery fixture: default tabular model, linear verifiers in the sigmoid's
// responsive-but-near-linear band, prefixes of length 1..3.
constexpr int32_t kBatterySize = 50;
constexpr double kBatteryWeightScale = 1.5;
constexpr double kBatteryEmbScale = 1.0;

LinearVerifierSpec battery_verifier_spec(uint64_t seed) {
    LinearVerifierSpec spec;
    spec.vocab = 6;
    spec.dim = 4;
    spec.horizon = 5;
    spec.seed = seed;
    spec.weight_scale = kBatteryWeightScale;
    spec.emb_scale = kBatteryEmbScale;
    return spec;
}

}  // namespace

nlohmann::json generate_golden_battery() {
    const TabularLmSpec lm_spec{6, 5, 42, 2.0};
    const TabularJointLM lm(lm_spec);

    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["op"] = "exact_constrained_next_token";
    j["fixture"] = {{"lm", lm_spec.to_line()},
                    {"verifier_kind", "linear"},
                    {"verifier_weight_scale", kBatteryWeightScale},
                    {"verifier_emb_scale", kBatteryEmbScale}};
    nlohmann::json instances = nlohmann::json::array();
    for (int32_t k = 0; k < kBatterySize; ++k) {
        const uint64_t vseed = 1000 + static_cast<uint64_t>(k);
        const LinearVerifier verifier(battery_verifier_spec(vseed));
        Rng rng = Rng(9000).derive(k);
        const int32_t prefix_len = 1 + rng.uniform_int(3);
        Sequence prefix;
        for (int32_t i = 0; i < prefix_len; ++i) prefix.push_back(rng.uniform_int(6));

        nlohmann::json inst;
        inst["verifier_seed"] = vseed;
        inst["prefix"] = prefix;
        inst["base"] = lm.next_token_dist(prefix);
        inst["oracle_constrained"] = oracle::exact_constrained_next_token(lm, verifier, prefix);
        instances.push_back(std::move(inst));
    }
    j["instances"] = std::move(instances);
    return j;
}

void write_golden_battery(const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write golden battery to " + path);
    out << generate_golden_battery().dump(2) << "\n";
}

std::vector<BatteryInstance> load_golden_battery(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open golden battery " + path);
    nlohmann::json j;
    in >> j;
    std::vector<BatteryInstance> out;
    for (const auto& inst : j.at("instances")) {
        BatteryInstance b;
        b.verifier_seed = inst.at("verifier_seed").get<uint64_t>();
        b.prefix = inst.at("prefix").get<Sequence>();
        b.base = inst.at("base").get<ProbVector>();
        b.oracle_constrained = inst.at("oracle_constrained").get<ProbVector>();
        out.push_back(std::move(b));
    }
    return out;
}

LinearVerifier battery_verifier(uint64_t seed) { return LinearVerifier(battery_verifier_spec(seed)); }

// ---------------------------------------------------------------------------

std::vector<std::pair<int32_t, double>> gibbs_tv_trace(const DiagConfig& cfg) {
    const TabularJointLM lm(cfg.lm);
    const NoisyMaskedLm noisy(lm, cfg.mlm_noise, splitmix64(cfg.seed));
    const LmInterface& model = cfg.mlm_noise > 0.0 ? static_cast<const LmInterface&>(noisy)
                                                   : static_cast<const LmInterface&>(lm);

    const std::vector<double> exact = oracle::exact_continuation_dist(lm, cfg.prefix);

    // histogram over continuations of every post-update state so far
    std::vector<double> counts(exact.size(), 0.0);
    uint64_t total = 0;
    std::vector<std::pair<int32_t, double>> trace;
    const auto prefix_len = static_cast<int32_t>(cfg.prefix.size());

    const IterationHook hook = [&](int32_t iter, const Sequence& state) {
        uint64_t idx = 0;
        for (size_t i = prefix_len; i < state.size(); ++i) {
            idx = idx * static_cast<uint64_t>(cfg.lm.vocab) + static_cast<uint64_t>(state[i]);
        }
        counts[idx] += 1.0;
        ++total;
        std::vector<double> empirical(counts);
        for (double& c : empirical) c /= static_cast<double>(total);
        trace.emplace_back(iter, oracle::tv_distance(empirical, exact));
    };

    GibbsConfig gcfg = cfg.gibbs;
    gcfg.lookahead = lm.horizon() - prefix_len;
    run_chain_traced(model, cfg.prefix, gcfg, Rng(cfg.seed), hook);
    return trace;
}

void write_gibbs_diag_csv(const DiagConfig& cfg, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write diagnostics to " + path);
    out << "iteration,tv\n";
    for (const auto& [iter, tv] : gibbs_tv_trace(cfg)) {
        out << iter << "," << format_double(tv) << "\n";
    }
}

}  // namespace scone::harness
