#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "scone/baselines.hpp"
#include "scone/decoder.hpp"
#include "scone/toy_lm.hpp"
#include "scone/verifier.hpp"

namespace scone::harness {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Metrics. Scores are grouped per prompt; all results are percentages.

double average_score(const std::vector<std::vector<double>>& groups);

enum class ConstraintMode { any, fraction };

// A generation passes when its score is >= tau. any: percent of prompts with
// at least one passing generation; fraction: percent of prompts where at
// least `fraction` of the group passes.
double constraint_probability(const std::vector<std::vector<double>>& groups, double tau,
                              ConstraintMode mode, double fraction = 0.9);

enum class WorstDirection { max, min };

double expected_worst_score(const std::vector<std::vector<double>>& groups, WorstDirection dir);

// ---------------------------------------------------------------------------
// Experiment configuration. Parsed from a single JSON file; every default
// is echoed into the report for provenance.

struct VerifierConfig {
    std::string kind = "mlp";  // mlp | linear | constant
    uint64_t seed = 7;
    int32_t hidden = 8;
    double weight_scale = 1.0;
    double emb_scale = 1.0;
};

struct FixtureConfig {
    int32_t vocab = 6;
    int32_t horizon = 5;
    int32_t dim = 4;
    double sigma = 2.0;
    uint64_t lm_seed = 42;
    VerifierConfig verifier;
};

struct TaskConfig {
    Objective objective = Objective::maximize;
    double tau = 0.8;
    // pass event for constraint probability: phi >= tau or phi <= tau
    std::string threshold_direction = "at_least";
    // per-prompt worst reduction: "min" (lowest score is worst) or "max"
    std::string worst_direction = "min";
};

struct EvalLmConfig {
    std::string kind = "base";  // base | external
    uint64_t seed = 0;
    double sigma = 2.0;
};

struct MethodConfig {
    std::string name = "random";  // scone | random | beamsearch | bon
    SamplingParams sampling;
    DecodeConfig decode;
};

struct OutputConfig {
    std::string directory = "out";
    std::string stem = "run";
};

struct ExperimentConfig {
    FixtureConfig fixture;
    MethodConfig method;
    TaskConfig task;
    std::vector<Sequence> prompts;
    int32_t generations_per_prompt = 10;
    EvalLmConfig eval_lm;
    uint64_t seed = 0;
    OutputConfig output;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;

    // All problems at once, empty when the config is runnable.
    std::vector<std::string> validate() const;
};

struct PromptBreakdown {
    int32_t prompt = 0;
    double average = 0.0;  // percent
    double worst = 0.0;    // percent
    int32_t passes = 0;
};

struct MetricsReport {
    double average_score = 0.0;
    double constraint_prob_any = 0.0;
    double constraint_prob_fraction = 0.0;
    double expected_worst = 0.0;
    double perplexity = 0.0;
    bool perplexity_infinite = false;
    std::vector<PromptBreakdown> per_prompt;
    std::string report_path;
    std::string csv_path;
    std::string traces_path;  // empty unless the method emits step traces

    // raw material kept for tests and downstream analysis
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<Sequence>> generations;
};

std::unique_ptr<Verifier> build_verifier(const FixtureConfig& fixture);

// Builds the fixtures, draws G generations per prompt with the configured
// method, scores them, computes all metrics plus perplexity under the eval
// model, and writes the JSON report, the per-generation CSV, and (for scone)
// JSON-line step traces.
MetricsReport run_experiment(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Golden files: exact constrained next-token vectors for a battery of
// linear-verifier instances on the default fixture. Regenerated by the CLI,
// never edited by hand.

struct BatteryInstance {
    uint64_t verifier_seed = 0;
    Sequence prefix;
    ProbVector oracle_constrained;
    ProbVector base;
};

nlohmann::json generate_golden_battery();
void write_golden_battery(const std::string& path);
std::vector<BatteryInstance> load_golden_battery(const std::string& path);

// The verifier a battery instance was generated with (seed from the file,
// scales fixed by the battery definition).
LinearVerifier battery_verifier(uint64_t seed);

// ---------------------------------------------------------------------------
// Gibbs convergence diagnostics: per-iteration TV between the running
// empirical continuation histogram and the exact conditional.

struct DiagConfig {
    TabularLmSpec lm;
    Sequence prefix;
    GibbsConfig gibbs;
    uint64_t seed = 0;
    double mlm_noise = 0.0;  // >0 swaps in the noisy masked-conditional adapter
};

std::vector<std::pair<int32_t, double>> gibbs_tv_trace(const DiagConfig& cfg);
void write_gibbs_diag_csv(const DiagConfig& cfg, const std::string& path);

}  // namespace scone::harness
