#pragma once

// The evolution loop: threshold calibration, N design iterations with
// per-iteration selection, execution-table accumulation, overall selection,
// and final multi-run evaluation. Everything is recorded in a RunLog.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rosevo/designer.hpp"
#include "rosevo/error.hpp"
#include "rosevo/evaluator.hpp"
#include "rosevo/guidance.hpp"
#include "rosevo/metrics.hpp"
#include "rosevo/runlog.hpp"
#include "rosevo/settable.hpp"

namespace rosevo {

struct TauPolicy {
    bool adaptive = true;
    double fixed_value = 0.1;

    static TauPolicy Adaptive() { return {true, 0.0}; }
    static TauPolicy Fixed(double v) { return {false, v}; }

    bool operator==(const TauPolicy&) const = default;
};

struct VariantFlags {
    bool use_set = true;
    bool use_dr_schedule = true;
    bool use_reconciliation = true;

    bool operator==(const VariantFlags&) const = default;
};

struct EvolutionConfig {
    int N = 5;
    int K = 16;
    int K0 = 16;
    int final_eval_runs = 5;
    int calibration_batch_cap = 10;
    TauPolicy tau_policy;
    VariantFlags flags;
    std::uint64_t seed = 0;
    std::string variant_name = "full";
    int workers = 1; ///< concurrent evaluations within an iteration

    void validate() const;
};

struct Ports {
    DesignerPort& designer;
    EvaluatorPort& evaluator;
    ReconcilerPort* reconciler = nullptr;
    /// Called with every assembled bundle (pilots included); for inspection only.
    std::function<void(const GuidanceBundle&)> on_bundle;
};

/// One designer sample and what became of it. A sample that failed to parse
/// (or never arrived) has no candidate and a failed record.
struct SampleOutcome {
    int sample_index = 0;
    std::string candidate_id;
    std::string source;
    std::optional<RewardCandidate> candidate;
    std::optional<std::string> parse_error;
    EvaluationRecord record;
};

struct CalibrationResult {
    double tau = 0.0;
    bool adaptive = true;
    int batches = 0;
    std::vector<SampleOutcome> pilots; ///< every pilot drawn
    std::vector<double> used_successes; ///< the first K0 executed pilots
};

CalibrationResult calibrate_threshold(const WorldModel& world, const TaskDef& task, Ports& ports,
                                      const EvolutionConfig& config, const ReconciledMission& mission);

struct IterationState {
    std::optional<EvaluatedCandidate> best_prev;
    StateExecutionTable table;
    ReconciledMission mission;
    double tau = 0.0;
    UsageHistory usage;
};

struct IterationResult {
    GuidanceBundle bundle;
    std::vector<SampleOutcome> samples;
    std::optional<EvaluatedCandidate> best; ///< carried forward when barren
    bool barren = false;
    int resamples = 0;
    StateExecutionTable table;
    UsageHistory usage;
};

/// Best executed sample: highest success, ties to the lowest sample index.
std::optional<std::size_t> select_best(const std::vector<SampleOutcome>& samples);

IterationResult run_iteration(int n, const IterationState& state, const WorldModel& world, const TaskDef& task,
                              Ports& ports, const EvolutionConfig& config);

/// Index of the overall best among per-iteration bests (earliest on ties).
std::size_t select_overall(const std::vector<double>& iteration_best_successes);

class RunFailed : public RunError {
public:
    RunFailed(const std::string& what, RunLog partial) : RunError(what), log(std::move(partial)) {}
    RunLog log;
};

/// Runs the whole loop. When output_dir is given, writes runlog.jsonl,
/// metrics.json and set_iter_<n>.csv there; a failed run still writes its
/// partial log before RunFailed is thrown.
RunLog run_evolution(const WorldModel& world, const TaskDef& task, Ports& ports, const EvolutionConfig& config,
                     const std::optional<std::filesystem::path>& output_dir = std::nullopt);

MetricsReport metrics_of(const RunLog& log);

} // namespace rosevo
