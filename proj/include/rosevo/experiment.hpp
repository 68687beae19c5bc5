#pragma once

// Run/ablate/report drivers behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rosevo/chat_client.hpp"
#include "rosevo/designer.hpp"
#include "rosevo/evolution.hpp"

namespace rosevo {

/// Exit statuses of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3, kExitReplayMismatch = 4 };

int exit_code_for(const Error& e);

struct TaskSource {
    bool synthetic = true;
    int states = 24;
    int truth = 4;
    double difficulty = 0.5;
    std::filesystem::path world;
    std::string task_id;

    /// Stable label used for directories and report rows.
    std::string label() const;

    static TaskSource from_json(const nlohmann::json& j);
};

struct VariantSpec {
    std::string name;
    VariantFlags flags;
    TauPolicy tau;

    static VariantSpec from_json(const nlohmann::json& j);
};

/// The four ablation rows: baseline with reconciliation, +execution table,
/// +schedule with fixed tau 0.1, +schedule with calibrated tau.
std::vector<VariantSpec> standard_variants();
const VariantSpec& standard_variant(std::string_view name);

struct RunOptions {
    TaskSource task;
    VariantSpec variant = standard_variants().back();
    std::uint64_t seed = 0;
    std::string designer = "synthetic";
    std::string evaluator = "surrogate";
    std::string trainer_cmd;
    EndpointConfig endpoint;
    SamplerConfig sampler;
    int N = 5;
    int K = 16;
    int K0 = 16;
    int final_eval_runs = 5;
    int workers = 1;
    std::optional<std::filesystem::path> output_dir;

    /// Fields present in the document override the current values.
    void apply_json(const nlohmann::json& j);
    EvolutionConfig evolution_config() const;
};

/// Builds ports from the options and runs one evolution. Credentials and
/// evaluator configuration are checked before any work starts.
RunLog execute_run(const RunOptions& options);

struct ExperimentSpec {
    std::vector<TaskSource> tasks;
    std::vector<VariantSpec> variants;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "ablation-out";
    RunOptions base; ///< N, K, sampler, designer/evaluator choice shared by every cell
    int workers = 1;  ///< concurrent cells

    static constexpr int kDefaultSeedCount = 20;

    /// Throws ConfigError when a list is empty or variant names repeat.
    void validate() const;
    static ExperimentSpec from_json(const nlohmann::json& j);
};

struct CellSummary {
    std::string task;
    std::string variant;
    int runs = 0;
    int failed = 0;
    double esr_avg_mean = 0.0;
    double esr_avg_std = 0.0;
    double ssd_mean = 0.0;
    std::vector<MetricsReport> metrics; ///< successful runs, in seed order
};

/// Runs every task x variant x seed cell, writing one directory per run under
/// output_dir, and aggregates per (task, variant). Results do not depend on
/// the worker count.
std::vector<CellSummary> run_ablation(const ExperimentSpec& spec, std::ostream* progress = nullptr);

/// Aggregates metrics into one summary (mean and sample std of ESR_avg, mean SSD).
CellSummary summarize(std::string task, std::string variant, const std::vector<MetricsReport>& metrics, int failed);

std::string report_csv(const std::vector<CellSummary>& cells);
std::string report_table(const std::vector<CellSummary>& cells);

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_ablate(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);
int cmd_report(const std::vector<std::filesystem::path>& logs, const std::optional<std::filesystem::path>& out_dir,
               std::ostream& out, std::ostream& err);

nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace rosevo
