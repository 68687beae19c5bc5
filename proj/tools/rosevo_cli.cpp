#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rosevo/error.hpp"
#include "rosevo/experiment.hpp"

using namespace rosevo;

namespace {

struct RunArgs {
    std::string config;
    bool synthetic = false;
    std::string world;
    std::string task;
    std::optional<int> states, truth;
    std::optional<double> difficulty;
    std::string designer, evaluator, trainer_cmd, variant, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> N, K, K0, workers;
};

void add_common(CLI::App* app, RunArgs& a) {
    app->add_option("--designer", a.designer, "Reward designer backend")->check(CLI::IsMember({"synthetic", "llm"}));
    app->add_option("--evaluator", a.evaluator, "Candidate evaluator backend")
        ->check(CLI::IsMember({"surrogate", "external"}));
    app->add_option("--trainer-cmd", a.trainer_cmd, "Trainer command for the external evaluator");
    app->add_option("--out", a.out, "Output directory");
    app->add_option("-N,--iterations", a.N, "Evolution iterations");
    app->add_option("-K,--samples", a.K, "Samples per iteration");
    app->add_option("--pilots", a.K0, "Pilot samples for threshold calibration");
    app->add_option("--workers", a.workers, "Concurrent evaluations");
}

void apply_common(RunOptions& o, const RunArgs& a) {
    if (!a.designer.empty()) o.designer = a.designer;
    if (!a.evaluator.empty()) o.evaluator = a.evaluator;
    if (!a.trainer_cmd.empty()) o.trainer_cmd = a.trainer_cmd;
    if (a.N) o.N = *a.N;
    if (a.K) o.K = *a.K;
    if (a.K0) o.K0 = *a.K0;
    if (a.workers) o.workers = *a.workers;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolves reward observation spaces for RL tasks"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run one evolution");
    run->add_option("--config", run_args.config, "JSON run configuration");
    run->add_flag("--synthetic", run_args.synthetic, "Use a generated synthetic task (default)");
    run->add_option("--world", run_args.world, "World model file")->excludes("--synthetic");
    run->add_option("--task", run_args.task, "Task id within the world model");
    run->add_option("--states", run_args.states, "Synthetic catalog size");
    run->add_option("--truth", run_args.truth, "Synthetic ground-truth subset size");
    run->add_option("--difficulty", run_args.difficulty, "Synthetic difficulty in [0,1]");
    run->add_option("--seed", run_args.seed, "Run seed");
    run->add_option("--variant", run_args.variant, "baseline+DU, 1+SET, 2+DR-fixed or 2+DR");
    add_common(run, run_args);

    RunArgs ablate_args;
    std::string ablate_config;
    auto* ablate = app.add_subcommand("ablate", "Run the variant ablation grid");
    ablate->add_option("config", ablate_config, "JSON experiment spec")->required();
    ablate->add_option("--seed", ablate_args.seed, "First seed (overrides the spec seed list start)");
    std::optional<int> seed_count;
    ablate->add_option("--seeds", seed_count, "Number of seeds per cell");
    std::optional<int> cell_workers;
    ablate->add_option("--cell-workers", cell_workers, "Concurrent runs");
    add_common(ablate, ablate_args);

    std::vector<std::string> report_logs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Replay run logs and summarize them");
    report->add_option("logs", report_logs, "Run log files")->required();
    report->add_option("--out", report_out, "Directory for curves.csv and summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            RunOptions o;
            if (!run_args.config.empty()) o.apply_json(read_json_file(run_args.config));
            if (run_args.synthetic) o.task.synthetic = true;
            if (!run_args.world.empty()) {
                o.task.synthetic = false;
                o.task.world = run_args.world;
                if (run_args.task.empty()) throw ConfigError("--world requires --task");
                o.task.task_id = run_args.task;
            }
            if (run_args.states) o.task.states = *run_args.states;
            if (run_args.truth) o.task.truth = *run_args.truth;
            if (run_args.difficulty) o.task.difficulty = *run_args.difficulty;
            if (run_args.seed) o.seed = *run_args.seed;
            if (!run_args.variant.empty()) o.variant = standard_variant(run_args.variant);
            if (!run_args.out.empty()) o.output_dir = run_args.out;
            apply_common(o, run_args);
            return cmd_run(o, std::cout, std::cerr);
        }
        if (ablate->parsed()) {
            ExperimentSpec spec = ExperimentSpec::from_json(read_json_file(ablate_config));
            if (ablate_args.seed || seed_count) {
                const std::uint64_t first = ablate_args.seed.value_or(spec.seeds.front());
                const int count = seed_count.value_or(static_cast<int>(spec.seeds.size()));
                spec.seeds.clear();
                for (int i = 0; i < count; ++i) spec.seeds.push_back(first + static_cast<std::uint64_t>(i));
            }
            if (cell_workers) spec.workers = *cell_workers;
            if (!ablate_args.out.empty()) spec.output_dir = ablate_args.out;
            apply_common(spec.base, ablate_args);
            return cmd_ablate(spec, std::cout, std::cerr);
        }
        std::vector<std::filesystem::path> logs(report_logs.begin(), report_logs.end());
        std::optional<std::filesystem::path> out;
        if (!report_out.empty()) out = report_out;
        return cmd_report(logs, out, std::cout, std::cerr);
    } catch (const Error& e) {
        std::cerr << (exit_code_for(e) == kExitConfig ? "configuration error: " : "runtime error: ") << e.what()
                  << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
