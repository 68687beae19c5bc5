#include "rosevo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "rosevo/error.hpp"

namespace rosevo {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
    switch (e.category()) {
    case ErrorCategory::Config:
    case ErrorCategory::Validation: return kExitConfig;
    case ErrorCategory::ReplayMismatch: return kExitReplayMismatch;
    case ErrorCategory::Runtime: return kExitRuntime;
    }
    return kExitRuntime;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& into) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

// -- tasks and variants --------------------------------------------------------

std::string TaskSource::label() const {
    if (synthetic)
        return "synthetic-s" + std::to_string(states) + "-t" + std::to_string(truth) + "-d" + fixed(difficulty, 2);
    return world.stem().string() + "-" + task_id;
}

TaskSource TaskSource::from_json(const json& j) {
    TaskSource t;
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        read_field(s, "states", t.states);
        read_field(s, "truth", t.truth);
        read_field(s, "difficulty", t.difficulty);
        t.synthetic = true;
    } else if (j.contains("world")) {
        t.synthetic = false;
        t.world = j.at("world").get<std::string>();
        read_field(j, "task", t.task_id);
        if (t.task_id.empty()) throw ConfigError("file-backed task needs a 'task' id");
    } else {
        throw ConfigError("task entry needs either 'synthetic' or 'world'");
    }
    return t;
}

VariantSpec VariantSpec::from_json(const json& j) {
    if (j.is_string()) return standard_variant(j.get<std::string>());
    VariantSpec v;
    read_field(j, "name", v.name);
    if (v.name.empty()) throw ConfigError("variant needs a name");
    read_field(j, "use_set", v.flags.use_set);
    read_field(j, "use_dr_schedule", v.flags.use_dr_schedule);
    read_field(j, "use_reconciliation", v.flags.use_reconciliation);
    if (j.contains("tau")) {
        const auto& t = j.at("tau");
        if (t.is_string() && t.get<std::string>() == "adaptive")
            v.tau = TauPolicy::Adaptive();
        else if (t.is_number())
            v.tau = TauPolicy::Fixed(t.get<double>());
        else
            throw ConfigError("variant '" + v.name + "': tau must be \"adaptive\" or a number");
    }
    return v;
}

std::vector<VariantSpec> standard_variants() {
    return {
        {"baseline+DU", {false, false, true}, TauPolicy::Adaptive()},
        {"1+SET", {true, false, true}, TauPolicy::Adaptive()},
        {"2+DR-fixed", {true, true, true}, TauPolicy::Fixed(0.1)},
        {"2+DR", {true, true, true}, TauPolicy::Adaptive()},
    };
}

const VariantSpec& standard_variant(std::string_view name) {
    static const auto variants = standard_variants();
    for (const auto& v : variants)
        if (v.name == name) return v;
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected baseline+DU, 1+SET, 2+DR-fixed or 2+DR)");
}

// -- single runs -------------------------------------------------------------------

void RunOptions::apply_json(const json& j) {
    if (!j.is_object()) throw ConfigError("run config must be an object");
    if (j.contains("task")) task = TaskSource::from_json(j.at("task"));
    if (j.contains("variant")) variant = VariantSpec::from_json(j.at("variant"));
    read_field(j, "seed", seed);
    read_field(j, "designer", designer);
    read_field(j, "evaluator", evaluator);
    read_field(j, "trainer_cmd", trainer_cmd);
    read_field(j, "N", N);
    read_field(j, "K", K);
    read_field(j, "K0", K0);
    read_field(j, "final_eval_runs", final_eval_runs);
    read_field(j, "workers", workers);
    if (j.contains("output_dir")) output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        read_field(s, "temperature", sampler.temperature);
        read_field(s, "contribution_weight", sampler.contribution_weight);
        read_field(s, "usage_weight", sampler.usage_weight);
        read_field(s, "invalid_rate", sampler.invalid_rate);
        read_field(s, "member_min", sampler.member_min);
        read_field(s, "member_max", sampler.member_max);
    }
    if (j.contains("endpoint")) {
        const auto& e = j.at("endpoint");
        read_field(e, "base_url", endpoint.base_url);
        read_field(e, "path", endpoint.path);
        read_field(e, "model", endpoint.model);
        read_field(e, "api_key", endpoint.api_key);
        read_field(e, "temperature", endpoint.temperature);
    }
}

EvolutionConfig RunOptions::evolution_config() const {
    EvolutionConfig c;
    c.N = N;
    c.K = K;
    c.K0 = K0;
    c.final_eval_runs = final_eval_runs;
    c.tau_policy = variant.tau;
    c.flags = variant.flags;
    c.seed = seed;
    c.variant_name = variant.name;
    c.workers = workers;
    return c;
}

RunLog execute_run(const RunOptions& options) {
    if (options.designer != "synthetic" && options.designer != "llm")
        throw ConfigError("unknown designer '" + options.designer + "'");
    if (options.evaluator != "surrogate" && options.evaluator != "external")
        throw ConfigError("unknown evaluator '" + options.evaluator + "'");

    EndpointConfig endpoint = options.endpoint;
    if (options.designer == "llm" && !endpoint.resolve_api_key())
        throw ConfigError(std::string("llm designer selected but no API key configured (set ") +
                          EndpointConfig::kApiKeyEnv + " or endpoint.api_key)");
    const EvolutionConfig config = options.evolution_config();
    config.validate();
    options.sampler.validate();

    WorldModel world;
    TaskDef task;
    std::optional<SyntheticTask> hidden;
    if (options.task.synthetic) {
        auto [w, st] = generate_synthetic_task(options.task.states, options.task.truth, options.task.difficulty,
                                               options.seed);
        world = std::move(w);
        task = st.task;
        hidden = std::move(st);
    } else {
        world = load_world_model(options.task.world);
        task = world.task(options.task.task_id);
        if (options.evaluator == "surrogate") hidden = synthetic_view(world, task);
    }

    std::unique_ptr<EvaluatorPort> evaluator;
    if (options.evaluator == "surrogate")
        evaluator = std::make_unique<SurrogateEvaluator>(world, *hidden);
    else
        evaluator = std::make_unique<ExternalTrainerEvaluator>(options.trainer_cmd);

    std::unique_ptr<DesignerPort> designer;
    std::unique_ptr<ReconcilerPort> reconciler;
    if (options.designer == "llm") {
        // Separate clients: the reconciler and the designer share no conversation state.
        designer = std::make_unique<LlmDesigner>(world, std::make_shared<ChatClient>(endpoint, make_http_transport()));
        reconciler = std::make_unique<LlmReconciler>(std::make_shared<ChatClient>(endpoint, make_http_transport()));
    } else {
        designer = std::make_unique<SyntheticDesigner>(world, options.sampler);
        reconciler = std::make_unique<SyntheticReconciler>();
    }

    Ports ports{*designer, *evaluator, reconciler.get(), {}};
    return run_evolution(world, task, ports, config, options.output_dir);
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const RunLog log = execute_run(options);
        const auto m = metrics_of(log);
        out << "task " << m.task_id << " variant " << m.variant << " seed " << m.seed << '\n';
        out << "ESR_avg " << fixed(m.esr_avg, 4) << '\n';
        out << "SSD " << fixed(m.ssd, 4) << '\n';
        if (options.output_dir) out << "run log written to " << (*options.output_dir / "runlog.jsonl").string() << '\n';
        return kExitOk;
    } catch (const Error& e) {
        err << (exit_code_for(e) == kExitConfig ? "configuration error: " : "runtime error: ") << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// -- ablation ----------------------------------------------------------------------

void ExperimentSpec::validate() const {
    if (tasks.empty()) throw ConfigError("experiment spec: task list is empty");
    if (variants.empty()) throw ConfigError("experiment spec: variant list is empty");
    if (seeds.empty()) throw ConfigError("experiment spec: seed list is empty");
    std::set<std::string> names;
    for (const auto& v : variants)
        if (!names.insert(v.name).second) throw ConfigError("experiment spec: duplicate variant '" + v.name + "'");
    if (workers < 1) throw ConfigError("experiment spec: workers must be >= 1");
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment spec must be an object");
    ExperimentSpec spec;
    spec.base.apply_json(j);
    if (j.contains("tasks"))
        for (const auto& t : j.at("tasks")) spec.tasks.push_back(TaskSource::from_json(t));
    if (j.contains("variants")) {
        const auto& v = j.at("variants");
        if (v.is_string() && v.get<std::string>() == "standard")
            spec.variants = standard_variants();
        else
            for (const auto& x : v) spec.variants.push_back(VariantSpec::from_json(x));
    } else {
        spec.variants = standard_variants();
    }
    if (j.contains("seeds")) {
        read_field(j, "seeds", spec.seeds);
    } else {
        int count = kDefaultSeedCount;
        std::uint64_t first = 0;
        read_field(j, "seed_count", count);
        read_field(j, "first_seed", first);
        for (int i = 0; i < count; ++i) spec.seeds.push_back(first + static_cast<std::uint64_t>(i));
    }
    if (j.contains("output_dir")) spec.output_dir = j.at("output_dir").get<std::string>();
    read_field(j, "cell_workers", spec.workers);
    spec.validate();
    return spec;
}

CellSummary summarize(std::string task, std::string variant, const std::vector<MetricsReport>& metrics, int failed) {
    CellSummary c;
    c.task = std::move(task);
    c.variant = std::move(variant);
    c.metrics = metrics;
    c.failed = failed;
    c.runs = static_cast<int>(metrics.size()) + failed;
    if (metrics.empty()) return c;
    const double n = static_cast<double>(metrics.size());
    for (const auto& m : metrics) {
        c.esr_avg_mean += m.esr_avg;
        c.ssd_mean += m.ssd;
    }
    c.esr_avg_mean /= n;
    c.ssd_mean /= n;
    if (metrics.size() > 1) {
        double ss = 0.0;
        for (const auto& m : metrics) ss += (m.esr_avg - c.esr_avg_mean) * (m.esr_avg - c.esr_avg_mean);
        c.esr_avg_std = std::sqrt(ss / (n - 1.0));
    }
    return c;
}

std::vector<CellSummary> run_ablation(const ExperimentSpec& spec, std::ostream* progress) {
    spec.validate();
    struct Job {
        std::size_t task;
        std::size_t variant;
        std::size_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < spec.tasks.size(); ++t)
        for (std::size_t v = 0; v < spec.variants.size(); ++v)
            for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({t, v, s});

    std::vector<std::optional<MetricsReport>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::mutex progress_mutex;

    auto work = [&](std::size_t i) {
        const Job& job = jobs[i];
        RunOptions opts = spec.base;
        opts.task = spec.tasks[job.task];
        opts.variant = spec.variants[job.variant];
        opts.seed = spec.seeds[job.seed];
        opts.output_dir = spec.output_dir / opts.task.label() / opts.variant.name /
                          ("seed_" + std::to_string(opts.seed));
        try {
            results[i] = metrics_of(execute_run(opts));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
        if (progress) {
            std::lock_guard lock(progress_mutex);
            *progress << opts.task.label() << ' ' << opts.variant.name << " seed " << opts.seed << ": "
                      << (results[i] ? "esr_avg " + fixed(results[i]->esr_avg, 3) : "FAILED (" + errors[i] + ")")
                      << '\n';
        }
    };

    if (spec.workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < spec.workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
            });
    }

    std::vector<CellSummary> cells;
    for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
        for (std::size_t v = 0; v < spec.variants.size(); ++v) {
            std::vector<MetricsReport> ok;
            int failed = 0;
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                if (jobs[i].task != t || jobs[i].variant != v) continue;
                if (results[i])
                    ok.push_back(*results[i]);
                else
                    ++failed;
            }
            cells.push_back(summarize(spec.tasks[t].label(), spec.variants[v].name, ok, failed));
        }
    }
    return cells;
}

std::string report_csv(const std::vector<CellSummary>& cells) {
    std::ostringstream os;
    os << "task,variant,esr_avg_mean,esr_avg_std,ssd_mean,runs,failed\n";
    for (const auto& c : cells)
        os << c.task << ',' << c.variant << ',' << fixed(c.esr_avg_mean, 6) << ',' << fixed(c.esr_avg_std, 6) << ','
           << fixed(c.ssd_mean, 6) << ',' << c.runs << ',' << c.failed << '\n';
    return os.str();
}

std::string report_table(const std::vector<CellSummary>& cells) {
    std::ostringstream os;
    std::string current;
    for (const auto& c : cells) {
        if (c.task != current) {
            current = c.task;
            os << "\n" << current << "\n";
            os << "  variant        ESR_avg (mean +- std)    SSD (mean)   runs  failed\n";
        }
        char line[160];
        std::snprintf(line, sizeof line, "  %-14s %6.3f +- %-6.3f          %6.3f       %4d  %6d\n", c.variant.c_str(),
                      c.esr_avg_mean, c.esr_avg_std, c.ssd_mean, c.runs, c.failed);
        os << line;
    }
    return os.str();
}

int cmd_ablate(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        spec.validate();
        const auto cells = run_ablation(spec, &err);
        fs::create_directories(spec.output_dir);
        {
            std::ofstream csv(spec.output_dir / "report.csv", std::ios::binary);
            csv << report_csv(cells);
            std::ofstream txt(spec.output_dir / "report.txt", std::ios::binary);
            txt << report_table(cells);
        }
        out << report_table(cells);
        out << "\nreport written to " << (spec.output_dir / "report.csv").string() << '\n';
        const bool dead_cell = std::any_of(cells.begin(), cells.end(), [](const CellSummary& c) {
            return c.runs > 0 && c.failed == c.runs;
        });
        return dead_cell ? kExitRuntime : kExitOk;
    } catch (const Error& e) {
        err << (exit_code_for(e) == kExitConfig ? "configuration error: " : "runtime error: ") << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// -- report ------------------------------------------------------------------------

int cmd_report(const std::vector<fs::path>& logs, const std::optional<fs::path>& out_dir, std::ostream& out,
               std::ostream& err) {
    if (logs.empty()) {
        err << "configuration error: no run logs given\n";
        return kExitConfig;
    }
    bool mismatch = false;
    std::ostringstream curves;
    std::ostringstream summary;
    curves << "log,iteration,best_success\n";
    summary << "log,task,variant,seed,esr_avg,ssd,replay\n";
    try {
        for (const auto& path : logs) {
            const RunLog log = RunLog::read(path);
            const ReplayReport rep = replay(log);
            const std::string name = path.string();
            if (rep.ok()) {
                out << name << ": replay OK (" << rep.verified_events << "/" << rep.events << " events verified)\n";
            } else {
                mismatch = true;
                out << name << ": replay MISMATCH\n";
                for (const auto& m : rep.mismatches) out << "  " << m << '\n';
            }
            for (std::size_t i = 0; i < rep.best_success_curve.size(); ++i)
                curves << name << ',' << (i + 1) << ',' << fixed(rep.best_success_curve[i], 6) << '\n';
            if (rep.stored)
                summary << name << ',' << rep.stored->task_id << ',' << rep.stored->variant << ',' << rep.stored->seed
                        << ',' << fixed(rep.stored->esr_avg, 6) << ',' << fixed(rep.stored->ssd, 6) << ','
                        << (rep.ok() ? "ok" : "mismatch") << '\n';
        }
    } catch (const Error& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
    out << "\n" << summary.str();
    if (out_dir) {
        fs::create_directories(*out_dir);
        std::ofstream(*out_dir / "curves.csv", std::ios::binary) << curves.str();
        std::ofstream(*out_dir / "summary.csv", std::ios::binary) << summary.str();
    }
    return mismatch ? kExitReplayMismatch : kExitOk;
}

} // namespace rosevo
