#include "rosevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"

namespace rosevo {

using nlohmann::json;

void EvolutionConfig::validate() const {
    if (N < 1) throw ConfigError("N must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (K0 < 1) throw ConfigError("K0 must be >= 1");
    if (final_eval_runs < 1) throw ConfigError("final_eval_runs must be >= 1");
    if (calibration_batch_cap < 1) throw ConfigError("calibration_batch_cap must be >= 1");
    if (!tau_policy.adaptive && !(tau_policy.fixed_value >= 0.0 && tau_policy.fixed_value <= 1.0))
        throw ConfigError("fixed tau must lie in [0, 1]");
    if (workers < 1) throw ConfigError("workers must be >= 1");
}

namespace {

std::string sample_id(std::string_view prefix, int k) { return std::string(prefix) + "-k" + std::to_string(k); }

/// Parses and evaluates a designer batch. Evaluation may run on several
/// threads; outcomes are stored by sample index.
std::vector<SampleOutcome> evaluate_batch(const std::vector<std::string>& texts, int K, std::string_view prefix,
                                          int iteration, std::uint64_t eval_seed, const WorldModel& world,
                                          const TaskDef& task, EvaluatorPort& evaluator, int workers) {
    std::vector<SampleOutcome> out(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        auto& s = out[static_cast<std::size_t>(k)];
        s.sample_index = k;
        s.candidate_id = sample_id(prefix, k);
        if (k >= static_cast<int>(texts.size())) {
            s.parse_error = "designer returned no sample";
            continue;
        }
        s.source = texts[static_cast<std::size_t>(k)];
        try {
            s.candidate = parse_candidate(s.source, world, s.candidate_id, iteration, k);
        } catch (const ParseError& e) {
            s.parse_error = e.what();
        }
    }

    auto work = [&](std::size_t i) {
        auto& s = out[i];
        if (!s.candidate) {
            s.record = EvaluationRecord::failure(s.candidate_id, "parse error: " + *s.parse_error, eval_seed);
            return;
        }
        s.record = evaluator.evaluate(*s.candidate, task, eval_seed);
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < out.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), out.size());
        for (std::size_t w = 0; w < n; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < out.size(); i = next++) work(i);
            });
    }
    return out;
}

std::vector<EvaluatedCandidate> executed_results(const std::vector<SampleOutcome>& samples) {
    std::vector<EvaluatedCandidate> out;
    for (const auto& s : samples)
        if (s.candidate) out.push_back({*s.candidate, s.record});
    return out;
}

json sample_event(int iteration, int attempt, const SampleOutcome& s) {
    json e = {{"event", event::kCandidate},
              {"iteration", iteration},
              {"attempt", attempt},
              {"sample_index", s.sample_index},
              {"candidate_id", s.candidate_id},
              {"source", s.source},
              {"record", record_to_json(s.record)}};
    e["parse_error"] = s.parse_error ? json(*s.parse_error) : json(nullptr);
    e["candidate"] = s.candidate ? candidate_to_json(*s.candidate) : json(nullptr);
    return e;
}

json table_rows(const StateExecutionTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows()) rows.push_back(json::array({r.name, r.usage_count, r.contribution}));
    return rows;
}

std::optional<MissionExemplar> find_exemplar(const WorldModel& world, const TaskDef& task, ReconcilerPort& reconciler) {
    for (const auto& other : world.tasks()) {
        if (other.id == task.id || !other.success_spec) continue;
        auto mission = reconcile_mission(other.user_description, other.success_spec, world, std::nullopt, reconciler);
        return MissionExemplar{std::move(mission), *other.success_spec};
    }
    return std::nullopt;
}

} // namespace

CalibrationResult calibrate_threshold(const WorldModel& world, const TaskDef& task, Ports& ports,
                                      const EvolutionConfig& config, const ReconciledMission& mission) {
    CalibrationResult result;
    if (!config.tau_policy.adaptive) {
        result.adaptive = false;
        result.tau = config.tau_policy.fixed_value;
        return result;
    }
    if (config.K0 < 1) throw ArgumentError("K0 must be >= 1");

    // Pilots see the iteration-1 shape: no example and an empty table.
    const GuidanceBundle bundle = assemble_bundle(1, std::nullopt, new_table(world.catalog()), mission, 0.0,
                                                  {config.flags.use_set, config.flags.use_dr_schedule});
    if (ports.on_bundle) ports.on_bundle(bundle);

    for (int batch = 0; batch < config.calibration_batch_cap; ++batch) {
        const auto texts =
            ports.designer.propose(bundle, config.K0, derive_seed(config.seed, "pilot-design-" + std::to_string(batch)));
        auto outcomes = evaluate_batch(texts, config.K0, "p" + std::to_string(batch), 1,
                                       derive_seed(config.seed, "pilot-eval-" + std::to_string(batch)), world, task,
                                       ports.evaluator, config.workers);
        result.batches = batch + 1;
        for (auto& o : outcomes) {
            if (o.record.executed && static_cast<int>(result.used_successes.size()) < config.K0)
                result.used_successes.push_back(o.record.success);
            result.pilots.push_back(std::move(o));
        }
        if (static_cast<int>(result.used_successes.size()) == config.K0) {
            double sum = 0.0;
            for (double v : result.used_successes) sum += v;
            result.tau = sum / static_cast<double>(config.K0);
            return result;
        }
    }
    throw CalibrationError("task '" + task.id + "': only " + std::to_string(result.used_successes.size()) + " of " +
                           std::to_string(config.K0) + " pilot rewards executed within " +
                           std::to_string(config.calibration_batch_cap) + " batches");
}

std::optional<std::size_t> select_best(const std::vector<SampleOutcome>& samples) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!s.record.executed) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = samples[*best];
        if (s.record.success > b.record.success ||
            (s.record.success == b.record.success && s.sample_index < b.sample_index))
            best = i;
    }
    return best;
}

std::size_t select_overall(const std::vector<double>& successes) {
    if (successes.empty()) throw ArgumentError("select_overall of an empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < successes.size(); ++i)
        if (successes[i] > successes[best]) best = i;
    return best;
}

IterationResult run_iteration(int n, const IterationState& state, const WorldModel& world, const TaskDef& task,
                              Ports& ports, const EvolutionConfig& config) {
    if ((n > 1) != state.best_prev.has_value())
        throw ArgumentError("run_iteration: previous best must be present exactly when n > 1");

    IterationResult r{assemble_bundle(n, state.best_prev, state.table, state.mission, state.tau,
                                      {config.flags.use_set, config.flags.use_dr_schedule}),
                      {},
                      std::nullopt,
                      false,
                      0,
                      state.table,
                      state.usage};
    if (ports.on_bundle) ports.on_bundle(r.bundle);

    const std::string tag = "i" + std::to_string(n);
    std::vector<SampleOutcome> attempt_samples;
    for (int attempt = 0;; ++attempt) {
        const std::string suffix = attempt == 0 ? "" : "r" + std::to_string(attempt);
        std::vector<std::string> texts;
        try {
            texts = ports.designer.propose(r.bundle, config.K, derive_seed(config.seed, "design-" + tag + suffix));
        } catch (const DesignerError& e) {
            throw RunError(std::string("iteration ") + std::to_string(n) + ": " + e.what());
        }
        attempt_samples = evaluate_batch(texts, config.K, tag + suffix, n,
                                         derive_seed(config.seed, "eval-" + tag + suffix), world, task,
                                         ports.evaluator, config.workers);
        for (const auto& s : attempt_samples) {
            if (s.candidate) r.usage.add(*s.candidate);
            r.samples.push_back(s);
        }
        if (config.flags.use_set) r.table = r.table.accumulate(executed_results(attempt_samples));

        if (auto best = select_best(attempt_samples)) {
            const auto& s = attempt_samples[*best];
            r.best = EvaluatedCandidate{*s.candidate, s.record};
            return r;
        }
        if (n > 1) {
            r.barren = true;
            r.best = state.best_prev;
            return r;
        }
        if (attempt >= 1)
            throw RunError("iteration 1: no sampled reward executed, even after one full resample");
        r.resamples += 1;
    }
}

MetricsReport metrics_of(const RunLog& log) {
    auto m = log.of_type(event::kMetrics);
    if (m.empty()) throw LogFormatError("run log has no metrics event");
    return MetricsReport::from_json(*m.back());
}

RunLog run_evolution(const WorldModel& world, const TaskDef& task, Ports& ports, const EvolutionConfig& config,
                     const std::optional<std::filesystem::path>& output_dir) {
    config.validate();
    RunLog log;
    std::vector<std::pair<int, StateExecutionTable>> snapshots;

    auto flush = [&] {
        if (!output_dir) return;
        std::filesystem::create_directories(*output_dir);
        log.write(*output_dir / "runlog.jsonl");
        for (const auto& [n, table] : snapshots) {
            std::ofstream csv(*output_dir / ("set_iter_" + std::to_string(n) + ".csv"), std::ios::binary);
            csv << table.to_csv();
        }
        if (auto m = log.of_type(event::kMetrics); !m.empty()) {
            std::ofstream out(*output_dir / "metrics.json", std::ios::binary);
            out << MetricsReport::from_json(*m.back()).to_json().dump(2) << '\n';
        }
    };

    try {
        log.append({{"event", event::kRunStart},
                    {"task_id", task.id},
                    {"world_id", world.id()},
                    {"variant", config.variant_name},
                    {"seed", config.seed},
                    {"N", config.N},
                    {"K", config.K},
                    {"K0", config.K0},
                    {"final_eval_runs", config.final_eval_runs},
                    {"tau_policy", config.tau_policy.adaptive ? "adaptive" : "fixed"},
                    {"use_set", config.flags.use_set},
                    {"use_dr_schedule", config.flags.use_dr_schedule},
                    {"use_reconciliation", config.flags.use_reconciliation},
                    {"catalog", world.state_names()}});

        ReconciledMission mission;
        if (config.flags.use_reconciliation) {
            if (!ports.reconciler) throw ConfigError("reconciliation enabled but no reconciler configured");
            std::optional<MissionExemplar> exemplar;
            if (!task.success_spec) exemplar = find_exemplar(world, task, *ports.reconciler);
            mission = reconcile_mission(task.user_description, task.success_spec, world, exemplar, *ports.reconciler);
        } else {
            mission = raw_mission(task.user_description);
        }
        json jm = {{"event", event::kMission},
                   {"composition", mission.composition},
                   {"goal_states", mission.goal_states},
                   {"initial_conditions", mission.initial_conditions},
                   {"post_goal_states", mission.post_goal_states}};
        jm["generated_success"] = mission.generated_success ? mission.generated_success->to_json() : json(nullptr);
        log.append(std::move(jm));

        const CalibrationResult cal = calibrate_threshold(world, task, ports, config, mission);
        json pilots = json::array();
        for (const auto& p : cal.pilots)
            pilots.push_back({{"candidate_id", p.candidate_id}, {"record", record_to_json(p.record)}});
        log.append({{"event", event::kCalibration},
                    {"adaptive", cal.adaptive},
                    {"fixed_value", config.tau_policy.fixed_value},
                    {"tau", cal.tau},
                    {"batches", cal.batches},
                    {"pilots", pilots}});

        IterationState state{std::nullopt, new_table(world.catalog()), mission, cal.tau, {}};
        std::vector<std::pair<int, EvaluatedCandidate>> bests;
        for (int n = 1; n <= config.N; ++n) {
            IterationResult it = run_iteration(n, state, world, task, ports, config);

            json jb = {{"event", event::kBundle},
                       {"iteration", n},
                       {"mode", std::string(to_string(it.bundle.mode))},
                       {"schedule_enabled", it.bundle.schedule_enabled},
                       {"has_table", !it.bundle.table_text.empty()},
                       {"digest", fnv1a(render_bundle(it.bundle))}};
            jb["example_id"] = state.best_prev ? json(state.best_prev->candidate.id) : json(nullptr);
            jb["example_mode"] = it.bundle.example ? json(std::string(to_string(it.bundle.example->mode))) : json(nullptr);
            log.append(std::move(jb));

            int attempt = 0;
            for (std::size_t i = 0; i < it.samples.size(); ++i) {
                if (i > 0 && it.samples[i].sample_index == 0) ++attempt;
                log.append(sample_event(n, attempt, it.samples[i]));
            }
            log.append({{"event", event::kSelection},
                        {"iteration", n},
                        {"best_id", it.best->candidate.id},
                        {"best_success", it.best->record.success},
                        {"barren", it.barren},
                        {"resamples", it.resamples}});
            log.append({{"event", event::kSetSnapshot},
                        {"iteration", n},
                        {"accumulated", it.table.accumulated_candidates()},
                        {"rows", table_rows(it.table)}});
            snapshots.emplace_back(n, it.table);

            bests.emplace_back(n, *it.best);
            state.best_prev = it.best;
            state.table = std::move(it.table);
            state.usage = std::move(it.usage);
        }

        std::vector<double> successes;
        for (const auto& [n, b] : bests) successes.push_back(b.record.success);
        const auto& [best_n, overall] = bests[select_overall(successes)];

        const std::uint64_t final_seed = derive_seed(config.seed, "final");
        const auto records = evaluate_final(overall.candidate, task, ports.evaluator, config.final_eval_runs, final_seed);
        MetricsReport metrics;
        metrics.task_id = task.id;
        metrics.variant = config.variant_name;
        metrics.seed = config.seed;
        metrics.iterations = config.N;
        for (const auto& r : records) metrics.esr_list.push_back(esr(r));
        metrics.esr_avg = esr_avg(records);
        metrics.ssd = ssd(state.usage, world.state_names());

        json jrecords = json::array();
        for (const auto& r : records) jrecords.push_back(record_to_json(r));
        log.append({{"event", event::kFinal},
                    {"best_id", overall.candidate.id},
                    {"best_iteration", best_n},
                    {"design_success", overall.record.success},
                    {"source", render_source(overall.candidate)},
                    {"base_seed", final_seed},
                    {"records", jrecords},
                    {"esr_list", metrics.esr_list},
                    {"esr_avg", metrics.esr_avg}});
        json jmetrics = metrics.to_json();
        jmetrics["event"] = event::kMetrics;
        log.append(std::move(jmetrics));
    } catch (const Error& e) {
        log.append({{"event", event::kRunError}, {"message", e.what()}});
        try {
            flush();
        } catch (const std::exception&) {
            // Keep the original failure.
        }
        if (e.category() == ErrorCategory::Config) throw;
        throw RunFailed(e.what(), log);
    }
    flush();
    return log;
}

} // namespace rosevo
