// Acceptance suite: one PASS/FAIL line per criterion, each under its time budget.
// Exit status is 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rosevo/designer.hpp"
#include "rosevo/error.hpp"
#include "rosevo/evaluator.hpp"
#include "rosevo/evolution.hpp"
#include "rosevo/experiment.hpp"
#include "rosevo/guidance.hpp"
#include "rosevo/metrics.hpp"
#include "rosevo/rng.hpp"
#include "rosevo/runlog.hpp"
#include "rosevo/settable.hpp"

using namespace rosevo;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// Collects the first failed check; later checks still run but do not overwrite it.
class Checker {
public:
    void expect(bool cond, const std::string& what) {
        if (!cond && out_.ok) {
            out_.ok = false;
            out_.detail = what;
        }
    }
    Outcome done(std::string summary) {
        if (out_.ok) out_.detail = std::move(summary);
        return out_;
    }

private:
    Outcome out_;
};

std::filesystem::path scratch_dir(const std::string& tag) {
    std::random_device rd;
    auto p = std::filesystem::temp_directory_path() / ("rosevo-accept-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RewardCandidate bare_candidate(std::string id, std::vector<std::string> members) {
    RewardCandidate c;
    c.id = std::move(id);
    c.iteration = 1;
    c.ros_st = std::move(members);
    for (const auto& m : c.ros_st) c.ros_op.push_back({OpKind::WeightedSum, {m}, 1.0});
    c.lines = {"reward = 1.0"};
    return c;
}

// ---- 1: mode schedule -------------------------------------------------------

Outcome scheduler_truth_table() {
    Checker chk;
    const double eps = 1e-9;
    int cases = 0;
    for (double tau : {0.05, 0.1, 0.3, 0.5, 0.8}) {
        for (int n = 2; n <= 6; ++n) {
            for (double prev : {tau - eps, tau, tau + eps}) {
                const Mode expected = (n % 2 == 1 || prev < tau) ? Mode::StateSelection : Mode::OperationRefinement;
                chk.expect(select_mode(n, prev, tau) == expected,
                           "n=" + std::to_string(n) + " prev=" + std::to_string(prev));
                ++cases;
            }
        }
    }
    return chk.done(std::to_string(cases) + " cases");
}

// ---- 2: execution table -----------------------------------------------------

Outcome set_conservation() {
    Checker chk;
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back("s" + std::to_string(i));
    Rng rng(20240601);
    const int histories = 1000;
    for (int h = 0; h < histories; ++h) {
        std::vector<EvaluatedCandidate> results;
        const auto count = rng.uniform_int(1, 40);
        for (std::int64_t i = 0; i < count; ++i) {
            std::vector<std::string> members;
            for (const auto& s : names)
                if (rng.bernoulli(0.35)) members.push_back(s);
            if (members.empty()) members.push_back(names[static_cast<std::size_t>(rng.uniform_int(0, 9))]);
            const std::string id = "h" + std::to_string(h) + "-" + std::to_string(i);
            EvaluationRecord r;
            if (rng.bernoulli(0.75)) {
                r.candidate_id = id;
                r.executed = true;
                r.success = rng.uniform();
                r.trajectory = {r.success};
            } else {
                r = EvaluationRecord::failure(id, "injected", 0);
            }
            results.push_back({bare_candidate(id, members), r});
        }

        StateExecutionTable table(names);
        std::size_t pos = 0;
        while (pos < results.size()) {
            const auto len = std::min<std::size_t>(results.size() - pos, static_cast<std::size_t>(rng.uniform_int(1, 16)));
            table = table.accumulate(std::span<const EvaluatedCandidate>(results.data() + pos, len));
            pos += len;
        }

        double executed_sum = 0.0;
        std::map<std::string, std::int64_t> recount;
        std::vector<EvaluatedCandidate> failures;
        for (const auto& r : results) {
            if (!r.record.executed) {
                failures.push_back(r);
                continue;
            }
            executed_sum += r.record.success;
            for (const auto& s : r.candidate.ros_st) ++recount[s];
        }
        chk.expect(std::abs(table.total_contribution() - executed_sum) <= 1e-9,
                   "contribution sum differs in history " + std::to_string(h));
        for (const auto& s : names)
            chk.expect(table.row(s).usage_count == recount[s], "usage recount differs for " + s);
        chk.expect(StateExecutionTable(names).accumulate(failures) == StateExecutionTable(names),
                   "failed runs changed the table");
    }
    return chk.done(std::to_string(histories) + " histories");
}

// ---- 3: surrogate oracle ----------------------------------------------------

double oracle_success(const RewardCandidate& c, const SyntheticTask& task, std::size_t catalog) {
    double inter = 0, irrelevant = 0;
    for (const auto& s : c.ros_st) {
        bool hit = false;
        for (const auto& t : task.truth_subset) hit = hit || s == t;
        if (hit) inter += 1; else irrelevant += 1;
    }
    const double uni = static_cast<double>(c.ros_st.size() + task.truth_subset.size()) - inter;
    const double j = uni > 0 ? inter / uni : 0.0;
    double covered = 0;
    for (const auto& t : task.truth_subset) {
        bool hit = false;
        for (const auto& term : c.ros_op)
            for (const auto& o : term.operands) hit = hit || (o == t && term.kind == task.truth_ops.at(t));
        if (hit) covered += 1;
    }
    double v = 0.8 * j - 0.3 * irrelevant / static_cast<double>(catalog) +
               0.2 * covered / static_cast<double>(task.truth_subset.size());
    return v < 0 ? 0 : (v > 1 ? 1 : v);
}

Outcome surrogate_oracle() {
    Checker chk;
    {
        auto [world, task] = generate_synthetic_task(24, 4, 0.0, 11);
        auto c = bare_candidate("half", {task.truth_subset[0], task.truth_subset[1]});
        for (auto& t : c.ros_op)
            t.kind = task.truth_ops.at(t.operands[0]) == OpKind::WeightedSum ? OpKind::DistancePenalty
                                                                              : OpKind::WeightedSum;
        const double got = surrogate_evaluate(c, task, world, 5).success;
        chk.expect(std::abs(got - 0.40) <= 1e-12, "half-truth case gave " + std::to_string(got));
        chk.expect(std::abs(oracle_success(c, task, 24) - 0.40) <= 1e-12, "oracle half-truth case");
    }
    Rng rng(777);
    const int cases = 1000;
    for (int i = 0; i < cases; ++i) {
        const int catalog = static_cast<int>(rng.uniform_int(4, 32));
        const int truth = static_cast<int>(rng.uniform_int(1, std::min(catalog, 6)));
        auto [world, task] = generate_synthetic_task(catalog, truth, 0.0, rng.next());
        std::vector<std::string> members;
        for (const auto& n : world.state_names())
            if (rng.bernoulli(0.25)) members.push_back(n);
        if (members.empty()) members.push_back(world.state_names().front());
        auto c = bare_candidate("o" + std::to_string(i), members);
        for (auto& t : c.ros_op) t.kind = kAllOpKinds[static_cast<std::size_t>(rng.uniform_int(0, 5))];
        const auto r = surrogate_evaluate(c, task, world, rng.next());
        chk.expect(r.executed, "noise-free case did not execute");
        chk.expect(std::abs(r.success - oracle_success(c, task, static_cast<std::size_t>(catalog))) <= 1e-12,
                   "case " + std::to_string(i) + " disagrees");
    }
    return chk.done(std::to_string(cases + 1) + " cases incl. 0.40");
}

// ---- 4: determinism and replay ----------------------------------------------

Outcome determinism_replay() {
    Checker chk;
    const auto dir = scratch_dir("det");
    std::size_t verified = 0, total = 0;
    for (std::uint64_t seed : {3u, 17u}) {
        RunOptions o;
        o.seed = seed;
        o.output_dir = dir / ("a" + std::to_string(seed));
        execute_run(o);
        o.output_dir = dir / ("b" + std::to_string(seed));
        execute_run(o);
        const auto a = slurp(dir / ("a" + std::to_string(seed)) / "runlog.jsonl");
        const auto b = slurp(dir / ("b" + std::to_string(seed)) / "runlog.jsonl");
        chk.expect(!a.empty() && a == b, "runlogs differ for seed " + std::to_string(seed));

        std::ostringstream out, err;
        const int code = cmd_report({dir / ("a" + std::to_string(seed)) / "runlog.jsonl"}, std::nullopt, out, err);
        chk.expect(code == kExitOk, "report exit " + std::to_string(code));
        const auto rep = replay(RunLog::parse(a));
        chk.expect(rep.ok() && rep.verified_events == rep.events, "replay did not verify every event");
        verified += rep.verified_events;
        total += rep.events;
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    return chk.done("byte-identical logs, " + std::to_string(verified) + "/" + std::to_string(total) +
                    " events verified");
}

// ---- 5: ablation ordering ---------------------------------------------------

std::map<std::string, double> ablation_means(const SamplerConfig& sampler, int seeds) {
    std::map<std::string, double> means;
    for (const auto& variant : standard_variants()) {
        double sum = 0.0;
        for (int s = 0; s < seeds; ++s) {
            RunOptions o;
            o.variant = variant;
            o.seed = static_cast<std::uint64_t>(s);
            o.sampler = sampler;
            sum += metrics_of(execute_run(o)).esr_avg;
        }
        means[variant.name] = sum / seeds;
    }
    return means;
}

std::string format_means(const std::map<std::string, double>& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "baseline+DU %.4f, 1+SET %.4f, 2+DR-fixed %.4f, 2+DR %.4f", m.at("baseline+DU"),
                  m.at("1+SET"), m.at("2+DR-fixed"), m.at("2+DR"));
    return buf;
}

Outcome ablation_ordering() {
    const auto m = ablation_means(SamplerConfig{}, 50);
    const double full_gain = m.at("2+DR") - m.at("baseline+DU");
    const double set_gain = m.at("1+SET") - m.at("baseline+DU");
    Outcome out;
    out.ok = full_gain >= 0.05 && set_gain >= 0.02;
    char buf[128];
    std::snprintf(buf, sizeof buf, "; full %+.4f (need +0.05), +SET %+.4f (need +0.02)", full_gain, set_gain);
    out.detail = format_means(m) + buf;
    return out;
}

// ---- 6: metrics -------------------------------------------------------------

UsageHistory history_of(const std::map<std::string, int>& counts) {
    UsageHistory h;
    int id = 0;
    for (const auto& [name, n] : counts)
        for (int i = 0; i < n; ++i) h.add(bare_candidate("u" + std::to_string(id++), {name}));
    return h;
}

EvaluationRecord trajectory_record(std::vector<double> t) {
    EvaluationRecord r;
    r.candidate_id = "m";
    r.executed = true;
    r.trajectory = std::move(t);
    r.success = *std::max_element(r.trajectory.begin(), r.trajectory.end());
    return r;
}

Outcome metric_cases() {
    Checker chk;
    const std::vector<std::string> abc{"a", "b", "c"};
    chk.expect(std::abs(ssd(history_of({{"a", 3}, {"b", 3}, {"c", 3}}), abc)) <= 1e-12, "uniform usage is not 0");
    chk.expect(std::abs(ssd(history_of({{"a", 4}, {"b", 1}, {"c", 1}}), abc) - 1.0 / 3.0) <= 1e-12,
               "4/1/1 usage is not 1/3");
    const std::vector<std::string> abcd{"a", "b", "c", "d"};
    chk.expect(std::abs(ssd(history_of({{"a", 2}, {"b", 1}, {"c", 5}}), abcd) -
                        ssd(history_of({{"a", 20}, {"b", 10}, {"c", 50}}), abcd)) <= 1e-12,
               "ssd not scale invariant");
    chk.expect(esr(trajectory_record({0.1, 0.7, 0.4})) == 0.7, "esr is not the trajectory max");
    chk.expect(esr(EvaluationRecord::failure("f", "x", 0)) == 0.0, "esr of a failed run is not 0");
    const std::vector<EvaluationRecord> runs{trajectory_record({0.2, 0.6}), trajectory_record({0.4}),
                                             trajectory_record({0.1, 0.5, 0.3})};
    chk.expect(std::abs(esr_avg(runs) - 0.5) <= 1e-12, "esr_avg is not the mean");
    return chk.done("ssd 0, 1/3, scale invariance; esr max; esr_avg mean");
}

// ---- 7: calibration ---------------------------------------------------------

class EchoDesigner final : public DesignerPort {
public:
    explicit EchoDesigner(std::vector<std::string> sources) : sources_(std::move(sources)) {}
    std::vector<std::string> propose(const GuidanceBundle&, int K, std::uint64_t) override {
        ++calls;
        std::vector<std::string> out;
        for (int k = 0; k < K; ++k) out.push_back(sources_[static_cast<std::size_t>(k) % sources_.size()]);
        return out;
    }
    int calls = 0;

private:
    std::vector<std::string> sources_;
};

class ScriptedEvaluator final : public EvaluatorPort {
public:
    using Rule = std::function<std::optional<double>(const RewardCandidate&)>;
    explicit ScriptedEvaluator(Rule rule) : rule_(std::move(rule)) {}
    EvaluationRecord evaluate(const RewardCandidate& c, const TaskDef&, std::uint64_t seed) override {
        const auto v = rule_(c);
        if (!v) return EvaluationRecord::failure(c.id, "scripted failure", seed);
        EvaluationRecord r;
        r.candidate_id = c.id;
        r.executed = true;
        r.success = *v;
        r.trajectory = {*v};
        r.seed = seed;
        return r;
    }

private:
    Rule rule_;
};

Outcome calibration() {
    Checker chk;
    auto [world, synth] = generate_synthetic_task(8, 2, 0.0, 1);
    const auto& task = synth.task;
    const auto names = world.state_names();
    EchoDesigner designer({"r = " + names[0], "r = " + names[1]});
    EvolutionConfig cfg;
    cfg.K = 6;
    cfg.K0 = 6;

    {
        // Odd samples of the first batch fail; the second batch completes the quota.
        ScriptedEvaluator ev([](const RewardCandidate& c) -> std::optional<double> {
            if (c.id.rfind("p0-", 0) == 0 && c.sample_index % 2 == 1) return std::nullopt;
            return 0.05 * (c.sample_index + 1) + (c.id.rfind("p1-", 0) == 0 ? 0.5 : 0.0);
        });
        Ports ports{designer, ev, nullptr, {}};
        const auto cal = calibrate_threshold(world, task, ports, cfg, raw_mission(task.user_description));
        double expected = 0.0;
        // p0: samples 0, 2, 4 execute; p1: samples 0, 1, 2 fill the rest.
        for (int k : {0, 2, 4}) expected += 0.05 * (k + 1);
        for (int k : {0, 1, 2}) expected += 0.05 * (k + 1) + 0.5;
        expected /= 6.0;
        chk.expect(cal.used_successes.size() == 6, "used " + std::to_string(cal.used_successes.size()) + " pilots");
        chk.expect(std::abs(cal.tau - expected) <= 1e-12, "tau " + std::to_string(cal.tau) + " != " +
                                                              std::to_string(expected));
    }
    {
        ScriptedEvaluator ev([](const RewardCandidate&) { return std::optional<double>(0.42); });
        Ports ports{designer, ev, nullptr, {}};
        const auto cal = calibrate_threshold(world, task, ports, cfg, raw_mission(task.user_description));
        chk.expect(std::abs(cal.tau - 0.42) <= 1e-12, "constant pilots did not give the constant");
    }
    {
        const int before = designer.calls;
        ScriptedEvaluator ev([](const RewardCandidate&) { return std::optional<double>(0.9); });
        Ports ports{designer, ev, nullptr, {}};
        auto fixed = cfg;
        fixed.tau_policy = TauPolicy::Fixed(0.1);
        const auto cal = calibrate_threshold(world, task, ports, fixed, raw_mission(task.user_description));
        chk.expect(cal.tau == 0.1 && cal.pilots.empty() && designer.calls == before, "fixed tau drew pilots");
    }
    return chk.done("mean of K0 executed pilots, constant case, fixed bypass");
}

// ---- 8: table usage vs usage history ----------------------------------------

// Fails one sample per iteration on top of whatever the surrogate does.
class FailureInjector final : public EvaluatorPort {
public:
    explicit FailureInjector(EvaluatorPort& inner) : inner_(inner) {}
    EvaluationRecord evaluate(const RewardCandidate& c, const TaskDef& task, std::uint64_t seed) override {
        if (c.iteration >= 1 && c.id.rfind("p", 0) != 0 && c.sample_index == c.iteration % 4)
            return EvaluationRecord::failure(c.id, "injected failure", seed);
        return inner_.evaluate(c, task, seed);
    }

private:
    EvaluatorPort& inner_;
};

Outcome usage_divergence() {
    Checker chk;
    int runs = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto [world, synth] = generate_synthetic_task(24, 4, 0.5, derive_seed(seed, "world"));
        SurrogateEvaluator surrogate(world, synth);
        FailureInjector injector(surrogate);
        SyntheticDesigner designer(world, SamplerConfig{});
        SyntheticReconciler reconciler;
        Ports ports{designer, injector, &reconciler, {}};
        EvolutionConfig cfg;
        cfg.seed = seed;
        const auto log = run_evolution(world, synth.task, ports, cfg);

        std::int64_t history = 0, failures = 0;
        for (const auto* e : log.of_type(event::kCandidate)) {
            if ((*e)["iteration"].get<int>() < 1 || (*e)["candidate"].is_null()) continue;
            history += static_cast<std::int64_t>((*e)["candidate"]["ros_st"].size());
            failures += (*e)["record"]["executed"].get<bool>() ? 0 : 1;
        }
        std::int64_t table = 0;
        for (const auto& row : (*log.of_type(event::kSetSnapshot).back())["rows"]) table += row[1].get<std::int64_t>();
        chk.expect(failures >= 1, "no failure reached the log for seed " + std::to_string(seed));
        chk.expect(table < history, "table usage " + std::to_string(table) + " not below history " +
                                        std::to_string(history) + " for seed " + std::to_string(seed));
        ++runs;
    }
    return chk.done(std::to_string(runs) + " runs with injected failures");
}

struct Criterion {
    int number;
    double budget_seconds; // <= 0: no time limit
    std::function<Outcome()> check;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, 1.0, scheduler_truth_table}, {2, 10.0, set_conservation}, {3, 5.0, surrogate_oracle},
        {4, 30.0, determinism_replay},   {5, 120.0, ablation_ordering}, {6, 1.0, metric_cases},
        {7, 5.0, calibration},           {8, 0.0, usage_divergence},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool ok = out.ok;
        if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
            ok = false;
            out.detail += "; over the " + std::to_string(static_cast<int>(c.budget_seconds)) + " s budget";
        }
        failed += ok ? 0 : 1;
        std::printf("criterion %d: %s (%.3f s) %s\n", c.number, ok ? "PASS" : "FAIL", secs, out.detail.c_str());
        std::fflush(stdout);
    }

    // Not a criterion: how the ordering moves with the contribution weight.
    for (double alpha : {3.0, 5.0}) {
        SamplerConfig s;
        s.contribution_weight = alpha;
        std::printf("info: contribution weight %.0f over 50 seeds: %s\n", alpha,
                    format_means(ablation_means(s, 50)).c_str());
    }

    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
