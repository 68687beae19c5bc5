#include <fstream>

#include "doctest.h"
#include "rosevo/error.hpp"
#include "rosevo/evolution.hpp"
#include "rosevo/runlog.hpp"
#include "support.hpp"

using namespace rosevo;
using nlohmann::json;
using rosevo::testing::TempDir;

namespace {

RunLog synthetic_run(std::uint64_t seed, VariantFlags flags = {}, TauPolicy tau = TauPolicy::Adaptive(),
                     double invalid_rate = 0.0) {
    auto [world, task] = generate_synthetic_task(24, 4, 0.5, seed);
    SamplerConfig sampler;
    sampler.invalid_rate = invalid_rate;
    SyntheticDesigner designer(world, sampler);
    SurrogateEvaluator ev(world, task);
    SyntheticReconciler rec;
    Ports ports{designer, ev, &rec, {}};
    EvolutionConfig cfg;
    cfg.seed = seed;
    cfg.flags = flags;
    cfg.tau_policy = tau;
    return run_evolution(world, task.task, ports, cfg);
}

RunLog edited(const RunLog& log, const std::function<void(std::vector<json>&)>& edit) {
    auto events = log.events();
    edit(events);
    std::string text;
    for (const auto& e : events) text += e.dump() + "\n";
    return RunLog::parse(text);
}

} // namespace

TEST_CASE("an intact log replays cleanly") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto log = synthetic_run(seed);
        const auto rep = replay(log);
        CHECK(rep.ok());
        CHECK(rep.verified_events == rep.events);
        CHECK(rep.best_success_curve.size() == 5);
        REQUIRE(rep.recomputed);
        CHECK(rep.recomputed->esr_avg == doctest::Approx(rep.stored->esr_avg).epsilon(1e-12));
    }
}

TEST_CASE("every variant and failure injection replays cleanly") {
    const VariantFlags variants[] = {{false, false, true}, {true, false, true}, {true, true, false}, {true, true, true}};
    for (const auto& flags : variants)
        for (auto tau : {TauPolicy::Adaptive(), TauPolicy::Fixed(0.1)})
            CHECK(replay(synthetic_run(9, flags, tau, 0.25)).ok());
}

TEST_CASE("text round trip is exact") {
    const auto log = synthetic_run(4);
    CHECK(RunLog::parse(log.to_jsonl()) == log);
    CHECK(RunLog::parse(log.to_jsonl()).to_jsonl() == log.to_jsonl());
    TempDir dir("log");
    log.write(dir.path() / "x.jsonl");
    CHECK(RunLog::read(dir.path() / "x.jsonl") == log);
}

TEST_CASE("sequence numbers are stamped in order") {
    RunLog log;
    log.append({{"event", "run_start"}});
    log.append({{"event", "mission"}});
    CHECK(log.events()[0]["seq"] == 0);
    CHECK(log.events()[1]["seq"] == 1);
}

TEST_CASE("a tampered success value is flagged") {
    const auto log = synthetic_run(5);
    const auto bad = edited(log, [](std::vector<json>& events) {
        for (auto& e : events)
            if (e["event"] == "selection") {
                e["best_success"] = e["best_success"].get<double>() + 0.01;
                break;
            }
    });
    const auto rep = replay(bad);
    CHECK_FALSE(rep.ok());
    CHECK(rep.mismatches.front().find("best success differs") != std::string::npos);

    const auto bad_record = edited(log, [](std::vector<json>& events) {
        for (auto& e : events)
            if (e["event"] == "candidate" && e["record"]["executed"] == true) {
                e["record"]["success"] = 0.999;
                break;
            }
    });
    CHECK_FALSE(replay(bad_record).ok());

    const auto bad_metric = edited(log, [](std::vector<json>& events) { events.back()["ssd"] = 0.5; });
    CHECK_FALSE(replay(bad_metric).ok());

    const auto bad_tau = edited(log, [](std::vector<json>& events) {
        for (auto& e : events)
            if (e["event"] == "calibration") e["tau"] = e["tau"].get<double>() * 2 + 0.01;
    });
    CHECK_FALSE(replay(bad_tau).ok());

    const auto bad_table = edited(log, [](std::vector<json>& events) {
        for (auto& e : events)
            if (e["event"] == "set_snapshot") {
                e["rows"][0][1] = e["rows"][0][1].get<int>() + 1;
                break;
            }
    });
    CHECK_FALSE(replay(bad_table).ok());
}

TEST_CASE("corrupt lines name the line number") {
    const auto text = synthetic_run(6).to_jsonl();
    std::string broken = text;
    const auto second_nl = broken.find('\n', broken.find('\n') + 1);
    broken.insert(second_nl + 1, "{not json\n");
    try {
        RunLog::parse(broken);
        FAIL("expected a format error");
    } catch (const LogFormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    const auto swapped = edited(synthetic_run(6), [](std::vector<json>&) {});
    auto events = swapped.events();
    std::swap(events[1], events[2]);
    std::string out;
    for (const auto& e : events) out += e.dump() + "\n";
    CHECK_THROWS_AS(RunLog::parse(out), LogFormatError);
}

TEST_CASE("records and candidates serialize losslessly") {
    EvaluationRecord r;
    r.candidate_id = "i2-k3";
    r.executed = true;
    r.success = 0.1 + 0.2;
    r.trajectory = {0.1, 0.1 + 0.2};
    r.seed = 0xFFFFFFFFFFFFFFFFull;
    CHECK(record_from_json(json::parse(record_to_json(r).dump())) == r);
    const auto f = EvaluationRecord::failure("x", "boom", 7);
    CHECK(record_from_json(record_to_json(f)) == f);

    auto c = rosevo::testing::candidate_of("i1-k0", {"a", "b"}, 1, 0);
    c.ros_op.push_back({OpKind::DotProductAlignment, {"a", "b"}, -0.25});
    c.unknown_refs = {"ghost"};
    CHECK(candidate_from_json(json::parse(candidate_to_json(c).dump())) == c);
}
