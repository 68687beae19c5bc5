#include <set>

#include "doctest.h"
#include "rosevo/error.hpp"
#include "rosevo/evaluator.hpp"
#include "rosevo/rng.hpp"
#include "support.hpp"

using namespace rosevo;
using rosevo::testing::candidate_of;

namespace {

// Straight-line restatement of the surrogate formula, kept free of the
// library helpers on purpose.
double oracle_success(const std::vector<std::string>& ros_st, const std::vector<OpTerm>& ros_op,
                      const std::vector<std::string>& truth, const std::map<std::string, OpKind>& ideal,
                      std::size_t catalog) {
    double inter = 0, irrelevant = 0;
    for (const auto& s : ros_st) {
        bool in_truth = false;
        for (const auto& t : truth) in_truth = in_truth || t == s;
        if (in_truth) inter += 1; else irrelevant += 1;
    }
    const double uni = static_cast<double>(ros_st.size() + truth.size()) - inter;
    const double j = uni > 0 ? inter / uni : 0.0;
    double covered = 0;
    for (const auto& t : truth) {
        bool hit = false;
        for (const auto& term : ros_op)
            for (const auto& o : term.operands)
                if (o == t && term.kind == ideal.at(t)) hit = true;
        if (hit) covered += 1;
    }
    const double op = covered / static_cast<double>(truth.size());
    double v = 0.8 * j - 0.3 * irrelevant / static_cast<double>(catalog) + 0.2 * op;
    if (v < 0) v = 0;
    if (v > 1) v = 1;
    return v;
}

std::pair<WorldModel, SyntheticTask> noiseless(std::uint64_t seed) { return generate_synthetic_task(24, 4, 0.0, seed); }

} // namespace

TEST_CASE("half the truth subset and nothing else scores 0.40") {
    auto [world, task] = noiseless(3);
    auto c = candidate_of("c", {task.truth_subset[0], task.truth_subset[1]});
    // Give both members an operation that is not ideal for them.
    for (auto& t : c.ros_op) t.kind = task.truth_ops.at(t.operands[0]) == OpKind::WeightedSum ? OpKind::DistancePenalty
                                                                                            : OpKind::WeightedSum;
    const auto r = surrogate_evaluate(c, task, world, 1);
    CHECK(r.executed);
    CHECK(std::abs(r.success - 0.40) <= 1e-12);
    CHECK(std::abs(oracle_success(c.ros_st, c.ros_op, task.truth_subset, task.truth_ops, 24) - 0.40) <= 1e-12);
}

TEST_CASE("the exact truth subset with ideal operations scores 1") {
    auto [world, task] = noiseless(4);
    auto c = candidate_of("c", task.truth_subset);
    for (auto& t : c.ros_op) t.kind = task.truth_ops.at(t.operands[0]);
    CHECK(surrogate_evaluate(c, task, world, 9).success == doctest::Approx(1.0));
}

TEST_CASE("surrogate agrees with the straight-line oracle") {
    Rng rng(4242);
    for (int i = 0; i < 1000; ++i) {
        const int catalog = static_cast<int>(rng.uniform_int(2, 40));
        const int truth = static_cast<int>(rng.uniform_int(1, std::min(catalog, 8)));
        auto [world, task] = generate_synthetic_task(catalog, truth, 0.0, rng.next());
        const auto names = world.state_names();
        std::vector<std::string> members;
        for (const auto& n : names)
            if (rng.bernoulli(0.3)) members.push_back(n);
        if (members.empty()) members.push_back(names.front());
        auto c = candidate_of("c" + std::to_string(i), members);
        for (auto& t : c.ros_op) t.kind = kAllOpKinds[rng.uniform_int(0, 5)];
        if (rng.bernoulli(0.3) && members.size() > 1) c.ros_op.push_back({kAllOpKinds[rng.uniform_int(0, 5)], members, 0.5});

        const auto r = surrogate_evaluate(c, task, world, rng.next());
        REQUIRE(r.executed);
        const double expected = oracle_success(c.ros_st, c.ros_op, task.truth_subset, task.truth_ops, names.size());
        REQUIRE(std::abs(r.success - expected) <= 1e-12);
        REQUIRE(r.trajectory.size() == kTrajectoryCheckpoints);
        REQUIRE(r.trajectory.back() == r.success);
        REQUIRE(std::is_sorted(r.trajectory.begin(), r.trajectory.end()));
        REQUIRE_NOTHROW(r.validate());
    }
}

TEST_CASE("success is monotone in truth membership when noiseless") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        auto [world, task] = generate_synthetic_task(24, 4, 0.0, rng.next());
        std::set<std::string> truth(task.truth_subset.begin(), task.truth_subset.end());
        std::vector<std::string> inside, outside;
        for (const auto& n : world.state_names()) (truth.count(n) ? inside : outside).push_back(n);

        std::vector<std::string> base{inside[0], outside[static_cast<std::size_t>(rng.uniform_int(0, 19))]};
        auto c0 = candidate_of("a", base);
        const double s0 = surrogate_evaluate(c0, task, world, 1).success;

        auto more_truth = base;
        more_truth.push_back(inside[1]);
        REQUIRE(surrogate_evaluate(candidate_of("b", more_truth), task, world, 1).success >= s0);

        auto more_noise = base;
        for (const auto& o : outside)
            if (std::find(base.begin(), base.end(), o) == base.end()) {
                more_noise.push_back(o);
                break;
            }
        REQUIRE(surrogate_evaluate(candidate_of("c", more_noise), task, world, 1).success <= s0);
    }
}

TEST_CASE("unknown references always fail") {
    auto [world, task] = generate_synthetic_task(24, 4, 0.0, 5);
    auto c = candidate_of("c", task.truth_subset);
    c.unknown_refs = {"phantom_state_0"};
    const auto r = surrogate_evaluate(c, task, world, 3);
    CHECK_FALSE(r.executed);
    CHECK(r.success == 0.0);
    CHECK(r.failure_cause.has_value());
    CHECK_NOTHROW(r.validate());

    auto d = candidate_of("d", {"not_in_catalog"});
    CHECK_FALSE(surrogate_evaluate(d, task, world, 3).executed);
}

TEST_CASE("failure rate follows difficulty") {
    auto [world, task] = generate_synthetic_task(24, 4, 1.0, 5);
    int failures = 0;
    for (int i = 0; i < 4000; ++i)
        failures += surrogate_evaluate(candidate_of("c" + std::to_string(i), {task.truth_subset[0]}), task, world, 17)
                        .executed ? 0 : 1;
    CHECK(failures / 4000.0 == doctest::Approx(0.10).epsilon(0.2));
}

TEST_CASE("evaluation is deterministic and independent of call order") {
    auto [world, task] = generate_synthetic_task(24, 4, 0.5, 6);
    SurrogateEvaluator ev(world, task);
    const auto a = candidate_of("a", {task.truth_subset[0]});
    const auto b = candidate_of("b", {task.truth_subset[1]});
    const auto ra = ev.evaluate(a, task.task, 5);
    const auto rb = ev.evaluate(b, task.task, 5);
    CHECK(ev.evaluate(b, task.task, 5) == rb);
    CHECK(ev.evaluate(a, task.task, 5) == ra);
    CHECK(ev.evaluate(a, task.task, 6) != ra);

    TaskDef other = task.task;
    other.id = "other";
    CHECK_THROWS_AS(ev.evaluate(a, other, 5), ArgumentError);
}

TEST_CASE("final evaluation uses consecutive seeds") {
    auto [world, task] = generate_synthetic_task(24, 4, 0.5, 6);
    SurrogateEvaluator ev(world, task);
    const auto c = candidate_of("best", task.truth_subset);
    const auto runs = evaluate_final(c, task.task, ev, 5, 100);
    REQUIRE(runs.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(runs[static_cast<std::size_t>(i)].seed == 100u + static_cast<std::uint64_t>(i));
    CHECK_THROWS_AS(evaluate_final(c, task.task, ev, 0, 100), ArgumentError);
}

TEST_CASE("record validation") {
    EvaluationRecord r;
    r.candidate_id = "c";
    r.executed = true;
    r.trajectory = {0.2, 0.6};
    r.success = 0.6;
    CHECK_NOTHROW(r.validate());
    r.success = 0.5;
    CHECK_THROWS_AS(r.validate(), ContractViolation);
    auto f = EvaluationRecord::failure("c", "x", 0);
    f.success = 0.1;
    CHECK_THROWS_AS(f.validate(), ContractViolation);
}

TEST_CASE("external trainer command") {
    CHECK_THROWS_AS(ExternalTrainerEvaluator(""), ConfigError);
    const std::string script = std::string(ROSEVO_SOURCE_DIR) + "/tests/data/fake_trainer.sh";
    ExternalTrainerEvaluator ev(script);
    TaskDef task{"t", "do it", std::nullopt, std::nullopt};

    auto ok = candidate_of("ok", {"a"});
    const auto r = ev.evaluate(ok, task, 1);
    CHECK(r.executed);
    CHECK(r.success == doctest::Approx(0.4));
    CHECK(r.trajectory.size() == 3);

    auto bad = candidate_of("bad", {"a"});
    bad.lines = {"reward = crash(a)"};
    const auto f = ev.evaluate(bad, task, 1);
    CHECK_FALSE(f.executed);
    CHECK(f.failure_cause == "reward raised");

    ExternalTrainerEvaluator missing("/nonexistent/trainer");
    CHECK_FALSE(missing.evaluate(ok, task, 1).executed);
}
