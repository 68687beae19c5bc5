#include "doctest.h"
#include "rosevo/error.hpp"
#include "rosevo/metrics.hpp"
#include "support.hpp"

using namespace rosevo;
using rosevo::testing::candidate_of;

namespace {

UsageHistory history_of(const std::map<std::string, int>& counts) {
    UsageHistory h;
    int id = 0;
    for (const auto& [name, n] : counts)
        for (int i = 0; i < n; ++i) h.add(candidate_of("c" + std::to_string(id++), {name}));
    return h;
}

EvaluationRecord with_trajectory(std::vector<double> t) {
    EvaluationRecord r;
    r.candidate_id = "c";
    r.executed = true;
    r.trajectory = std::move(t);
    r.success = *std::max_element(r.trajectory.begin(), r.trajectory.end());
    return r;
}

} // namespace

TEST_CASE("ssd hand-computed case") {
    // counts {a:4, b:1, c:1}: max frequency 4/6, mean 1/3.
    const auto h = history_of({{"a", 4}, {"b", 1}, {"c", 1}});
    const double expected = 4.0 / 6.0 - 1.0 / 3.0;
    CHECK(ssd(h, {"a", "b", "c"}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ssd(h, {"a", "b", "c"}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ssd of uniform usage is zero") {
    CHECK(ssd(history_of({{"a", 3}, {"b", 3}, {"c", 3}}), {"a", "b", "c"}) == doctest::Approx(0.0));
    CHECK(ssd(UsageHistory{}, {"a", "b"}) == 0.0);
}

TEST_CASE("ssd is scale invariant") {
    const auto small = history_of({{"a", 2}, {"b", 1}, {"c", 5}});
    const auto big = history_of({{"a", 20}, {"b", 10}, {"c", 50}});
    CHECK(ssd(small, {"a", "b", "c", "d"}) == doctest::Approx(ssd(big, {"a", "b", "c", "d"})).epsilon(1e-12));
    CHECK_THROWS_AS(ssd(small, {}), ArgumentError);
}

TEST_CASE("usage history counts every member of every candidate") {
    UsageHistory h;
    h.add(candidate_of("x", {"a", "b"}));
    h.add(candidate_of("y", {"b"}));
    CHECK(h.counts.at("a") == 1);
    CHECK(h.counts.at("b") == 2);
    CHECK(h.total() == 3);
}

TEST_CASE("esr is the trajectory maximum") {
    CHECK(esr(with_trajectory({0.1, 0.5, 0.3})) == doctest::Approx(0.5));
    CHECK(esr(EvaluationRecord::failure("c", "crash", 0)) == 0.0);
}

TEST_CASE("esr average is the mean over runs") {
    std::vector<EvaluationRecord> runs;
    for (double v : {0.4, 0.6, 0.5, 0.5, 0.5}) runs.push_back(with_trajectory({0.0, v}));
    CHECK(esr_avg(runs) == doctest::Approx(0.5));
    CHECK_THROWS_AS(esr_avg(std::span<const EvaluationRecord>{}), ArgumentError);
}
