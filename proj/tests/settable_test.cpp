#include <algorithm>
#include <map>

#include "doctest.h"
#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"
#include "rosevo/settable.hpp"
#include "support.hpp"

using namespace rosevo;
using rosevo::testing::evaluated;
using rosevo::testing::numbered;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        out.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

struct History {
    std::vector<EvaluatedCandidate> results;
};

History random_history(Rng& rng, const std::vector<std::string>& names) {
    History h;
    const auto n = rng.uniform_int(0, 30);
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<std::string> members;
        for (const auto& s : names)
            if (rng.bernoulli(0.3)) members.push_back(s);
        if (members.empty()) members.push_back(names[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(names.size()) - 1))]);
        const bool executed = rng.bernoulli(0.8);
        h.results.push_back(evaluated("c" + std::to_string(i), members, executed ? rng.uniform() : 0.0, executed));
    }
    return h;
}

} // namespace

TEST_CASE("new table is all zero") {
    const auto t = StateExecutionTable(numbered(3));
    CHECK(t.rows().size() == 3);
    for (const auto& r : t.rows()) {
        CHECK(r.usage_count == 0);
        CHECK(r.contribution == 0.0);
    }
    CHECK(t.accumulated_candidates() == 0);
    CHECK(StateExecutionTable({"only"}).rows().size() == 1);
    for (const auto& line : split_lines(t.render()))
        if (line.rfind("state", 0) != 0) CHECK(line.find("| 0 | 0.000") != std::string::npos);
    CHECK_THROWS_AS(StateExecutionTable(std::vector<std::string>{}), ArgumentError);
    CHECK_THROWS_AS(StateExecutionTable({"a", "a"}), ArgumentError);
}

TEST_CASE("success is split evenly across the observed states") {
    const auto t0 = StateExecutionTable({"q", "r", "z"});
    const std::vector<EvaluatedCandidate> results{evaluated("c", {"q", "r"}, 0.6)};
    const auto t1 = accumulate(t0, results);
    CHECK(t1.row("q").usage_count == 1);
    CHECK(t1.row("q").contribution == doctest::Approx(0.3));
    CHECK(t1.row("r").contribution == doctest::Approx(0.3));
    CHECK(t1.row("z").usage_count == 0);
    CHECK(t1.accumulated_candidates() == 1);
    CHECK(t0 == StateExecutionTable({"q", "r", "z"}));

    const auto lines = split_lines(t1.render());
    CHECK(lines[0] == "state | usage | contribution");
    CHECK(lines[1] == "q | 1 | 0.300");
    CHECK(lines[3] == "z | 0 | 0.000");
}

TEST_CASE("failed runs and empty batches leave the table unchanged") {
    const auto t0 = StateExecutionTable({"q", "r"});
    const std::vector<EvaluatedCandidate> failed{evaluated("c", {"q", "r"}, 0.0, false)};
    CHECK(accumulate(t0, failed) == t0);
    CHECK(accumulate(t0, {}) == t0);
}

TEST_CASE("unknown state is a contract violation") {
    const auto t0 = StateExecutionTable({"q", "r"});
    const std::vector<EvaluatedCandidate> bad{evaluated("c", {"q", "w"}, 0.5)};
    CHECK_THROWS_AS(accumulate(t0, bad), ContractViolation);
}

TEST_CASE("rendering is deterministic and padded") {
    const auto t = accumulate(StateExecutionTable({"a", "longer_name"}),
                              std::vector<EvaluatedCandidate>{evaluated("c", {"longer_name"}, 1.0)});
    const auto lines = split_lines(t.render());
    CHECK(lines[1] == "a           | 0 | 0.000");
    CHECK(lines[2] == "longer_name | 1 | 1.000");
    CHECK(t.render() == StateExecutionTable::from_rows(t.rows(), 1).render());
    CHECK(t.to_csv() == "state,usage,contribution\na,0,0\nlonger_name,1,1\n");
}

TEST_CASE("rendered size does not grow with history") {
    const auto names = numbered(6);
    auto t = StateExecutionTable(names);
    const auto size0 = t.render().size();
    for (int i = 0; i < 50; ++i)
        t = accumulate(t, std::vector<EvaluatedCandidate>{evaluated("c" + std::to_string(i), {"s1", "s4"}, 0.5)});
    CHECK(t.render().size() <= size0 + 6 * 4);
}

TEST_CASE("conservation, brute-force counts, order independence over random histories") {
    const auto names = numbered(8);
    Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        auto h = random_history(rng, names);
        // Split into per-iteration batches to exercise repeated accumulation.
        auto t = StateExecutionTable(names);
        std::size_t pos = 0;
        while (pos < h.results.size()) {
            const auto len = std::min<std::size_t>(h.results.size() - pos, static_cast<std::size_t>(rng.uniform_int(1, 16)));
            t = accumulate(t, std::span<const EvaluatedCandidate>(h.results.data() + pos, len));
            pos += len;
        }

        double success_sum = 0.0;
        std::int64_t absorbed = 0;
        std::map<std::string, std::int64_t> usage;
        for (const auto& r : h.results) {
            if (!r.record.executed) continue;
            success_sum += r.record.success;
            ++absorbed;
            for (const auto& s : r.candidate.ros_st) ++usage[s];
        }
        REQUIRE(std::abs(t.total_contribution() - success_sum) <= 1e-9);
        REQUIRE(t.accumulated_candidates() == absorbed);
        for (const auto& s : names) REQUIRE(t.row(s).usage_count == usage[s]);

        auto shuffled = h.results;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        const auto once = accumulate(StateExecutionTable(names), h.results);
        const auto permuted = accumulate(StateExecutionTable(names), shuffled);
        REQUIRE(once == permuted);

        std::vector<EvaluatedCandidate> failures;
        for (const auto& r : h.results)
            if (!r.record.executed) failures.push_back(r);
        REQUIRE(accumulate(StateExecutionTable(names), failures) == StateExecutionTable(names));
    }
}
