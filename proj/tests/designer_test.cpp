#include <deque>
#include <numeric>

#include "doctest.h"
#include "rosevo/chat_client.hpp"
#include "rosevo/designer.hpp"
#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"
#include "rosevo/settable.hpp"
#include "support.hpp"

using namespace rosevo;
using rosevo::testing::evaluated;
using rosevo::testing::letter_world;
using rosevo::testing::numbered;

namespace {

StateExecutionTable table_with(const std::vector<SetRow>& rows) { return StateExecutionTable::from_rows(rows); }

GuidanceBundle refine_bundle(const WorldModel& w, std::vector<std::string> members) {
    auto best = evaluated("i1-k0", members, 0.7);
    best.candidate.lines = {"def compute_reward(...):", "return 0"};
    auto b = assemble_bundle(2, best, new_table(w.catalog()), raw_mission("u"), 0.1);
    REQUIRE(b.mode == Mode::OperationRefinement);
    return b;
}

// Replays canned HTTP responses and records every request body.
class FakeTransport final : public ChatTransport {
public:
    explicit FakeTransport(std::deque<std::optional<HttpResponse>> replies) : replies_(std::move(replies)) {}
    std::optional<HttpResponse> post(const EndpointConfig&, const std::string& body) override {
        bodies->push_back(body);
        if (replies_.empty()) return std::nullopt;
        auto r = replies_.front();
        replies_.pop_front();
        return r;
    }
    std::shared_ptr<std::vector<std::string>> bodies = std::make_shared<std::vector<std::string>>();

private:
    std::deque<std::optional<HttpResponse>> replies_;
};

HttpResponse ok_with(const std::vector<std::string>& contents) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array();
    for (const auto& c : contents) j["choices"].push_back({{"message", {{"role", "assistant"}, {"content", c}}}});
    return {200, j.dump()};
}

std::string fenced(const std::string& body) { return "Here you go:\n```python\n" + body + "\n```\nDone."; }

EndpointConfig fast_config() {
    EndpointConfig c;
    c.api_key = "test";
    c.backoff = std::chrono::milliseconds(0);
    return c;
}

} // namespace

TEST_CASE("contribution raises and usage lowers probability") {
    SamplerConfig cfg;
    cfg.contribution_weight = 1.0;
    cfg.usage_weight = 1.0;
    auto d = score_states(table_with({{"a", 1, 0.9}, {"b", 1, 0.1}}), cfg);
    CHECK(d.probability("a") > d.probability("b"));
    d = score_states(table_with({{"a", 1, 0.5}, {"b", 5, 0.5}}), cfg);
    CHECK(d.probability("a") > d.probability("b"));
}

TEST_CASE("zero table gives a uniform distribution") {
    const auto d = score_states(StateExecutionTable(numbered(4)), SamplerConfig{});
    for (double p : d.probabilities) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("halved scores move toward zero") {
    SamplerConfig cfg;
    const auto t = table_with({{"a", 0, 2.0}, {"b", 0, 2.0}, {"c", 30, 0.0}});
    const auto plain = score_states(t, cfg);
    const auto halved = score_states(t, cfg, {"a", "c"});
    CHECK(halved.probability("a") < halved.probability("b"));
    CHECK(halved.probability("c") / halved.probability("b") > plain.probability("c") / plain.probability("b"));
}

TEST_CASE("score distribution properties over random tables") {
    Rng rng(5150);
    for (int i = 0; i < 1000; ++i) {
        const auto n = static_cast<int>(rng.uniform_int(1, 30));
        std::vector<SetRow> rows;
        for (const auto& name : numbered(n))
            rows.push_back({name, rng.uniform_int(0, 200), rng.uniform(0.0, 40.0)});
        SamplerConfig cfg;
        cfg.temperature = rng.uniform(0.05, 5.0);
        cfg.contribution_weight = rng.uniform(0.0, 5.0);
        cfg.usage_weight = rng.uniform(0.0, 1.0);
        const auto t = table_with(rows);
        const auto d = score_states(t, cfg);
        const double sum = std::accumulate(d.probabilities.begin(), d.probabilities.end(), 0.0);
        REQUIRE(std::abs(sum - 1.0) <= 1e-9);
        for (double p : d.probabilities) REQUIRE(p > 0.0);

        REQUIRE(score_states(table_with(rows), cfg).probabilities == d.probabilities);

        auto boosted = rows;
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
        boosted[k].contribution += rng.uniform(0.0, 3.0);
        REQUIRE(score_states(table_with(boosted), cfg).probabilities[k] >= d.probabilities[k] - 1e-15);
    }
}

TEST_CASE("synthetic designer returns K parseable samples") {
    const auto [world, task] = generate_synthetic_task(24, 4, 0.5, 2);
    const auto b = assemble_bundle(1, std::nullopt, new_table(world.catalog()), raw_mission("u"), 0.1);
    const auto texts = synthetic_propose(b, 16, 9, SamplerConfig{}, world);
    REQUIRE(texts.size() == 16);
    for (const auto& t : texts) {
        const auto c = parse_candidate(t, world, "c", 1, 0);
        CHECK(c.unknown_refs.empty());
        CHECK(c.ros_st.size() >= 2);
        CHECK(c.ros_st.size() <= 6);
    }
    CHECK(synthetic_propose(b, 16, 9, SamplerConfig{}, world) == texts);
    CHECK(synthetic_propose(b, 16, 10, SamplerConfig{}, world) != texts);
}

TEST_CASE("refinement keeps the example members") {
    const auto w = letter_world({"p", "q", "r", "s", "t"});
    const auto b = refine_bundle(w, {"q", "r"});
    for (const auto& t : synthetic_propose(b, 16, 4, SamplerConfig{}, w))
        CHECK(parse_candidate(t, w, "c", 2, 0).ros_st == std::vector<std::string>{"q", "r"});
}

TEST_CASE("refinement never changes the observed states") {
    const auto [world, task] = generate_synthetic_task(24, 4, 0.5, 8);
    const auto names = world.state_names();
    Rng rng(8080);
    int draws = 0;
    for (int trial = 0; trial < 70; ++trial) {
        std::vector<std::string> members;
        for (const auto& n : names)
            if (rng.bernoulli(0.2)) members.push_back(n);
        if (members.empty()) members.push_back(names[3]);
        const auto b = refine_bundle(world, members);
        for (const auto& t : synthetic_propose(b, 16, rng.next(), SamplerConfig{}, world)) {
            REQUIRE(parse_candidate(t, world, "c", 2, 0).ros_st == members);
            ++draws;
        }
    }
    CHECK(draws >= 1000);
}

TEST_CASE("invalid rate injects unknown references") {
    const auto [world, task] = generate_synthetic_task(24, 4, 0.5, 2);
    const auto b = assemble_bundle(1, std::nullopt, new_table(world.catalog()), raw_mission("u"), 0.1);
    SamplerConfig cfg;
    cfg.invalid_rate = 1.0;
    for (const auto& t : synthetic_propose(b, 8, 1, cfg, world))
        CHECK_FALSE(parse_candidate(t, world, "c", 1, 0).unknown_refs.empty());
    cfg.member_min = 5;
    cfg.member_max = 4;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("execution table text is read back") {
    const auto w = letter_world({"alpha", "b"});
    const auto t = accumulate(new_table(w.catalog()), std::vector<EvaluatedCandidate>{evaluated("c", {"b"}, 0.25)});
    const auto back = parse_table_text(t.render(), w);
    CHECK(back.row("b").usage_count == 1);
    CHECK(back.row("b").contribution == doctest::Approx(0.25));
    CHECK(back.row("alpha").usage_count == 0);
}

TEST_CASE("code block extraction") {
    const auto blocks = extract_code_blocks("a\n```python\nx = 1\n```\nb\n```\ny = 2\nz = 3\n```");
    CHECK(blocks == std::vector<std::string>{"x = 1", "y = 2\nz = 3"});
    CHECK(extract_code_blocks("no fences").empty());
    CHECK(extract_code_blocks("```\nunterminated").empty());
}

TEST_CASE("chat request shape") {
    EndpointConfig c;
    const auto j = build_chat_request(c, {{"system", "s"}, {"user", "u"}}, 16);
    CHECK(j.at("model") == "gpt-4-0314");
    CHECK(j.at("temperature") == 1.0);
    CHECK(j.at("n") == 16);
    CHECK(j.at("messages").size() == 2);
    CHECK(j.at("messages")[1].at("role") == "user");
}

TEST_CASE("llm designer keeps one block per fenced completion") {
    const auto w = letter_world({"hand_pos", "block_pos"});
    std::vector<std::string> contents;
    for (int i = 0; i < 14; ++i) contents.push_back(fenced("def compute_reward(hand_pos):\n    return -norm(hand_pos)"));
    contents.push_back("I cannot help with that.");
    contents.push_back("Still no code.");
    auto transport = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{ok_with(contents)});
    auto bodies = transport->bodies;
    LlmDesigner d(w, std::make_shared<ChatClient>(fast_config(), std::move(transport)));
    const auto b = assemble_bundle(1, std::nullopt, new_table(w.catalog()), raw_mission("u"), 0.1);
    const auto texts = d.propose(b, 16, 0);
    CHECK(texts.size() == 14);
    CHECK(texts[0] == "def compute_reward(hand_pos):\n    return -norm(hand_pos)");
    REQUIRE(bodies->size() == 1);
    const auto req = nlohmann::json::parse(bodies->front());
    CHECK(req.at("n") == 16);
    CHECK(req.at("messages")[0].at("content").get<std::string>().find("hand_pos") != std::string::npos);
}

TEST_CASE("llm designer tops up single-choice endpoints") {
    const auto w = letter_world({"hand_pos"});
    const auto one = ok_with({fenced("r = hand_pos")});
    auto transport = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{one, one, one});
    auto bodies = transport->bodies;
    LlmDesigner d(w, std::make_shared<ChatClient>(fast_config(), std::move(transport)));
    const auto b = assemble_bundle(1, std::nullopt, new_table(w.catalog()), raw_mission("u"), 0.1);
    CHECK(d.propose(b, 3, 0).size() == 3);
    CHECK(bodies->size() == 3);
}

TEST_CASE("transport failures are retried then surface as designer errors") {
    const auto w = letter_world({"hand_pos"});
    const auto b = assemble_bundle(1, std::nullopt, new_table(w.catalog()), raw_mission("u"), 0.1);

    auto dead = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{});
    auto dead_bodies = dead->bodies;
    LlmDesigner d(w, std::make_shared<ChatClient>(fast_config(), std::move(dead)));
    CHECK_THROWS_AS(d.propose(b, 4, 0), DesignerError);
    CHECK(dead_bodies->size() == 3);

    auto flaky = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{
        std::nullopt, HttpResponse{503, "busy"}, ok_with({fenced("r = hand_pos")})});
    ChatClient client(fast_config(), std::move(flaky));
    CHECK(client.complete({{"user", "x"}}, 1).size() == 1);

    auto denied = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{HttpResponse{401, "no"}});
    auto denied_bodies = denied->bodies;
    ChatClient strict(fast_config(), std::move(denied));
    CHECK_THROWS_AS(strict.complete({{"user", "x"}}, 1), TransportError);
    CHECK(denied_bodies->size() == 1);

    auto empty = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{ok_with({"no code"}), ok_with({})});
    LlmDesigner none(w, std::make_shared<ChatClient>(fast_config(), std::move(empty)));
    CHECK_THROWS_AS(none.propose(b, 1, 0), DesignerError);
}

TEST_CASE("llm reconciler returns the completion text") {
    const auto w = letter_world({"torso_height"});
    auto transport = std::make_unique<FakeTransport>(std::deque<std::optional<HttpResponse>>{
        ok_with({"[COMPOSITION]\na\n[GOAL STATES]\nb\n[INITIAL CONDITIONS]\nc\n[POST-GOAL STATES]\nd\n"})});
    LlmReconciler rec(std::make_shared<ChatClient>(fast_config(), std::move(transport)));
    SuccessSpec spec{{SuccessNode::Type::Compare, "torso_height", Comparator::Greater, 0.8, {}}};
    const auto m = reconcile_mission("stand", spec, w, std::nullopt, rec);
    CHECK(m.goal_states == "b");
}

TEST_CASE("system prompt comes from the prompt directory") {
    CHECK(designer_system_prompt().find("def compute_reward") != std::string::npos);
}
