#include <fstream>
#include <set>

#include "doctest.h"
#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"
#include "rosevo/worldmodel.hpp"
#include "support.hpp"

using namespace rosevo;
using rosevo::testing::TempDir;

namespace {

const char* kThreeStates = R"({
  "id": "w",
  "states": [
    {"name": "torso_height", "kind": "distance", "arity": 1},
    {"name": "up_vec", "kind": "orientation", "arity": 3},
    {"name": "hand_pos", "kind": "position", "arity": 3}
  ],
  "tasks": [
    {"id": "t", "description": "stand", "success": {"state": "torso_height", "op": ">", "value": 0.8}}
  ]
})";

} // namespace

TEST_CASE("world model loads in file order") {
    const auto w = parse_world_model(kThreeStates);
    CHECK(w.id() == "w");
    CHECK(w.state_names() == std::vector<std::string>{"torso_height", "up_vec", "hand_pos"});
    CHECK(w.find_state("up_vec")->arity == 3);
    CHECK(w.find_state("up_vec")->kind == StateKind::Orientation);
    CHECK(w.index_of("hand_pos") == 2u);
    CHECK_FALSE(w.has_state("hand"));
}

TEST_CASE("duplicate state name is a validation error") {
    std::string text = kThreeStates;
    text.replace(text.find("hand_pos"), 8, "up_vec");
    CHECK_THROWS_AS(parse_world_model(text), ValidationError);
}

TEST_CASE("schema errors name the field") {
    std::string text = kThreeStates;
    text.replace(text.find("\"orientation\""), 13, "\"spin\"");
    try {
        parse_world_model(text);
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("states[1].kind") != std::string::npos);
    }

    std::string bad_arity = kThreeStates;
    bad_arity.replace(bad_arity.find("\"arity\": 3"), 10, "\"arity\": 0");
    CHECK_THROWS_AS(parse_world_model(bad_arity), ValidationError);
}

TEST_CASE("syntax errors cite the line number") {
    const std::string text = "{\n  \"id\": \"w\",\n  \"states\": [ oops ]\n}";
    try {
        parse_world_model(text);
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("success referencing an unknown state is rejected") {
    std::string text = kThreeStates;
    text.replace(text.find("\"state\": \"torso_height\""), 23, "\"state\": \"pelvis\"");
    CHECK_THROWS_AS(parse_world_model(text), ValidationError);
}

TEST_CASE("humanoid example world") {
    const auto w = load_world_model(std::filesystem::path(ROSEVO_SOURCE_DIR) / "data" / "humanoid.json");
    const auto& stand = w.task("stand_up");
    CHECK(stand.user_description == "make humanoids stand up");
    REQUIRE(stand.success_spec);
    CHECK(stand.success_spec->referenced_states() == std::vector<std::string>{"torso_height"});
    CHECK(stand.success_spec->holds({{"torso_height", 0.9}}));
    CHECK_FALSE(stand.success_spec->holds({{"torso_height", 0.7}}));
    CHECK_FALSE(w.task("run_forward").success_spec);
    CHECK_THROWS_AS(w.task("fly"), ArgumentError);
}

TEST_CASE("success trees combine") {
    const auto spec = SuccessSpec::from_json(nlohmann::json::parse(
        R"({"all": [{"state": "a", "op": ">=", "value": 1}, {"not": {"any": [{"state": "b", "op": "<", "value": 0}]}}]})"));
    CHECK(spec.holds({{"a", 1.0}, {"b", 0.5}}));
    CHECK_FALSE(spec.holds({{"a", 1.0}, {"b", -0.5}}));
    CHECK_FALSE(spec.holds({{"a", 0.5}, {"b", 0.5}}));
    CHECK(spec.referenced_states() == std::vector<std::string>{"a", "b"});
    CHECK(SuccessSpec::from_json(spec.to_json()) == spec);
}

TEST_CASE("catalog round-trips through save and load") {
    TempDir dir("wm");
    const auto [w, task] = generate_synthetic_task(24, 4, 0.5, 11);
    const auto path = dir.path() / "world.json";
    save_world_model(w, path);
    const auto again = load_world_model(path);
    CHECK(again == w);
    CHECK(again.state_names() == w.state_names());

    save_world_model(again, dir.path() / "world2.json");
    std::ifstream a(path), b(dir.path() / "world2.json");
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    const auto a = generate_synthetic_task(24, 4, 0.5, 7);
    const auto b = generate_synthetic_task(24, 4, 0.5, 7);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first.to_json().dump() == b.first.to_json().dump());
    const auto c = generate_synthetic_task(24, 4, 0.5, 8);
    CHECK(c.second.truth_subset != a.second.truth_subset);
}

TEST_CASE("single-state catalog forces the truth subset") {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        const auto [w, t] = generate_synthetic_task(1, 1, 0.3, seed);
        CHECK(t.truth_subset == w.state_names());
    }
}

TEST_CASE("difficulty zero gives a noiseless task") {
    const auto [w, t] = generate_synthetic_task(24, 4, 0.0, 3);
    CHECK(t.noise_scale == 0.0);
    CHECK(t.exec_failure_rate == 0.0);
    CHECK(noise_scale_for(1.0) == doctest::Approx(0.15));
    CHECK(exec_failure_rate_for(1.0) == doctest::Approx(0.10));
    CHECK(noise_scale_for(0.5) == doctest::Approx(0.075));
}

TEST_CASE("truth size larger than the catalog is an argument error") {
    CHECK_THROWS_AS(generate_synthetic_task(3, 4, 0.5, 1), ArgumentError);
    CHECK_THROWS_AS(generate_synthetic_task(3, 0, 0.5, 1), ArgumentError);
    CHECK_THROWS_AS(generate_synthetic_task(3, 1, 1.5, 1), ArgumentError);
}

TEST_CASE("generated tasks satisfy every invariant") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const int catalog = static_cast<int>(rng.uniform_int(1, 60));
        const int truth = static_cast<int>(rng.uniform_int(1, catalog));
        const double difficulty = rng.uniform();
        const std::uint64_t seed = rng.next();
        const auto [w, t] = generate_synthetic_task(catalog, truth, difficulty, seed);

        REQUIRE(w.catalog().size() == static_cast<std::size_t>(catalog));
        std::set<std::string> names;
        for (const auto& s : w.catalog()) {
            REQUIRE_FALSE(s.name.empty());
            REQUIRE(s.name.find_first_of(" \t\n") == std::string::npos);
            REQUIRE(s.arity >= 1);
            names.insert(s.name);
        }
        REQUIRE(names.size() == w.catalog().size());
        REQUIRE(t.truth_subset.size() == static_cast<std::size_t>(truth));
        REQUIRE(t.truth_ops.size() == t.truth_subset.size());
        for (const auto& s : t.truth_subset) {
            REQUIRE(names.count(s) == 1);
            REQUIRE(t.truth_ops.count(s) == 1);
        }
        REQUIRE(t.noise_scale == doctest::Approx(0.15 * difficulty));
        REQUIRE(t.exec_failure_rate == doctest::Approx(0.10 * difficulty));
        REQUIRE_FALSE(t.task.user_description.empty());
        REQUIRE_NOTHROW(validate_synthetic_task(w, t));
    }
}

TEST_CASE("file-backed surrogate view") {
    const auto w = load_world_model(std::filesystem::path(ROSEVO_SOURCE_DIR) / "data" / "humanoid.json");
    const auto view = synthetic_view(w, w.task("stand_up"));
    CHECK(view.truth_subset == std::vector<std::string>{"torso_height", "up_vec", "dof_vel"});
    CHECK(view.truth_ops.at("up_vec") == OpKind::DotProductAlignment);
    CHECK(view.noise_scale == doctest::Approx(0.045));

    const auto plain = parse_world_model(kThreeStates);
    CHECK_THROWS_AS(synthetic_view(plain, plain.task("t")), ConfigError);
}
