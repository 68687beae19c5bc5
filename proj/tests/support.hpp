#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rosevo/record.hpp"
#include "rosevo/ros.hpp"
#include "rosevo/worldmodel.hpp"

namespace rosevo::testing {

// Plain catalog of n one-dimensional position states named s0..s{n-1}.
inline WorldModel letter_world(const std::vector<std::string>& names) {
    std::vector<StateDescriptor> states;
    for (const auto& n : names) states.push_back({n, StateKind::Position, 1});
    return WorldModel("test-world", std::move(states), {});
}

inline std::vector<std::string> numbered(int n, const std::string& stem = "s") {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
    return out;
}

inline RewardCandidate candidate_of(std::string id, std::vector<std::string> members, int iteration = 1,
                                    int sample_index = 0) {
    RewardCandidate c;
    c.id = std::move(id);
    c.iteration = iteration;
    c.sample_index = sample_index;
    c.ros_st = std::move(members);
    for (const auto& m : c.ros_st) c.ros_op.push_back({OpKind::WeightedSum, {m}, 1.0});
    c.lines = {"reward = 1.0"};
    return c;
}

inline EvaluationRecord executed_record(const std::string& id, double success) {
    EvaluationRecord r;
    r.candidate_id = id;
    r.executed = true;
    r.success = success;
    r.trajectory = {success / 2.0, success};
    return r;
}

inline EvaluatedCandidate evaluated(std::string id, std::vector<std::string> members, double success,
                                    bool executed = true) {
    auto c = candidate_of(id, std::move(members));
    EvaluationRecord r = executed ? executed_record(id, success) : EvaluationRecord::failure(id, "crash", 0);
    return {std::move(c), std::move(r)};
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("rosevo-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace rosevo::testing
