#pragma once

// Environment-robot state catalogs, task definitions, and the synthetic task
// generator used for desk-scale runs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace rosevo {

enum class StateKind { Position, Orientation, Velocity, Force, Distance, Angle, BooleanFlag };

/// Operation kinds a reward term can apply to its operands.
enum class OpKind {
    DistancePenalty,
    ExponentialShaping,
    ThresholdBonus,
    VelocityPenalty,
    DotProductAlignment,
    WeightedSum,
};

inline constexpr OpKind kAllOpKinds[] = {
    OpKind::DistancePenalty,    OpKind::ExponentialShaping,  OpKind::ThresholdBonus,
    OpKind::VelocityPenalty,    OpKind::DotProductAlignment, OpKind::WeightedSum,
};

std::string_view to_string(StateKind kind);
std::string_view to_string(OpKind kind);
std::optional<StateKind> state_kind_from_string(std::string_view s);
std::optional<OpKind> op_kind_from_string(std::string_view s);

struct StateDescriptor {
    std::string name;
    StateKind kind = StateKind::Position;
    int arity = 1;

    bool operator==(const StateDescriptor&) const = default;
};

enum class Comparator { Less, LessEqual, Greater, GreaterEqual };

/// Comparison tree over named states. Leaves compare one state's scalar
/// reading against a constant; inner nodes combine children.
struct SuccessNode {
    enum class Type { Compare, All, Any, Not };

    Type type = Type::Compare;
    std::string state;
    Comparator comparator = Comparator::Greater;
    double threshold = 0.0;
    std::vector<SuccessNode> children;

    bool operator==(const SuccessNode&) const = default;
};

struct SuccessSpec {
    SuccessNode root;

    /// Every state name referenced by a leaf, in first-appearance order.
    std::vector<std::string> referenced_states() const;

    /// Evaluates the predicate; missing readings count as false leaves.
    bool holds(const std::map<std::string, double>& readings) const;

    /// Compact infix rendering, e.g. `torso_height > 0.8`.
    std::string to_text() const;

    nlohmann::json to_json() const;
    static SuccessSpec from_json(const nlohmann::json& j, const std::string& where = "success");

    bool operator==(const SuccessSpec&) const = default;
};

/// Optional hidden-truth block for file-backed tasks, so that the surrogate
/// evaluator can score them.
struct SurrogateSpec {
    std::map<std::string, OpKind> truth_ops;
    double difficulty = 0.0;

    bool operator==(const SurrogateSpec&) const = default;
};

struct TaskDef {
    std::string id;
    std::string user_description;
    std::optional<SuccessSpec> success_spec;
    std::optional<SurrogateSpec> surrogate;

    bool operator==(const TaskDef&) const = default;
};

class WorldModel {
public:
    WorldModel() = default;
    /// Validates on construction; throws ValidationError.
    WorldModel(std::string id, std::vector<StateDescriptor> catalog, std::vector<TaskDef> tasks);

    const std::string& id() const { return id_; }
    const std::vector<StateDescriptor>& catalog() const { return catalog_; }
    const std::vector<TaskDef>& tasks() const { return tasks_; }

    std::vector<std::string> state_names() const;
    bool has_state(std::string_view name) const;
    const StateDescriptor* find_state(std::string_view name) const;
    /// Position in canonical catalog order, or nullopt.
    std::optional<std::size_t> index_of(std::string_view name) const;
    const TaskDef& task(std::string_view id) const;

    nlohmann::json to_json() const;

    bool operator==(const WorldModel& other) const {
        return id_ == other.id_ && catalog_ == other.catalog_ && tasks_ == other.tasks_;
    }

private:
    std::string id_;
    std::vector<StateDescriptor> catalog_;
    std::vector<TaskDef> tasks_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

WorldModel parse_world_model(std::string_view text);
WorldModel load_world_model(const std::filesystem::path& path);
void save_world_model(const WorldModel& world, const std::filesystem::path& path);

struct SyntheticTask {
    TaskDef task;
    std::vector<std::string> truth_subset; // canonical catalog order
    std::map<std::string, OpKind> truth_ops;
    double difficulty = 0.0;
    double noise_scale = 0.0;
    double exec_failure_rate = 0.0;

    bool operator==(const SyntheticTask&) const = default;
};

/// Difficulty map: both quantities are linear in difficulty and vanish at 0.
double noise_scale_for(double difficulty);
double exec_failure_rate_for(double difficulty);

std::pair<WorldModel, SyntheticTask> generate_synthetic_task(int catalog_size, int truth_size,
                                                             double difficulty, std::uint64_t seed);

/// Builds the surrogate view of a file-backed task that carries a truth block.
SyntheticTask synthetic_view(const WorldModel& world, const TaskDef& task);

/// Throws ValidationError if any invariant of the synthetic task fails.
void validate_synthetic_task(const WorldModel& world, const SyntheticTask& task);

} // namespace rosevo
