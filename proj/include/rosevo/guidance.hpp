#pragma once

// Everything the reward designer sees in one iteration: the mode schedule,
// the example projection, the training feedback, the rendered execution
// table, and the reconciled mission.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rosevo/record.hpp"
#include "rosevo/ros.hpp"
#include "rosevo/settable.hpp"
#include "rosevo/worldmodel.hpp"

namespace rosevo {

struct FeedbackSummary {
    bool executed = false;
    double success = 0.0;
    std::vector<double> trajectory; ///< at most kMaxCheckpoints values
    std::optional<std::string> failure_cause;

    static constexpr std::size_t kMaxCheckpoints = 10;

    bool operator==(const FeedbackSummary&) const = default;
};

struct ReconciledMission {
    std::string composition;
    std::string goal_states;
    std::string initial_conditions;
    std::string post_goal_states;
    std::optional<SuccessSpec> generated_success;

    bool operator==(const ReconciledMission&) const = default;
};

/// Fixed section headers of the mission template. prompts/mission_template.txt
/// documents the same strings.
inline constexpr std::string_view kHeaderComposition = "[COMPOSITION]";
inline constexpr std::string_view kHeaderGoalStates = "[GOAL STATES]";
inline constexpr std::string_view kHeaderInitialConditions = "[INITIAL CONDITIONS]";
inline constexpr std::string_view kHeaderPostGoalStates = "[POST-GOAL STATES]";
inline constexpr std::string_view kHeaderSuccessFunction = "[SUCCESS FUNCTION]";

struct GuidanceBundle {
    int iteration = 1;
    Mode mode = Mode::StateSelection;
    std::optional<RewardProjection> example;
    std::optional<FeedbackSummary> feedback;
    std::string table_text; ///< empty when the execution table is disabled
    ReconciledMission mission;
    bool schedule_enabled = true; ///< false reproduces the full-code baseline loop

    bool operator==(const GuidanceBundle&) const = default;
};

struct BundleOptions {
    bool use_set = true;
    bool use_dr_schedule = true;
};

/// State selection for odd n or prev_success < tau; operation refinement otherwise.
Mode select_mode(int n, double prev_success, double tau);

/// Evenly spaced checkpoints (first and last kept) when longer than max_points.
std::vector<double> downsample(std::span<const double> values, std::size_t max_points);

FeedbackSummary build_feedback(const EvaluationRecord& record);

// -- mission reconciliation --------------------------------------------------

struct MissionExemplar {
    ReconciledMission mission;
    SuccessSpec success;
};

/// The only data a reconciler ever receives. Nothing from the evolution loop
/// (tables, candidates, feedback) has a slot here.
struct ReconcileRequest {
    std::string user_description;
    std::optional<SuccessSpec> success_spec;
    const WorldModel* world = nullptr;
    std::optional<MissionExemplar> exemplar;

    bool wants_success_code() const { return !success_spec.has_value(); }
};

class ReconcilerPort {
public:
    virtual ~ReconcilerPort() = default;
    /// Returns text in the mission template format.
    virtual std::string reconcile(const ReconcileRequest& request) = 0;
};

/// Deterministic stand-in for the reconciling model.
class SyntheticReconciler final : public ReconcilerPort {
public:
    std::string reconcile(const ReconcileRequest& request) override;
};

/// Renders a mission in template format (success section included when present).
std::string render_mission(const ReconciledMission& mission);

/// Parses template-format text. Throws ReconciliationError on a missing or
/// empty section and ValidationError on unknown success-function states.
ReconciledMission parse_mission(std::string_view text, const WorldModel& world);

/// Full prompt for a model-backed reconciler.
std::string render_reconcile_prompt(const ReconcileRequest& request);

ReconciledMission reconcile_mission(const std::string& user_description,
                                    const std::optional<SuccessSpec>& success_spec, const WorldModel& world,
                                    const std::optional<MissionExemplar>& exemplar, ReconcilerPort& reconciler);

/// Mission used when reconciliation is disabled: the raw description alone.
ReconciledMission raw_mission(const std::string& user_description);

// -- bundle ------------------------------------------------------------------

GuidanceBundle assemble_bundle(int n, const std::optional<EvaluatedCandidate>& best_prev,
                               const StateExecutionTable& table, const ReconciledMission& mission, double tau,
                               BundleOptions options = {});

/// Designer-facing user message for a bundle.
std::string render_bundle(const GuidanceBundle& bundle);

} // namespace rosevo
