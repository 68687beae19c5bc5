#pragma once

// Append-only JSON-lines event log of one evolution run, and the replay
// check that recomputes every selection and metric from the raw events.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rosevo/metrics.hpp"
#include "rosevo/record.hpp"

namespace rosevo {

/// Event type names (the `event` field of every line).
namespace event {
inline constexpr const char* kRunStart = "run_start";
inline constexpr const char* kMission = "mission";
inline constexpr const char* kCalibration = "calibration";
inline constexpr const char* kBundle = "bundle";
inline constexpr const char* kCandidate = "candidate";
inline constexpr const char* kSelection = "selection";
inline constexpr const char* kSetSnapshot = "set_snapshot";
inline constexpr const char* kFinal = "final";
inline constexpr const char* kMetrics = "metrics";
inline constexpr const char* kRunError = "run_error";
} // namespace event

class RunLog {
public:
    /// Appends an event, stamping its `seq` field.
    void append(nlohmann::json event);

    const std::vector<nlohmann::json>& events() const { return events_; }
    std::vector<const nlohmann::json*> of_type(std::string_view type) const;

    std::string to_jsonl() const;
    void write(const std::filesystem::path& path) const;

    /// Throws LogFormatError naming the first bad line.
    static RunLog parse(std::string_view text);
    static RunLog read(const std::filesystem::path& path);

    bool operator==(const RunLog&) const = default;

private:
    std::vector<nlohmann::json> events_;
};

nlohmann::json record_to_json(const EvaluationRecord& record);
EvaluationRecord record_from_json(const nlohmann::json& j);
nlohmann::json candidate_to_json(const RewardCandidate& candidate);
RewardCandidate candidate_from_json(const nlohmann::json& j);

struct MetricsReport {
    std::string task_id;
    std::string variant;
    double esr_avg = 0.0;
    std::vector<double> esr_list;
    double ssd = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

struct ReplayReport {
    std::size_t events = 0;
    std::size_t verified_events = 0;
    std::vector<std::string> mismatches;
    std::vector<double> best_success_curve; ///< per iteration, as recomputed
    std::optional<MetricsReport> recomputed;
    std::optional<MetricsReport> stored;

    bool ok() const { return mismatches.empty(); }
};

/// Recomputes thresholds, modes, per-iteration bests, execution-table
/// snapshots, the overall best, and the final metrics from raw events, and
/// compares each with what the log stored.
ReplayReport replay(const RunLog& log);

} // namespace rosevo
