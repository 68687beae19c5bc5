#pragma once

// Evaluation port: one "training run" per call. The surrogate stands in for
// RL training with a hidden ground-truth state subset.

#include <cstdint>
#include <string>
#include <vector>

#include "rosevo/record.hpp"
#include "rosevo/ros.hpp"
#include "rosevo/worldmodel.hpp"

namespace rosevo {

class EvaluatorPort {
public:
    virtual ~EvaluatorPort() = default;
    /// Must be safe to call concurrently for distinct candidates.
    virtual EvaluationRecord evaluate(const RewardCandidate& candidate, const TaskDef& task,
                                      std::uint64_t seed) = 0;
};

struct SurrogateCoefficients {
    double relevance = 0.8;  ///< weight of the Jaccard overlap with the truth subset
    double irrelevance = 0.3; ///< penalty per irrelevant state, scaled by catalog size
    double operation = 0.2;  ///< weight of the ideal-operation coverage
};

inline constexpr std::size_t kTrajectoryCheckpoints = 10;

/// |a ∩ b| / |a ∪ b|; both inputs are sets of names.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Fraction of truth states covered by a term of their ideal operation kind.
double op_match(const std::vector<OpTerm>& terms, const SyntheticTask& task);

/// Noise-free surrogate score before clamping.
double surrogate_base(const RewardCandidate& candidate, const SyntheticTask& task, std::size_t catalog_size,
                      const SurrogateCoefficients& coeffs = {});

EvaluationRecord surrogate_evaluate(const RewardCandidate& candidate, const SyntheticTask& task,
                                    const WorldModel& world, std::uint64_t seed,
                                    const SurrogateCoefficients& coeffs = {});

class SurrogateEvaluator final : public EvaluatorPort {
public:
    SurrogateEvaluator(WorldModel world, SyntheticTask task, SurrogateCoefficients coeffs = {});

    EvaluationRecord evaluate(const RewardCandidate& candidate, const TaskDef& task, std::uint64_t seed) override;

    const SyntheticTask& task() const { return task_; }

private:
    WorldModel world_;
    SyntheticTask task_;
    SurrogateCoefficients coeffs_;
};

/// Delegates each run to an external trainer process:
///   <command> <reward_source_file> <seed>
/// which must print one JSON object on stdout:
///   {"executed": bool, "success": number, "trajectory": [numbers], "failure_cause": string|null}
/// A non-zero exit status or unreadable output counts as a failed run.
class ExternalTrainerEvaluator final : public EvaluatorPort {
public:
    /// Throws ConfigError for an empty command.
    explicit ExternalTrainerEvaluator(std::string command);

    EvaluationRecord evaluate(const RewardCandidate& candidate, const TaskDef& task, std::uint64_t seed) override;

private:
    std::string command_;
};

/// `runs` independent evaluations with seeds base_seed + i.
std::vector<EvaluationRecord> evaluate_final(const RewardCandidate& candidate, const TaskDef& task,
                                             EvaluatorPort& evaluator, int runs, std::uint64_t base_seed);

} // namespace rosevo
