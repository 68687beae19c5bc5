#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rosevo/ros.hpp"

namespace rosevo {

/// Outcome of one training run of a reward candidate.
struct EvaluationRecord {
    std::string candidate_id;
    bool executed = false;
    double success = 0.0;
    std::vector<double> trajectory; ///< checkpoint successes; empty when not executed
    std::optional<std::string> failure_cause;
    std::uint64_t seed = 0;

    static EvaluationRecord failure(std::string candidate_id, std::string cause, std::uint64_t seed);

    /// Throws ContractViolation on executed/success/trajectory inconsistency.
    void validate() const;

    bool operator==(const EvaluationRecord&) const = default;
};

struct EvaluatedCandidate {
    RewardCandidate candidate;
    EvaluationRecord record;

    bool operator==(const EvaluatedCandidate&) const = default;
};

} // namespace rosevo
