#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rosevo/record.hpp"

namespace rosevo {

/// Per-state usage over every candidate ever sampled, executed or not.
/// Unlike the execution table, failures count here.
struct UsageHistory {
    std::map<std::string, std::int64_t> counts;

    void add(const RewardCandidate& candidate);
    std::int64_t total() const;

    bool operator==(const UsageHistory&) const = default;
};

/// Best checkpoint of one run; 0 for a run that did not execute.
double esr(const EvaluationRecord& record);

/// Mean ESR over independent runs. Throws ArgumentError on an empty list.
double esr_avg(std::span<const EvaluationRecord> records);

/// Sampling state disparity: max minus mean of per-state usage frequency,
/// with frequencies normalised by total usage and the mean taken over the
/// whole catalog. Zero for an empty history.
double ssd(const UsageHistory& history, const std::vector<std::string>& catalog);

} // namespace rosevo
