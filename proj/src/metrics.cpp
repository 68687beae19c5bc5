#include "rosevo/metrics.hpp"

#include <algorithm>

#include "rosevo/error.hpp"

namespace rosevo {

void UsageHistory::add(const RewardCandidate& candidate) {
    for (const auto& s : candidate.ros_st) counts[s] += 1;
}

std::int64_t UsageHistory::total() const {
    std::int64_t sum = 0;
    for (const auto& [name, c] : counts) sum += c;
    return sum;
}

double esr(const EvaluationRecord& record) {
    if (!record.executed || record.trajectory.empty()) return 0.0;
    return *std::max_element(record.trajectory.begin(), record.trajectory.end());
}

double esr_avg(std::span<const EvaluationRecord> records) {
    if (records.empty()) throw ArgumentError("esr_avg of an empty record list");
    double sum = 0.0;
    for (const auto& r : records) sum += esr(r);
    return sum / static_cast<double>(records.size());
}

double ssd(const UsageHistory& history, const std::vector<std::string>& catalog) {
    if (catalog.empty()) throw ArgumentError("ssd needs a non-empty catalog");
    std::int64_t total = 0;
    std::vector<std::int64_t> counts;
    counts.reserve(catalog.size());
    for (const auto& name : catalog) {
        auto it = history.counts.find(name);
        counts.push_back(it == history.counts.end() ? 0 : it->second);
        total += counts.back();
    }
    if (total == 0) return 0.0;
    const auto top = *std::max_element(counts.begin(), counts.end());
    const double max_f = static_cast<double>(top) / static_cast<double>(total);
    // Frequencies sum to one over the catalog, so their mean is 1/|catalog|.
    const double mean_f = 1.0 / static_cast<double>(catalog.size());
    return std::max(0.0, max_f - mean_f);
}

} // namespace rosevo
