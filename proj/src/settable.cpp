#include "rosevo/settable.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "rosevo/error.hpp"

namespace rosevo {

StateExecutionTable::StateExecutionTable(std::vector<std::string> names) {
    if (names.empty()) throw ArgumentError("state execution table needs a non-empty catalog");
    rows_.reserve(names.size());
    for (auto& n : names) {
        if (!index_.emplace(n, rows_.size()).second)
            throw ArgumentError("state execution table: duplicate state '" + n + "'");
        rows_.push_back(SetRow{std::move(n), 0, 0.0});
    }
}

StateExecutionTable StateExecutionTable::from_rows(std::vector<SetRow> rows, std::int64_t accumulated) {
    std::vector<std::string> names;
    names.reserve(rows.size());
    for (const auto& r : rows) names.push_back(r.name);
    StateExecutionTable t(std::move(names));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].usage_count < 0 || !(rows[i].contribution >= 0.0))
            throw ArgumentError("state execution table row '" + rows[i].name + "' has negative values");
        t.rows_[i] = std::move(rows[i]);
    }
    t.accumulated_ = accumulated;
    return t;
}

const SetRow& StateExecutionTable::row(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("state execution table has no row '" + std::string(name) + "'");
    return rows_[it->second];
}

std::int64_t StateExecutionTable::total_usage() const {
    std::int64_t sum = 0;
    for (const auto& r : rows_) sum += r.usage_count;
    return sum;
}

double StateExecutionTable::total_contribution() const {
    double sum = 0.0;
    for (const auto& r : rows_) sum += r.contribution;
    return sum;
}

StateExecutionTable StateExecutionTable::accumulate(std::span<const EvaluatedCandidate> results) const {
    std::vector<const EvaluatedCandidate*> absorbed;
    for (const auto& r : results) {
        for (const auto& s : r.candidate.ros_st)
            if (!has(s))
                throw ContractViolation("candidate " + r.candidate.id + " references state '" + s +
                                        "' absent from the execution table");
        if (r.record.executed) absorbed.push_back(&r);
    }
    auto key = [](const EvaluatedCandidate* e) {
        return std::tie(e->candidate.id, e->candidate.iteration, e->candidate.sample_index, e->record.success,
                        e->candidate.ros_st);
    };
    std::sort(absorbed.begin(), absorbed.end(),
              [&](const EvaluatedCandidate* a, const EvaluatedCandidate* b) { return key(a) < key(b); });

    StateExecutionTable next = *this;
    for (const auto* e : absorbed) {
        const auto& members = e->candidate.ros_st;
        if (members.empty()) continue;
        const double share = e->record.success / static_cast<double>(members.size());
        for (const auto& s : members) {
            auto& row = next.rows_[next.index_.find(s)->second];
            row.usage_count += 1;
            row.contribution += share;
        }
        next.accumulated_ += 1;
    }
    return next;
}

std::string StateExecutionTable::render() const {
    std::size_t name_w = 0;
    std::size_t usage_w = 0;
    for (const auto& r : rows_) {
        name_w = std::max(name_w, r.name.size());
        usage_w = std::max(usage_w, std::to_string(r.usage_count).size());
    }
    std::ostringstream os;
    os << "state | usage | contribution\n";
    char buf[64];
    for (const auto& r : rows_) {
        std::snprintf(buf, sizeof buf, "%.3f", r.contribution);
        const auto usage = std::to_string(r.usage_count);
        os << r.name << std::string(name_w - r.name.size(), ' ') << " | " << std::string(usage_w - usage.size(), ' ')
           << usage << " | " << buf << '\n';
    }
    return os.str();
}

std::string StateExecutionTable::to_csv() const {
    std::ostringstream os;
    os << "state,usage,contribution\n";
    char buf[64];
    for (const auto& r : rows_) {
        std::snprintf(buf, sizeof buf, "%.17g", r.contribution);
        os << r.name << ',' << r.usage_count << ',' << buf << '\n';
    }
    return os.str();
}

StateExecutionTable new_table(const std::vector<StateDescriptor>& catalog) {
    std::vector<std::string> names;
    names.reserve(catalog.size());
    for (const auto& s : catalog) names.push_back(s.name);
    return StateExecutionTable(std::move(names));
}

} // namespace rosevo
