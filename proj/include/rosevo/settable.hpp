#pragma once

// State execution table: per-state usage and success contribution, absorbed
// only from candidates that executed.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rosevo/record.hpp"
#include "rosevo/worldmodel.hpp"

namespace rosevo {

struct SetRow {
    std::string name;
    std::int64_t usage_count = 0;
    double contribution = 0.0;

    bool operator==(const SetRow&) const = default;
};

class StateExecutionTable {
public:
    /// Zero table over the given names, kept in the given order.
    explicit StateExecutionTable(std::vector<std::string> names);

    /// Table with the given rows verbatim (e.g. read back from rendered text).
    static StateExecutionTable from_rows(std::vector<SetRow> rows, std::int64_t accumulated = 0);

    const std::vector<SetRow>& rows() const { return rows_; }
    const SetRow& row(std::string_view name) const;
    bool has(std::string_view name) const { return index_.find(name) != index_.end(); }
    std::int64_t accumulated_candidates() const { return accumulated_; }

    std::int64_t total_usage() const;
    double total_contribution() const;

    /// Returns a new table with every executed result absorbed. Each state of
    /// a result's ROS gains one use and an equal share of its success.
    /// Absorption order is canonicalised, so permutations give identical tables.
    StateExecutionTable accumulate(std::span<const EvaluatedCandidate> results) const;

    /// Fixed-width `name | usage | contribution` table in catalog order.
    std::string render() const;

    /// `state,usage,contribution` snapshot.
    std::string to_csv() const;

    bool operator==(const StateExecutionTable& other) const {
        return rows_ == other.rows_ && accumulated_ == other.accumulated_;
    }

private:
    std::vector<SetRow> rows_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::int64_t accumulated_ = 0;
};

StateExecutionTable new_table(const std::vector<StateDescriptor>& catalog);

inline StateExecutionTable accumulate(const StateExecutionTable& table,
                                      std::span<const EvaluatedCandidate> results) {
    return table.accumulate(results);
}

inline std::string render(const StateExecutionTable& table) { return table.render(); }

} // namespace rosevo
