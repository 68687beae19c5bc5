#pragma once

// Reward candidates and their Reward Observation Space: the observed state
// subset plus the operation terms built on it.

#include <string>
#include <string_view>
#include <vector>

#include "rosevo/worldmodel.hpp"

namespace rosevo {

enum class Mode { StateSelection, OperationRefinement };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct OpTerm {
    OpKind kind = OpKind::WeightedSum;
    std::vector<std::string> operands;
    double weight = 1.0;

    bool operator==(const OpTerm&) const = default;
};

struct RewardCandidate {
    std::string id;
    int iteration = 1;
    int sample_index = 0;
    std::vector<std::string> lines;        ///< logical lines, in source order
    std::vector<std::string> ros_st;       ///< observed states, canonical catalog order
    std::vector<OpTerm> ros_op;
    std::vector<std::string> unknown_refs; ///< signature parameters absent from the catalog

    bool operator==(const RewardCandidate&) const = default;
};

struct RewardProjection {
    Mode mode = Mode::StateSelection;
    std::string text;
    std::vector<std::string> member_names;

    bool operator==(const RewardProjection&) const = default;
};

/// Line printed between the first and last line of a truncated reward.
inline constexpr std::string_view kTruncationMarker = "\xE2\x80\xA6"; // U+2026

/// Splits source into logical lines: `#` comments removed, a trailing `\`
/// joins the next physical line, surrounding whitespace trimmed, blanks dropped.
std::vector<std::string> logical_lines(std::string_view source);

/// Identifier tokens of a line (`[A-Za-z_][A-Za-z0-9_]*`), in order.
std::vector<std::string> identifier_tokens(std::string_view line);

/// Parameters of a `def name(...)` line, or empty if the line is not one.
std::vector<std::string> signature_parameters(std::string_view line);

/// Infers the operation kind of one logical line from its call and operator
/// vocabulary; falls back to weighted-sum.
OpKind infer_op_kind(std::string_view line);

/// First numeric literal of the line with its sign, or 1.0 if none.
double leading_weight(std::string_view line);

/// Throws ParseError ("empty reward" / "no observed states").
RewardCandidate parse_candidate(std::string_view source, const WorldModel& world, std::string id,
                                int iteration, int sample_index);

/// Logical lines joined with newlines; parsing the result yields the same candidate.
std::string render_source(const RewardCandidate& candidate);

/// First line alone, or first line, marker line, last line.
std::string truncate(const RewardCandidate& candidate);

RewardProjection project(const RewardCandidate& candidate, Mode mode);

/// Number of lines in projection text that are not the truncation marker.
std::size_t content_line_count(std::string_view text);

} // namespace rosevo
