#include "rosevo/ros.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "rosevo/error.hpp"

namespace rosevo {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

bool is_signature(std::string_view line) { return line.rfind("def ", 0) == 0; }

} // namespace

std::string_view to_string(Mode mode) {
    return mode == Mode::StateSelection ? "state-selection" : "operation-refinement";
}

Mode mode_from_string(std::string_view s) {
    if (s == "state-selection") return Mode::StateSelection;
    if (s == "operation-refinement") return Mode::OperationRefinement;
    throw ParseError("unknown mode '" + std::string(s) + "'");
}

std::vector<std::string> logical_lines(std::string_view source) {
    std::vector<std::string> out;
    std::string pending;
    bool continuing = false;

    std::size_t pos = 0;
    while (pos <= source.size()) {
        auto nl = source.find('\n', pos);
        if (nl == std::string_view::npos) nl = source.size();
        std::string_view raw = source.substr(pos, nl - pos);
        pos = nl + 1;

        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string piece = trim(raw);
        bool joins = false;
        if (!piece.empty() && piece.back() == '\\') {
            piece.pop_back();
            piece = trim(piece);
            joins = true;
        }
        if (!piece.empty()) {
            if (continuing && !pending.empty()) pending += ' ';
            pending += piece;
        }
        continuing = joins;
        if (!continuing && !pending.empty()) {
            out.push_back(std::move(pending));
            pending.clear();
        }
        if (nl == source.size()) break;
    }
    if (!pending.empty()) out.push_back(std::move(pending));
    return out;
}

std::vector<std::string> identifier_tokens(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        if (ident_start(line[i]) && (i == 0 || !ident_char(line[i - 1]))) {
            std::size_t j = i;
            while (j < line.size() && ident_char(line[j])) ++j;
            tokens.emplace_back(line.substr(i, j - i));
            i = j;
        } else {
            ++i;
        }
    }
    return tokens;
}

std::vector<std::string> signature_parameters(std::string_view line) {
    if (!is_signature(line)) return {};
    auto open = line.find('(');
    auto close = line.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return {};
    std::vector<std::string> params;
    std::string_view inner = line.substr(open + 1, close - open - 1);
    std::size_t pos = 0;
    while (pos <= inner.size()) {
        auto comma = inner.find(',', pos);
        if (comma == std::string_view::npos) comma = inner.size();
        std::string_view p = inner.substr(pos, comma - pos);
        // Drop annotations and defaults.
        p = p.substr(0, std::min(p.find(':'), p.find('=')));
        std::string name = trim(p);
        if (!name.empty() && name != "self" && name[0] != '*') params.push_back(std::move(name));
        pos = comma + 1;
        if (comma == inner.size()) break;
    }
    return params;
}

OpKind infer_op_kind(std::string_view line) {
    if (contains(line, "exp(")) return OpKind::ExponentialShaping;
    if (contains(line, "dot(")) return OpKind::DotProductAlignment;
    if (contains(line, "distance(") || contains(line, "norm(")) return OpKind::DistancePenalty;
    if (contains(line, "square(") || contains(line, "**2") || contains(line, "** 2"))
        return OpKind::VelocityPenalty;
    if (contains(line, "where(") || line.find_first_of("<>") != std::string_view::npos)
        return OpKind::ThresholdBonus;
    return OpKind::WeightedSum;
}

double leading_weight(std::string_view line) {
    // Skip the assignment target so `r_0 = ...` does not read the 0.
    std::size_t start = 0;
    if (auto eq = line.find('='); eq != std::string_view::npos && eq + 1 < line.size() && line[eq + 1] != '=')
        start = eq + 1;
    for (std::size_t i = start; i < line.size(); ++i) {
        const char c = line[i];
        if (!std::isdigit(static_cast<unsigned char>(c))) continue;
        if (i > 0 && (ident_char(line[i - 1]) || line[i - 1] == '.')) {
            // Inside an identifier or after a decimal point; skip the run.
            while (i + 1 < line.size() && (ident_char(line[i + 1]) || line[i + 1] == '.')) ++i;
            continue;
        }
        std::string literal(line.substr(i));
        char* end = nullptr;
        double v = std::strtod(literal.c_str(), &end);
        if (!std::isfinite(v)) return 1.0;
        std::size_t k = i;
        while (k > start && line[k - 1] == ' ') --k;
        if (k > start && line[k - 1] == '-') {
            std::size_t m = k - 1;
            while (m > start && line[m - 1] == ' ') --m;
            if (m == start || std::string_view("=(*,+-/").find(line[m - 1]) != std::string_view::npos) v = -v;
        }
        return v;
    }
    return 1.0;
}

RewardCandidate parse_candidate(std::string_view source, const WorldModel& world, std::string id,
                                int iteration, int sample_index) {
    RewardCandidate c;
    c.id = std::move(id);
    c.iteration = iteration;
    c.sample_index = sample_index;
    c.lines = logical_lines(source);
    if (c.lines.empty()) throw ParseError("empty reward");

    std::vector<bool> referenced(world.catalog().size(), false);
    std::set<std::string> unknown;
    for (const auto& line : c.lines) {
        std::vector<std::string> operands;
        for (const auto& tok : identifier_tokens(line)) {
            auto idx = world.index_of(tok);
            if (!idx) continue;
            referenced[*idx] = true;
            if (std::find(operands.begin(), operands.end(), tok) == operands.end()) operands.push_back(tok);
        }
        if (is_signature(line)) {
            for (const auto& p : signature_parameters(line))
                if (!world.has_state(p)) unknown.insert(p);
            continue;
        }
        if (!operands.empty())
            c.ros_op.push_back(OpTerm{infer_op_kind(line), std::move(operands), leading_weight(line)});
    }
    for (std::size_t i = 0; i < referenced.size(); ++i)
        if (referenced[i]) c.ros_st.push_back(world.catalog()[i].name);
    if (c.ros_st.empty()) throw ParseError("no observed states");

    // A reward whose only references sit in its signature still reads them.
    if (c.ros_op.empty()) c.ros_op.push_back(OpTerm{OpKind::WeightedSum, c.ros_st, 1.0});
    c.unknown_refs.assign(unknown.begin(), unknown.end());
    return c;
}

std::string render_source(const RewardCandidate& candidate) {
    std::string out;
    for (std::size_t i = 0; i < candidate.lines.size(); ++i) {
        if (i) out += '\n';
        out += candidate.lines[i];
    }
    return out;
}

std::string truncate(const RewardCandidate& candidate) {
    if (candidate.lines.empty()) throw ContractViolation("truncate: candidate has no logical lines");
    if (candidate.lines.size() == 1) return candidate.lines.front();
    return candidate.lines.front() + "\n" + std::string(kTruncationMarker) + "\n" + candidate.lines.back();
}

RewardProjection project(const RewardCandidate& candidate, Mode mode) {
    RewardProjection p;
    p.mode = mode;
    p.text = mode == Mode::StateSelection ? truncate(candidate) : render_source(candidate);
    p.member_names = candidate.ros_st;
    return p;
}

std::size_t content_line_count(std::string_view text) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!trim(line).empty() && line != kTruncationMarker) ++count;
        pos = nl + 1;
    }
    return count;
}

} // namespace rosevo
