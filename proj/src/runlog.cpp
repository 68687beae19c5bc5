#include "rosevo/runlog.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rosevo/error.hpp"
#include "rosevo/evolution.hpp"
#include "rosevo/guidance.hpp"
#include "rosevo/settable.hpp"

namespace rosevo {

using nlohmann::json;

void RunLog::append(json event) {
    event["seq"] = events_.size();
    events_.push_back(std::move(event));
}

std::vector<const json*> RunLog::of_type(std::string_view type) const {
    std::vector<const json*> out;
    for (const auto& e : events_)
        if (e.value("event", "") == type) out.push_back(&e);
    return out;
}

std::string RunLog::to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
        out += e.dump();
        out += '\n';
    }
    return out;
}

void RunLog::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RunError("cannot write run log " + path.string());
    out << to_jsonl();
}

RunLog RunLog::parse(std::string_view text) {
    RunLog log;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw LogFormatError("run log line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("event") || !j.at("event").is_string())
            throw LogFormatError("run log line " + std::to_string(line_no) + ": missing event type");
        if (!j.contains("seq") || j.at("seq") != log.events_.size())
            throw LogFormatError("run log line " + std::to_string(line_no) + ": out-of-order sequence number");
        log.events_.push_back(std::move(j));
    }
    return log;
}

RunLog RunLog::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LogFormatError("cannot open run log " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

json record_to_json(const EvaluationRecord& r) {
    json j = {{"candidate_id", r.candidate_id},
              {"executed", r.executed},
              {"success", r.success},
              {"trajectory", r.trajectory},
              {"seed", r.seed}};
    j["failure_cause"] = r.failure_cause ? json(*r.failure_cause) : json(nullptr);
    return j;
}

EvaluationRecord record_from_json(const json& j) {
    EvaluationRecord r;
    r.candidate_id = j.at("candidate_id").get<std::string>();
    r.executed = j.at("executed").get<bool>();
    r.success = j.at("success").get<double>();
    r.trajectory = j.at("trajectory").get<std::vector<double>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("failure_cause") && j.at("failure_cause").is_string())
        r.failure_cause = j.at("failure_cause").get<std::string>();
    return r;
}

json candidate_to_json(const RewardCandidate& c) {
    json ops = json::array();
    for (const auto& t : c.ros_op)
        ops.push_back({{"kind", std::string(to_string(t.kind))}, {"operands", t.operands}, {"weight", t.weight}});
    return {{"id", c.id},     {"iteration", c.iteration}, {"sample_index", c.sample_index}, {"lines", c.lines},
            {"ros_st", c.ros_st}, {"ros_op", ops},         {"unknown_refs", c.unknown_refs}};
}

RewardCandidate candidate_from_json(const json& j) {
    RewardCandidate c;
    c.id = j.at("id").get<std::string>();
    c.iteration = j.at("iteration").get<int>();
    c.sample_index = j.at("sample_index").get<int>();
    c.lines = j.at("lines").get<std::vector<std::string>>();
    c.ros_st = j.at("ros_st").get<std::vector<std::string>>();
    for (const auto& t : j.at("ros_op")) {
        auto kind = op_kind_from_string(t.at("kind").get<std::string>());
        if (!kind) throw LogFormatError("unknown operation kind in logged candidate " + c.id);
        c.ros_op.push_back(OpTerm{*kind, t.at("operands").get<std::vector<std::string>>(), t.at("weight").get<double>()});
    }
    c.unknown_refs = j.at("unknown_refs").get<std::vector<std::string>>();
    return c;
}

json MetricsReport::to_json() const {
    return {{"task_id", task_id}, {"variant", variant},       {"esr_avg", esr_avg}, {"esr_list", esr_list},
            {"ssd", ssd},         {"iterations", iterations}, {"seed", seed}};
}

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport m;
    m.task_id = j.at("task_id").get<std::string>();
    m.variant = j.at("variant").get<std::string>();
    m.esr_avg = j.at("esr_avg").get<double>();
    m.esr_list = j.at("esr_list").get<std::vector<double>>();
    m.ssd = j.at("ssd").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
}

namespace {

constexpr double kTol = 1e-9;

bool close(double a, double b) { return std::fabs(a - b) <= kTol; }

struct LoggedSample {
    int attempt = 0;
    int sample_index = 0;
    std::optional<RewardCandidate> candidate;
    EvaluationRecord record;
};

} // namespace

ReplayReport replay(const RunLog& log) {
    ReplayReport rep;
    rep.events = log.events().size();
    auto fail = [&](const json& e, const std::string& what) {
        rep.mismatches.push_back("event " + std::to_string(e.value("seq", 0)) + " (" + e.value("event", "?") +
                                 "): " + what);
    };

    const json* start = nullptr;
    std::vector<std::string> catalog;
    bool use_set = true;
    bool schedule = true;
    int K0 = 0;
    double tau = 0.0;
    std::optional<StateExecutionTable> table;
    UsageHistory usage;

    std::map<int, std::vector<LoggedSample>> by_iteration;
    std::optional<std::pair<std::string, double>> prev_best; // id, success
    std::vector<std::pair<std::string, double>> iteration_bests;
    std::vector<double> recomputed_esr;

    for (const auto& e : log.events()) {
        const std::string type = e.value("event", "");
        const std::size_t before = rep.mismatches.size();
        try {
            if (type == event::kRunStart) {
                start = &e;
                catalog = e.at("catalog").get<std::vector<std::string>>();
                use_set = e.at("use_set").get<bool>();
                schedule = e.at("use_dr_schedule").get<bool>();
                K0 = e.at("K0").get<int>();
                table.emplace(catalog);
            } else if (type == event::kMission) {
                for (const char* key : {"composition", "goal_states", "initial_conditions", "post_goal_states"})
                    if (e.at(key).get<std::string>().empty()) fail(e, std::string("empty mission section ") + key);
            } else if (type == event::kCalibration) {
                tau = e.at("tau").get<double>();
                if (e.at("adaptive").get<bool>()) {
                    std::vector<double> used;
                    for (const auto& p : e.at("pilots")) {
                        const auto rec = record_from_json(p.at("record"));
                        rec.validate();
                        if (rec.executed && static_cast<int>(used.size()) < K0) used.push_back(rec.success);
                    }
                    if (static_cast<int>(used.size()) != K0) {
                        fail(e, "fewer than K0 executed pilots");
                    } else {
                        double sum = 0.0;
                        for (double v : used) sum += v;
                        if (!close(sum / static_cast<double>(used.size()), tau)) fail(e, "tau differs from pilot mean");
                    }
                } else if (!close(tau, e.at("fixed_value").get<double>())) {
                    fail(e, "fixed tau differs from policy value");
                }
            } else if (type == event::kBundle) {
                const int n = e.at("iteration").get<int>();
                const Mode mode = mode_from_string(e.at("mode").get<std::string>());
                const json& example = e.at("example_id");
                if (n == 1) {
                    if (!example.is_null()) fail(e, "iteration 1 bundle carries an example");
                    if (mode != Mode::StateSelection) fail(e, "iteration 1 must use state selection");
                } else {
                    if (!prev_best) {
                        fail(e, "no previous best available");
                    } else {
                        if (example.is_null() || example.get<std::string>() != prev_best->first)
                            fail(e, "example is not the previous best");
                        const Mode expected =
                            schedule ? select_mode(n, prev_best->second, tau) : Mode::StateSelection;
                        if (mode != expected) fail(e, "mode differs from schedule");
                    }
                }
                if (e.at("has_table").get<bool>() != use_set) fail(e, "table presence differs from variant");
            } else if (type == event::kCandidate) {
                LoggedSample s;
                s.attempt = e.at("attempt").get<int>();
                s.sample_index = e.at("sample_index").get<int>();
                if (!e.at("candidate").is_null()) s.candidate = candidate_from_json(e.at("candidate"));
                s.record = record_from_json(e.at("record"));
                s.record.validate();
                if (!s.candidate && s.record.executed) fail(e, "unparsed sample marked executed");
                if (s.candidate) usage.add(*s.candidate);
                by_iteration[e.at("iteration").get<int>()].push_back(std::move(s));
            } else if (type == event::kSelection) {
                const int n = e.at("iteration").get<int>();
                const auto& samples = by_iteration[n];
                int last_attempt = 0;
                for (const auto& s : samples) last_attempt = std::max(last_attempt, s.attempt);
                const LoggedSample* best = nullptr;
                for (const auto& s : samples) {
                    if (s.attempt != last_attempt || !s.record.executed) continue;
                    if (!best || s.record.success > best->record.success ||
                        (s.record.success == best->record.success && s.sample_index < best->sample_index))
                        best = &s;
                }
                const bool barren = best == nullptr;
                if (barren != e.at("barren").get<bool>()) fail(e, "barren flag differs");
                if (best) prev_best = {best->candidate->id, best->record.success};
                if (!prev_best) {
                    fail(e, "no best available");
                } else {
                    if (e.at("best_id").get<std::string>() != prev_best->first) fail(e, "best candidate differs");
                    if (!close(e.at("best_success").get<double>(), prev_best->second)) fail(e, "best success differs");
                    iteration_bests.push_back(*prev_best);
                    rep.best_success_curve.push_back(prev_best->second);
                }
            } else if (type == event::kSetSnapshot) {
                const int n = e.at("iteration").get<int>();
                if (use_set && table) {
                    std::vector<EvaluatedCandidate> results;
                    for (const auto& s : by_iteration[n])
                        if (s.candidate) results.push_back({*s.candidate, s.record});
                    table = table->accumulate(results);
                }
                const auto& rows = e.at("rows");
                if (!table || rows.size() != table->rows().size()) {
                    fail(e, "row count differs");
                } else {
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        const auto& want = table->rows()[i];
                        if (rows[i].at(0).get<std::string>() != want.name ||
                            rows[i].at(1).get<std::int64_t>() != want.usage_count ||
                            !close(rows[i].at(2).get<double>(), want.contribution)) {
                            fail(e, "row '" + want.name + "' differs from recomputed table");
                            break;
                        }
                    }
                }
            } else if (type == event::kFinal) {
                std::vector<double> successes;
                for (const auto& b : iteration_bests) successes.push_back(b.second);
                if (successes.empty()) {
                    fail(e, "no iteration bests");
                } else {
                    const auto& chosen = iteration_bests[select_overall(successes)];
                    if (e.at("best_id").get<std::string>() != chosen.first) fail(e, "overall best differs");
                    if (!close(e.at("design_success").get<double>(), chosen.second))
                        fail(e, "design-time success differs");
                }
                recomputed_esr.clear();
                for (const auto& r : e.at("records")) {
                    const auto rec = record_from_json(r);
                    rec.validate();
                    recomputed_esr.push_back(esr(rec));
                }
                const auto stored = e.at("esr_list").get<std::vector<double>>();
                if (stored.size() != recomputed_esr.size()) {
                    fail(e, "esr list length differs");
                } else {
                    for (std::size_t i = 0; i < stored.size(); ++i)
                        if (!close(stored[i], recomputed_esr[i])) fail(e, "esr value differs");
                }
            } else if (type == event::kMetrics) {
                const auto stored = MetricsReport::from_json(e);
                MetricsReport m;
                if (start) {
                    m.task_id = start->at("task_id").get<std::string>();
                    m.variant = start->at("variant").get<std::string>();
                    m.seed = start->at("seed").get<std::uint64_t>();
                }
                m.esr_list = recomputed_esr;
                m.esr_avg = 0.0;
                for (double v : recomputed_esr) m.esr_avg += v;
                if (!recomputed_esr.empty()) m.esr_avg /= static_cast<double>(recomputed_esr.size());
                m.ssd = catalog.empty() ? 0.0 : ssd(usage, catalog);
                m.iterations = static_cast<int>(iteration_bests.size());
                if (m.task_id != stored.task_id || m.variant != stored.variant || m.seed != stored.seed)
                    fail(e, "run identity differs");
                if (!close(m.esr_avg, stored.esr_avg)) fail(e, "esr_avg differs");
                if (!close(m.ssd, stored.ssd)) fail(e, "ssd differs");
                if (m.iterations != stored.iterations) fail(e, "iteration count differs");
                if (m.esr_list.size() != stored.esr_list.size()) fail(e, "esr list length differs");
                rep.recomputed = m;
                rep.stored = stored;
            } else if (type == event::kRunError) {
                // Terminal marker of a partial log; nothing to recompute.
            } else {
                fail(e, "unknown event type");
            }
        } catch (const Error& ex) {
            fail(e, ex.what());
        } catch (const json::exception& ex) {
            fail(e, std::string("malformed event: ") + ex.what());
        }
        if (rep.mismatches.size() == before) ++rep.verified_events;
    }
    return rep;
}

} // namespace rosevo
