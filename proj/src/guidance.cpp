#include "rosevo/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "rosevo/error.hpp"

namespace rosevo {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string join(const std::vector<std::string>& items, std::string_view glue) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += glue;
        out += items[i];
    }
    return out;
}

std::vector<std::string> lower_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

} // namespace

Mode select_mode(int n, double prev_success, double tau) {
    if (n % 2 != 0 || prev_success < tau) return Mode::StateSelection;
    return Mode::OperationRefinement;
}

std::vector<double> downsample(std::span<const double> values, std::size_t max_points) {
    if (values.size() <= max_points || max_points == 0) return {values.begin(), values.end()};
    if (max_points == 1) return {values.back()};
    std::vector<double> out;
    out.reserve(max_points);
    const double step = static_cast<double>(values.size() - 1) / static_cast<double>(max_points - 1);
    for (std::size_t i = 0; i < max_points; ++i) {
        auto idx = static_cast<std::size_t>(std::llround(step * static_cast<double>(i)));
        out.push_back(values[std::min(idx, values.size() - 1)]);
    }
    return out;
}

FeedbackSummary build_feedback(const EvaluationRecord& record) {
    FeedbackSummary f;
    f.executed = record.executed;
    if (!record.executed) {
        f.success = 0.0;
        f.failure_cause = record.failure_cause.value_or("execution failed");
        return f;
    }
    f.success = record.trajectory.empty() ? record.success
                                          : *std::max_element(record.trajectory.begin(), record.trajectory.end());
    f.trajectory = downsample(record.trajectory, FeedbackSummary::kMaxCheckpoints);
    return f;
}

// -- mission -----------------------------------------------------------------

std::string render_mission(const ReconciledMission& m) {
    std::ostringstream os;
    os << kHeaderComposition << '\n' << m.composition << "\n\n";
    os << kHeaderGoalStates << '\n' << m.goal_states << "\n\n";
    os << kHeaderInitialConditions << '\n' << m.initial_conditions << "\n\n";
    os << kHeaderPostGoalStates << '\n' << m.post_goal_states << '\n';
    if (m.generated_success) os << '\n' << kHeaderSuccessFunction << '\n' << m.generated_success->to_json().dump() << '\n';
    return os.str();
}

ReconciledMission parse_mission(std::string_view text, const WorldModel& world) {
    static constexpr std::string_view headers[] = {kHeaderComposition, kHeaderGoalStates,
                                                   kHeaderInitialConditions, kHeaderPostGoalStates,
                                                   kHeaderSuccessFunction};
    std::map<std::string_view, std::string> sections;
    std::string_view current;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        auto hit = std::find(std::begin(headers), std::end(headers), line);
        if (hit != std::end(headers)) {
            current = *hit;
            sections[current];
        } else if (!current.empty()) {
            auto& body = sections[current];
            if (!body.empty()) body += '\n';
            body += line;
        }
        if (nl == text.size()) break;
    }

    auto section = [&](std::string_view header) {
        auto it = sections.find(header);
        std::string body = it == sections.end() ? std::string() : trim(it->second);
        if (body.empty()) throw ReconciliationError("reconciled mission is missing section " + std::string(header));
        return body;
    };

    ReconciledMission m;
    m.composition = section(kHeaderComposition);
    m.goal_states = section(kHeaderGoalStates);
    m.initial_conditions = section(kHeaderInitialConditions);
    m.post_goal_states = section(kHeaderPostGoalStates);

    if (auto it = sections.find(kHeaderSuccessFunction); it != sections.end() && !trim(it->second).empty()) {
        std::string body = trim(it->second);
        // Tolerate a fenced block around the JSON.
        if (body.rfind("```", 0) == 0) {
            auto first_nl = body.find('\n');
            auto last_fence = body.rfind("```");
            if (first_nl != std::string::npos && last_fence > first_nl)
                body = trim(std::string_view(body).substr(first_nl + 1, last_fence - first_nl - 1));
        }
        json j;
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw ReconciliationError(std::string("success function is not valid JSON: ") + e.what());
        }
        try {
            m.generated_success = SuccessSpec::from_json(j);
        } catch (const LoadError& e) {
            throw ReconciliationError(std::string("success function is malformed: ") + e.what());
        }
        for (const auto& s : m.generated_success->referenced_states())
            if (!world.has_state(s))
                throw ValidationError("generated success function references unknown state '" + s + "'");
    }
    return m;
}

std::string render_reconcile_prompt(const ReconcileRequest& request) {
    std::ostringstream os;
    os << "Restate the task below using exactly these sections, each on its own header line:\n"
       << kHeaderComposition << " robots and objects present in the environment\n"
       << kHeaderGoalStates << " goal states for these objects\n"
       << kHeaderInitialConditions << " initial conditions\n"
       << kHeaderPostGoalStates << " potential post-goal states\n";
    if (request.wants_success_code())
        os << kHeaderSuccessFunction
           << " a JSON comparison tree over state names ({\"state\",\"op\",\"value\"} leaves,"
              " {\"all\"|\"any\": [...]} and {\"not\": ...} nodes)\n";
    os << "\nReconcile any discrepancy between the user description and the success criterion.\n";
    if (request.world) {
        os << "\nEnvironment " << request.world->id() << " exposes these states:\n";
        for (const auto& s : request.world->catalog())
            os << "- " << s.name << " (" << to_string(s.kind) << ", " << s.arity << ")\n";
    }
    os << "\nUser description:\n" << request.user_description << '\n';
    if (request.success_spec) os << "\nSuccess criterion:\n" << request.success_spec->to_text() << '\n';
    if (request.exemplar) {
        os << "\nExample for another task in the same environment:\n"
           << render_mission(request.exemplar->mission) << kHeaderSuccessFunction << '\n'
           << request.exemplar->success.to_json().dump() << '\n';
    }
    return os.str();
}

std::string SyntheticReconciler::reconcile(const ReconcileRequest& request) {
    if (!request.world) throw ArgumentError("reconcile request without a world model");
    const WorldModel& world = *request.world;

    std::map<StateKind, int> by_kind;
    for (const auto& s : world.catalog()) by_kind[s.kind] += 1;
    std::ostringstream comp;
    comp << "Environment " << world.id() << " with " << world.catalog().size() << " observable states (";
    bool first = true;
    for (auto [kind, count] : by_kind) {
        comp << (first ? "" : ", ") << count << ' ' << to_string(kind);
        first = false;
    }
    comp << ").";

    std::optional<SuccessSpec> spec = request.success_spec;
    if (!spec) {
        // Ground the criterion on states named in the description, else reuse
        // the exemplar's criterion, which is defined on the same environment.
        const auto words = lower_words(request.user_description);
        SuccessNode all{SuccessNode::Type::All, {}, Comparator::Greater, 0.0, {}};
        for (const auto& s : world.catalog()) {
            auto stem_words = lower_words(s.name);
            bool named = std::any_of(stem_words.begin(), stem_words.end(), [&](const std::string& w) {
                return w.size() > 3 && std::find(words.begin(), words.end(), w) != words.end();
            });
            if (named) all.children.push_back({SuccessNode::Type::Compare, s.name, Comparator::Greater, 0.5, {}});
        }
        if (!all.children.empty())
            spec = SuccessSpec{std::move(all)};
        else if (request.exemplar)
            spec = request.exemplar->success;
    }

    ReconciledMission m;
    m.composition = comp.str();
    m.goal_states = "Task: " + request.user_description +
                    (spec ? "\nThe goal is reached when " + spec->to_text() + "." : std::string());
    m.initial_conditions = "Episodes start from the environment reset distribution with the goal not yet met.";
    m.post_goal_states = spec ? "After reaching the goal the condition " + spec->to_text() + " should keep holding."
                              : "After reaching the goal the configuration should remain stable.";
    if (request.wants_success_code()) m.generated_success = spec;
    return render_mission(m);
}

ReconciledMission reconcile_mission(const std::string& user_description,
                                    const std::optional<SuccessSpec>& success_spec, const WorldModel& world,
                                    const std::optional<MissionExemplar>& exemplar, ReconcilerPort& reconciler) {
    if (user_description.empty()) throw ArgumentError("reconcile_mission: empty task description");
    if (!success_spec && !exemplar)
        throw ArgumentError("reconcile_mission: a task without a success criterion needs an exemplar");

    const ReconcileRequest request{user_description, success_spec, &world, exemplar};
    for (int attempt = 0;; ++attempt) {
        try {
            ReconciledMission m = parse_mission(reconciler.reconcile(request), world);
            if (request.wants_success_code() && !m.generated_success)
                throw ReconciliationError("reconciled mission is missing section " +
                                          std::string(kHeaderSuccessFunction));
            if (!request.wants_success_code()) m.generated_success.reset();
            return m;
        } catch (const ReconciliationError&) {
            if (attempt >= 1) throw;
        }
    }
}

ReconciledMission raw_mission(const std::string& user_description) {
    ReconciledMission m;
    m.composition = user_description;
    m.goal_states = "(not reconciled)";
    m.initial_conditions = "(not reconciled)";
    m.post_goal_states = "(not reconciled)";
    return m;
}

// -- bundle ------------------------------------------------------------------

GuidanceBundle assemble_bundle(int n, const std::optional<EvaluatedCandidate>& best_prev,
                               const StateExecutionTable& table, const ReconciledMission& mission, double tau,
                               BundleOptions options) {
    if (n < 1) throw ArgumentError("assemble_bundle: iteration index must be >= 1");
    if ((n > 1) != best_prev.has_value())
        throw ArgumentError("assemble_bundle: a previous best is required exactly when n > 1");

    GuidanceBundle b;
    b.iteration = n;
    b.mission = mission;
    b.schedule_enabled = options.use_dr_schedule;
    b.mode = Mode::StateSelection;
    if (options.use_set) b.table_text = table.render();
    if (n == 1) return b;

    const auto& prev = *best_prev;
    const FeedbackSummary feedback = build_feedback(prev.record);
    if (options.use_dr_schedule) {
        b.mode = select_mode(n, feedback.success, tau);
        b.example = project(prev.candidate, b.mode);
    } else {
        b.example = project(prev.candidate, Mode::OperationRefinement);
    }
    b.feedback = feedback;
    return b;
}

std::string render_bundle(const GuidanceBundle& b) {
    std::ostringstream os;
    os << "Iteration " << b.iteration << ".\n\nTask mission:\n" << render_mission(b.mission) << '\n';

    if (b.example) {
        const auto members = join(b.example->member_names, ", ");
        if (!b.schedule_enabled) {
            os << "Here is the best reward from the previous iteration. Write improved rewards based on it"
                  " and its training feedback.\n";
        } else if (b.mode == Mode::StateSelection) {
            os << "Select observation states that differ from the example's observed states (" << members
               << "). Prefer states with higher success contribution and fewer usages in the table.\n";
        } else {
            os << "Use the same observation members as the example (" << members
               << ") and devise novel reward items over them.\n";
        }
        os << "\nExample reward:\n```\n" << b.example->text << "\n```\n";
    } else {
        os << "Write reward functions over the available states.\n";
    }

    if (b.feedback) {
        os << "\nTraining feedback of the example: ";
        if (b.feedback->executed) {
            os << "max success " << fixed3(b.feedback->success) << "; checkpoints";
            for (double v : b.feedback->trajectory) os << ' ' << fixed3(v);
            os << '\n';
        } else {
            os << "execution failed (" << b.feedback->failure_cause.value_or("unknown") << ")\n";
        }
    }

    if (!b.table_text.empty()) os << "\nState execution table:\n" << b.table_text;

    os << "\nReturn each reward as a fenced code block whose first line is"
          " `def compute_reward(<observed states>):` and whose last line returns the reward.\n";
    return os.str();
}

} // namespace rosevo
