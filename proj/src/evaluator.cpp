#include "rosevo/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"

namespace rosevo {

void EvaluationRecord::validate() const {
    if (!executed) {
        if (success != 0.0 || !trajectory.empty() || !failure_cause)
            throw ContractViolation("record " + candidate_id +
                                    ": a failed run needs success 0, no trajectory and a cause");
        return;
    }
    if (trajectory.empty()) throw ContractViolation("record " + candidate_id + ": executed run without trajectory");
    if (!(success >= 0.0 && success <= 1.0))
        throw ContractViolation("record " + candidate_id + ": success outside [0, 1]");
    if (success != *std::max_element(trajectory.begin(), trajectory.end()))
        throw ContractViolation("record " + candidate_id + ": success differs from the trajectory maximum");
}

EvaluationRecord EvaluationRecord::failure(std::string candidate_id, std::string cause, std::uint64_t seed) {
    EvaluationRecord r;
    r.candidate_id = std::move(candidate_id);
    r.failure_cause = std::move(cause);
    r.seed = seed;
    return r;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& x : sa) inter += sb.count(x);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double op_match(const std::vector<OpTerm>& terms, const SyntheticTask& task) {
    if (task.truth_subset.empty()) return 0.0;
    std::size_t covered = 0;
    for (const auto& name : task.truth_subset) {
        const OpKind ideal = task.truth_ops.at(name);
        const bool hit = std::any_of(terms.begin(), terms.end(), [&](const OpTerm& t) {
            return t.kind == ideal && std::find(t.operands.begin(), t.operands.end(), name) != t.operands.end();
        });
        covered += hit ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(task.truth_subset.size());
}

double surrogate_base(const RewardCandidate& candidate, const SyntheticTask& task, std::size_t catalog_size,
                      const SurrogateCoefficients& coeffs) {
    const std::set<std::string> truth(task.truth_subset.begin(), task.truth_subset.end());
    std::size_t irrelevant = 0;
    for (const auto& s : candidate.ros_st) irrelevant += truth.count(s) ? 0 : 1;
    return coeffs.relevance * jaccard(candidate.ros_st, task.truth_subset) -
           coeffs.irrelevance * static_cast<double>(irrelevant) / static_cast<double>(catalog_size) +
           coeffs.operation * op_match(candidate.ros_op, task);
}

EvaluationRecord surrogate_evaluate(const RewardCandidate& candidate, const SyntheticTask& task,
                                    const WorldModel& world, std::uint64_t seed, const SurrogateCoefficients& coeffs) {
    if (!candidate.unknown_refs.empty())
        return EvaluationRecord::failure(candidate.id, "unknown state reference: " + candidate.unknown_refs.front(),
                                         seed);
    for (const auto& s : candidate.ros_st)
        if (!world.has_state(s)) return EvaluationRecord::failure(candidate.id, "unknown state reference: " + s, seed);

    // Per-candidate stream so results do not depend on evaluation order.
    Rng rng(derive_seed(seed, candidate.id));
    if (rng.uniform() < task.exec_failure_rate)
        return EvaluationRecord::failure(candidate.id, "training run crashed", seed);

    const double base = surrogate_base(candidate, task, world.catalog().size(), coeffs);
    const double noise = rng.normal() * task.noise_scale;
    const double success = std::clamp(base + noise, 0.0, 1.0);

    std::array<double, kTrajectoryCheckpoints> fraction{};
    for (std::size_t i = 0; i < fraction.size(); ++i) {
        const double nominal = static_cast<double>(i + 1) / static_cast<double>(fraction.size());
        fraction[i] = std::clamp(nominal + 0.05 * (rng.uniform() - 0.5), 0.0, 1.0);
    }
    std::sort(fraction.begin(), fraction.end());
    fraction.back() = 1.0;

    EvaluationRecord r;
    r.candidate_id = candidate.id;
    r.executed = true;
    r.seed = seed;
    r.trajectory.reserve(fraction.size());
    for (double f : fraction) r.trajectory.push_back(success * f);
    r.success = success;
    return r;
}

SurrogateEvaluator::SurrogateEvaluator(WorldModel world, SyntheticTask task, SurrogateCoefficients coeffs)
    : world_(std::move(world)), task_(std::move(task)), coeffs_(coeffs) {
    validate_synthetic_task(world_, task_);
}

EvaluationRecord SurrogateEvaluator::evaluate(const RewardCandidate& candidate, const TaskDef& task,
                                              std::uint64_t seed) {
    if (task.id != task_.task.id)
        throw ArgumentError("surrogate evaluator bound to task '" + task_.task.id + "' was asked about '" + task.id +
                            "'");
    return surrogate_evaluate(candidate, task_, world_, seed, coeffs_);
}

ExternalTrainerEvaluator::ExternalTrainerEvaluator(std::string command) : command_(std::move(command)) {
    if (command_.empty())
        throw ConfigError("external evaluator selected but no trainer command configured (--trainer-cmd)");
}

EvaluationRecord ExternalTrainerEvaluator::evaluate(const RewardCandidate& candidate, const TaskDef& task,
                                                    std::uint64_t seed) {
    namespace fs = std::filesystem;
    const fs::path source = fs::temp_directory_path() /
                            ("rosevo-" + task.id + "-" + candidate.id + "-" + std::to_string(seed) + ".py");
    {
        std::ofstream out(source);
        out << render_source(candidate) << '\n';
    }
    const std::string cmd = command_ + " '" + source.string() + "' " + std::to_string(seed);
    std::string output;
    int status = -1;
    if (FILE* pipe = ::popen(cmd.c_str(), "r")) {
        std::array<char, 4096> buf{};
        while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
        status = ::pclose(pipe);
    }
    std::error_code ec;
    fs::remove(source, ec);
    if (status != 0)
        return EvaluationRecord::failure(candidate.id, "trainer exited with status " + std::to_string(status), seed);

    try {
        const auto j = nlohmann::json::parse(output);
        EvaluationRecord r;
        r.candidate_id = candidate.id;
        r.seed = seed;
        r.executed = j.value("executed", false);
        if (!r.executed) {
            r.failure_cause = j.contains("failure_cause") && j["failure_cause"].is_string()
                                  ? j["failure_cause"].get<std::string>()
                                  : std::string("trainer reported failure");
            return r;
        }
        r.trajectory = j.at("trajectory").get<std::vector<double>>();
        if (r.trajectory.empty()) r.trajectory.push_back(j.value("success", 0.0));
        for (double& v : r.trajectory) v = std::clamp(v, 0.0, 1.0);
        r.success = *std::max_element(r.trajectory.begin(), r.trajectory.end());
        return r;
    } catch (const std::exception& e) {
        return EvaluationRecord::failure(candidate.id, std::string("unreadable trainer output: ") + e.what(), seed);
    }
}

std::vector<EvaluationRecord> evaluate_final(const RewardCandidate& candidate, const TaskDef& task,
                                             EvaluatorPort& evaluator, int runs, std::uint64_t base_seed) {
    if (runs < 1) throw ArgumentError("evaluate_final needs runs >= 1");
    std::vector<EvaluationRecord> out;
    out.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < runs; ++i)
        out.push_back(evaluator.evaluate(candidate, task, base_seed + static_cast<std::uint64_t>(i)));
    return out;
}

} // namespace rosevo
