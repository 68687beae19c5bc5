#include "rosevo/designer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"

namespace rosevo {

namespace {

std::string weight_literal(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", std::fabs(w));
    return (w < 0 ? "-" : "") + std::string(buf);
}

std::string term_expression(const OpTerm& term) {
    const auto& ops = term.operands;
    std::string joined;
    for (std::size_t i = 0; i < ops.size(); ++i) joined += (i ? " - " : "") + ops[i];
    const std::string arg = ops.size() == 1 ? ops.front() : "(" + joined + ")";
    switch (term.kind) {
    case OpKind::DistancePenalty: return "norm(" + arg + ")";
    case OpKind::ExponentialShaping: return "exp(-norm(" + arg + "))";
    case OpKind::ThresholdBonus: return "where(" + arg + " > 0.5, 1.0, 0.0)";
    case OpKind::VelocityPenalty: return "square(" + arg + ").sum()";
    case OpKind::DotProductAlignment:
        return ops.size() >= 2 ? "dot(" + ops[0] + ", " + ops[1] + ")" : "dot(" + arg + ", " + arg + "_target)";
    case OpKind::WeightedSum: return arg + ".mean()";
    }
    return arg;
}

double signed_weight(OpKind kind, double magnitude) {
    return (kind == OpKind::DistancePenalty || kind == OpKind::VelocityPenalty) ? -magnitude : magnitude;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

constexpr const char* kBuiltinDesignerPrompt =
    "You are a reward engineer writing reward functions for reinforcement learning.\n"
    "Each reward reads a subset of the environment states listed below and combines them with\n"
    "simple operations (distance penalties, exponential shaping, threshold bonuses, velocity\n"
    "penalties, dot-product alignment, weighted sums).\n"
    "Write each reward as a fenced code block. The first line must be\n"
    "`def compute_reward(<state names>):` listing exactly the states the reward reads, and the\n"
    "last line must return the reward. Use `#` for comments and a trailing `\\` to continue a line.\n";

} // namespace

void SamplerConfig::validate() const {
    if (!(temperature > 0.0)) throw ArgumentError("sampler temperature must be > 0");
    if (!(invalid_rate >= 0.0 && invalid_rate <= 1.0)) throw ArgumentError("invalid_rate must lie in [0, 1]");
    if (member_min < 1 || member_min > member_max)
        throw ArgumentError("member count range must satisfy 1 <= min <= max");
    if (!std::isfinite(contribution_weight) || !std::isfinite(usage_weight))
        throw ArgumentError("sampler weights must be finite");
}

double StateDistribution::probability(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return probabilities[i];
    return 0.0;
}

StateDistribution score_states(const StateExecutionTable& table, const SamplerConfig& config,
                               const std::vector<std::string>& halved) {
    StateDistribution d;
    std::vector<double> scores;
    for (const auto& row : table.rows()) {
        d.names.push_back(row.name);
        double score = config.contribution_weight * row.contribution -
                       config.usage_weight * static_cast<double>(row.usage_count);
        if (std::find(halved.begin(), halved.end(), row.name) != halved.end()) score *= 0.5;
        scores.push_back(score / config.temperature);
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double& s : scores) {
        // Clamp so every state keeps a (tiny) positive probability.
        s = std::exp(std::max(s - top, -700.0));
        total += s;
    }
    for (double s : scores) d.probabilities.push_back(s / total);
    return d;
}

StateExecutionTable parse_table_text(std::string_view text, const WorldModel& world) {
    std::vector<SetRow> rows;
    for (const auto& s : world.catalog()) rows.push_back({s.name, 0, 0.0});

    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        auto bar1 = line.find('|');
        if (bar1 == std::string_view::npos) continue;
        auto bar2 = line.find('|', bar1 + 1);
        if (bar2 == std::string_view::npos) continue;
        const std::string name = trim(line.substr(0, bar1));
        auto idx = world.index_of(name);
        if (!idx) continue;
        try {
            rows[*idx].usage_count = std::stoll(trim(line.substr(bar1 + 1, bar2 - bar1 - 1)));
            rows[*idx].contribution = std::stod(trim(line.substr(bar2 + 1)));
        } catch (const std::exception&) {
            // Unreadable row: treat as unused.
        }
    }
    return StateExecutionTable::from_rows(std::move(rows));
}

std::string render_synthetic_reward(const std::vector<std::string>& members, const std::vector<OpTerm>& terms,
                                    const std::vector<std::string>& bogus_members) {
    std::ostringstream os;
    os << "def compute_reward(";
    bool first = true;
    for (const auto& m : members) {
        os << (first ? "" : ", ") << m;
        first = false;
    }
    for (const auto& b : bogus_members) {
        os << (first ? "" : ", ") << b;
        first = false;
    }
    os << "):\n";
    std::size_t i = 0;
    for (; i < terms.size(); ++i)
        os << "    r_" << i << " = " << weight_literal(terms[i].weight) << " * " << term_expression(terms[i]) << '\n';
    for (const auto& b : bogus_members) os << "    r_" << i++ << " = 0.50 * " << b << ".mean()\n";
    os << "    reward = ";
    for (std::size_t k = 0; k < i; ++k) os << (k ? " + " : "") << "r_" << k;
    if (i == 0) os << "0.0";
    os << "\n    return reward\n";
    return os.str();
}

SyntheticDesigner::SyntheticDesigner(WorldModel world, SamplerConfig config)
    : world_(std::move(world)), config_(config) {
    config_.validate();
}

std::vector<std::string> SyntheticDesigner::propose(const GuidanceBundle& bundle, int K, std::uint64_t seed) {
    if (K < 1) throw ArgumentError("designer asked for K < 1 samples");
    const auto& catalog = world_.catalog();
    const StateExecutionTable table = bundle.table_text.empty() ? new_table(catalog)
                                                                : parse_table_text(bundle.table_text, world_);
    const bool refine = bundle.example && bundle.mode == Mode::OperationRefinement;
    std::vector<std::string> halved;
    if (bundle.example && !refine) halved = bundle.example->member_names;
    const std::vector<double> base_weights = score_states(table, config_, halved).probabilities;

    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));

        std::vector<std::size_t> chosen;
        if (refine) {
            for (const auto& m : bundle.example->member_names)
                if (auto idx = world_.index_of(m)) chosen.push_back(*idx);
        }
        if (chosen.empty()) {
            const int hi = std::min<int>(config_.member_max, static_cast<int>(catalog.size()));
            const int lo = std::min(config_.member_min, hi);
            const auto count = static_cast<std::size_t>(rng.uniform_int(lo, hi));
            std::vector<double> w = base_weights;
            for (std::size_t draw = 0; draw < count; ++draw) {
                const double total = std::accumulate(w.begin(), w.end(), 0.0);
                double u = rng.uniform() * total;
                std::size_t pick = w.size();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    if (w[i] <= 0.0) continue;
                    pick = i;
                    if (u < w[i]) break;
                    u -= w[i];
                }
                if (pick == w.size()) break;
                chosen.push_back(pick);
                w[pick] = 0.0;
            }
        }
        std::sort(chosen.begin(), chosen.end());

        std::vector<std::string> members;
        std::vector<OpTerm> terms;
        for (auto idx : chosen) {
            members.push_back(catalog[idx].name);
            const OpKind kind = kAllOpKinds[rng.uniform_int(0, std::size(kAllOpKinds) - 1)];
            const double magnitude = static_cast<double>(rng.uniform_int(10, 100)) / 100.0;
            terms.push_back(OpTerm{kind, {catalog[idx].name}, signed_weight(kind, magnitude)});
        }
        std::vector<std::string> bogus;
        if (config_.invalid_rate > 0.0 && rng.bernoulli(config_.invalid_rate))
            bogus.push_back("phantom_state_" + std::to_string(k));
        texts.push_back(render_synthetic_reward(members, terms, bogus));
    }
    return texts;
}

std::string designer_system_prompt() {
    std::ifstream in(std::string(ROSEVO_PROMPT_DIR) + "/designer_system.txt");
    if (!in) return kBuiltinDesignerPrompt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

LlmDesigner::LlmDesigner(WorldModel world, std::shared_ptr<ChatClient> client)
    : world_(std::move(world)), client_(std::move(client)) {}

std::vector<ChatMessage> LlmDesigner::messages(const GuidanceBundle& bundle) const {
    std::ostringstream sys;
    sys << designer_system_prompt() << "\nAvailable states:\n";
    for (const auto& s : world_.catalog())
        sys << "- " << s.name << " (" << to_string(s.kind) << ", " << s.arity << ")\n";
    return {{"system", sys.str()}, {"user", render_bundle(bundle)}};
}

std::vector<std::string> LlmDesigner::propose(const GuidanceBundle& bundle, int K, std::uint64_t /*seed*/) {
    if (K < 1) throw ArgumentError("designer asked for K < 1 samples");
    const auto msgs = messages(bundle);
    std::vector<std::string> completions;
    try {
        completions = client_->complete(msgs, K);
        // Endpoints without multi-sample support answer with a single choice.
        for (int extra = 0; static_cast<int>(completions.size()) < K && extra < K; ++extra) {
            auto more = client_->complete(msgs, 1);
            if (more.empty()) break;
            completions.push_back(std::move(more.front()));
        }
    } catch (const TransportError& e) {
        throw DesignerError(std::string("reward designer request failed: ") + e.what());
    }
    if (static_cast<int>(completions.size()) > K) completions.resize(static_cast<std::size_t>(K));

    std::vector<std::string> texts;
    for (const auto& c : completions) {
        auto blocks = extract_code_blocks(c);
        if (!blocks.empty()) texts.push_back(std::move(blocks.front()));
    }
    if (texts.empty()) throw DesignerError("reward designer returned no fenced code blocks");
    return texts;
}

std::string LlmReconciler::reconcile(const ReconcileRequest& request) {
    const std::vector<ChatMessage> msgs{
        {"system", "You restate robot task descriptions in a fixed four-section template."},
        {"user", render_reconcile_prompt(request)}};
    std::vector<std::string> texts;
    try {
        texts = client_->complete(msgs, 1);
    } catch (const TransportError& e) {
        throw ReconciliationError(std::string("reconciler request failed: ") + e.what());
    }
    if (texts.empty()) throw ReconciliationError("reconciler returned no completion");
    return texts.front();
}

} // namespace rosevo
