#include "rosevo/worldmodel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rosevo/error.hpp"
#include "rosevo/rng.hpp"

namespace rosevo {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<StateKind, std::string_view>, 7> kStateKindNames{{
    {StateKind::Position, "position"},
    {StateKind::Orientation, "orientation"},
    {StateKind::Velocity, "velocity"},
    {StateKind::Force, "force"},
    {StateKind::Distance, "distance"},
    {StateKind::Angle, "angle"},
    {StateKind::BooleanFlag, "boolean-flag"},
}};

constexpr std::array<std::pair<OpKind, std::string_view>, 6> kOpKindNames{{
    {OpKind::DistancePenalty, "distance-penalty"},
    {OpKind::ExponentialShaping, "exponential-shaping"},
    {OpKind::ThresholdBonus, "threshold-bonus"},
    {OpKind::VelocityPenalty, "velocity-penalty"},
    {OpKind::DotProductAlignment, "dot-product-alignment"},
    {OpKind::WeightedSum, "weighted-sum"},
}};

constexpr std::array<std::pair<Comparator, std::string_view>, 4> kComparatorNames{{
    {Comparator::Less, "<"},
    {Comparator::LessEqual, "<="},
    {Comparator::Greater, ">"},
    {Comparator::GreaterEqual, ">="},
}};

// Fixed vocabulary for synthetic catalogs; names are `<stem>_<index>`.
struct VocabEntry {
    std::string_view stem;
    StateKind kind;
    int arity;
};

constexpr std::array<VocabEntry, 12> kVocabulary{{
    {"hand_pos", StateKind::Position, 3},
    {"object_pos", StateKind::Position, 3},
    {"goal_pos", StateKind::Position, 3},
    {"hand_rot", StateKind::Orientation, 4},
    {"object_rot", StateKind::Orientation, 4},
    {"hand_vel", StateKind::Velocity, 3},
    {"object_linvel", StateKind::Velocity, 3},
    {"fingertip_force", StateKind::Force, 5},
    {"object_goal_dist", StateKind::Distance, 1},
    {"fingertip_dist", StateKind::Distance, 5},
    {"joint_angle", StateKind::Angle, 1},
    {"contact_flag", StateKind::BooleanFlag, 1},
}};

bool valid_name(std::string_view name) {
    return !name.empty() && std::none_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
    });
}

std::string_view comparator_text(Comparator c) {
    for (auto [k, s] : kComparatorNames)
        if (k == c) return s;
    return "?";
}

void collect_states(const SuccessNode& node, std::vector<std::string>& out) {
    if (node.type == SuccessNode::Type::Compare) {
        if (std::find(out.begin(), out.end(), node.state) == out.end()) out.push_back(node.state);
        return;
    }
    for (const auto& child : node.children) collect_states(child, out);
}

bool eval_node(const SuccessNode& node, const std::map<std::string, double>& readings) {
    switch (node.type) {
    case SuccessNode::Type::Compare: {
        auto it = readings.find(node.state);
        if (it == readings.end()) return false;
        const double v = it->second;
        switch (node.comparator) {
        case Comparator::Less: return v < node.threshold;
        case Comparator::LessEqual: return v <= node.threshold;
        case Comparator::Greater: return v > node.threshold;
        case Comparator::GreaterEqual: return v >= node.threshold;
        }
        return false;
    }
    case SuccessNode::Type::All:
        return std::all_of(node.children.begin(), node.children.end(),
                           [&](const SuccessNode& c) { return eval_node(c, readings); });
    case SuccessNode::Type::Any:
        return std::any_of(node.children.begin(), node.children.end(),
                           [&](const SuccessNode& c) { return eval_node(c, readings); });
    case SuccessNode::Type::Not:
        return !node.children.empty() && !eval_node(node.children.front(), readings);
    }
    return false;
}

std::string node_text(const SuccessNode& node) {
    std::ostringstream os;
    switch (node.type) {
    case SuccessNode::Type::Compare:
        os << node.state << ' ' << comparator_text(node.comparator) << ' ' << node.threshold;
        break;
    case SuccessNode::Type::Not:
        os << "not (" << (node.children.empty() ? "" : node_text(node.children.front())) << ')';
        break;
    case SuccessNode::Type::All:
    case SuccessNode::Type::Any: {
        const char* glue = node.type == SuccessNode::Type::All ? " and " : " or ";
        os << '(';
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            if (i) os << glue;
            os << node_text(node.children[i]);
        }
        os << ')';
        break;
    }
    }
    return os.str();
}

json node_to_json(const SuccessNode& node) {
    switch (node.type) {
    case SuccessNode::Type::Compare:
        return {{"state", node.state},
                {"op", std::string(comparator_text(node.comparator))},
                {"value", node.threshold}};
    case SuccessNode::Type::Not:
        return {{"not", node_to_json(node.children.front())}};
    case SuccessNode::Type::All:
    case SuccessNode::Type::Any: {
        json arr = json::array();
        for (const auto& c : node.children) arr.push_back(node_to_json(c));
        return {{node.type == SuccessNode::Type::All ? "all" : "any", arr}};
    }
    }
    return {};
}

SuccessNode node_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw LoadError(where + ": expected an object");
    SuccessNode node;
    if (j.contains("all") || j.contains("any")) {
        const bool all = j.contains("all");
        const auto& arr = j.at(all ? "all" : "any");
        const std::string key = where + (all ? ".all" : ".any");
        if (!arr.is_array() || arr.empty()) throw LoadError(key + ": expected a non-empty list");
        node.type = all ? SuccessNode::Type::All : SuccessNode::Type::Any;
        for (std::size_t i = 0; i < arr.size(); ++i)
            node.children.push_back(node_from_json(arr[i], key + "[" + std::to_string(i) + "]"));
        return node;
    }
    if (j.contains("not")) {
        node.type = SuccessNode::Type::Not;
        node.children.push_back(node_from_json(j.at("not"), where + ".not"));
        return node;
    }
    if (!j.contains("state") || !j.at("state").is_string())
        throw LoadError(where + ".state: missing or not a string");
    if (!j.contains("op") || !j.at("op").is_string())
        throw LoadError(where + ".op: missing or not a string");
    if (!j.contains("value") || !j.at("value").is_number())
        throw LoadError(where + ".value: missing or not a number");
    node.type = SuccessNode::Type::Compare;
    node.state = j.at("state").get<std::string>();
    const auto op = j.at("op").get<std::string>();
    auto it = std::find_if(kComparatorNames.begin(), kComparatorNames.end(),
                           [&](const auto& p) { return p.second == op; });
    if (it == kComparatorNames.end()) throw LoadError(where + ".op: unknown comparator '" + op + "'");
    node.comparator = it->first;
    node.threshold = j.at("value").get<double>();
    return node;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw LoadError(where + "." + key + ": missing");
    return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) throw LoadError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

} // namespace

std::string_view to_string(StateKind kind) {
    for (auto [k, s] : kStateKindNames)
        if (k == kind) return s;
    return "?";
}

std::string_view to_string(OpKind kind) {
    for (auto [k, s] : kOpKindNames)
        if (k == kind) return s;
    return "?";
}

std::optional<StateKind> state_kind_from_string(std::string_view s) {
    for (auto [k, name] : kStateKindNames)
        if (name == s) return k;
    return std::nullopt;
}

std::optional<OpKind> op_kind_from_string(std::string_view s) {
    for (auto [k, name] : kOpKindNames)
        if (name == s) return k;
    return std::nullopt;
}

std::vector<std::string> SuccessSpec::referenced_states() const {
    std::vector<std::string> out;
    collect_states(root, out);
    return out;
}

bool SuccessSpec::holds(const std::map<std::string, double>& readings) const {
    return eval_node(root, readings);
}

std::string SuccessSpec::to_text() const { return node_text(root); }

json SuccessSpec::to_json() const { return node_to_json(root); }

SuccessSpec SuccessSpec::from_json(const json& j, const std::string& where) {
    return SuccessSpec{node_from_json(j, where)};
}

WorldModel::WorldModel(std::string id, std::vector<StateDescriptor> catalog, std::vector<TaskDef> tasks)
    : id_(std::move(id)), catalog_(std::move(catalog)), tasks_(std::move(tasks)) {
    if (catalog_.empty()) throw ValidationError("world model '" + id_ + "': catalog is empty");
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        const auto& s = catalog_[i];
        if (!valid_name(s.name))
            throw ValidationError("states[" + std::to_string(i) + "].name: empty or contains whitespace");
        if (s.arity < 1)
            throw ValidationError("states[" + std::to_string(i) + "].arity: must be >= 1");
        if (!index_.emplace(s.name, i).second)
            throw ValidationError("duplicate state name '" + s.name + "'");
    }
    std::set<std::string> task_ids;
    for (const auto& t : tasks_) {
        if (t.user_description.empty())
            throw ValidationError("task '" + t.id + "': description is empty");
        if (!task_ids.insert(t.id).second) throw ValidationError("duplicate task id '" + t.id + "'");
        if (t.success_spec) {
            for (const auto& name : t.success_spec->referenced_states())
                if (!has_state(name))
                    throw ValidationError("task '" + t.id + "': success references unknown state '" +
                                          name + "'");
        }
        if (t.surrogate) {
            if (t.surrogate->truth_ops.empty())
                throw ValidationError("task '" + t.id + "': surrogate.truth is empty");
            for (const auto& [name, op] : t.surrogate->truth_ops)
                if (!has_state(name))
                    throw ValidationError("task '" + t.id + "': surrogate.truth references unknown state '" +
                                          name + "'");
        }
    }
}

std::vector<std::string> WorldModel::state_names() const {
    std::vector<std::string> names;
    names.reserve(catalog_.size());
    for (const auto& s : catalog_) names.push_back(s.name);
    return names;
}

bool WorldModel::has_state(std::string_view name) const { return index_.find(name) != index_.end(); }

const StateDescriptor* WorldModel::find_state(std::string_view name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &catalog_[it->second];
}

std::optional<std::size_t> WorldModel::index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const TaskDef& WorldModel::task(std::string_view id) const {
    for (const auto& t : tasks_)
        if (t.id == id) return t;
    throw ArgumentError("world model '" + id_ + "' has no task '" + std::string(id) + "'");
}

json WorldModel::to_json() const {
    json states = json::array();
    for (const auto& s : catalog_)
        states.push_back({{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"arity", s.arity}});
    json tasks = json::array();
    for (const auto& t : tasks_) {
        json jt = {{"id", t.id}, {"description", t.user_description}};
        if (t.success_spec) jt["success"] = t.success_spec->to_json();
        if (t.surrogate) {
            json truth = json::object();
            for (const auto& [name, op] : t.surrogate->truth_ops) truth[name] = std::string(to_string(op));
            jt["surrogate"] = {{"truth", truth}, {"difficulty", t.surrogate->difficulty}};
        }
        tasks.push_back(std::move(jt));
    }
    return {{"id", id_}, {"states", states}, {"tasks", tasks}};
}

WorldModel parse_world_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError("world model parse error at line " + std::to_string(line_of_offset(text, e.byte)) +
                        ": " + e.what());
    }
    if (!doc.is_object()) throw LoadError("world model: top level must be an object");

    const std::string id = require_string(doc, "id", "world");
    const auto& jstates = require(doc, "states", "world");
    if (!jstates.is_array()) throw LoadError("world.states: expected a list");

    std::vector<StateDescriptor> catalog;
    for (std::size_t i = 0; i < jstates.size(); ++i) {
        const std::string where = "states[" + std::to_string(i) + "]";
        StateDescriptor s;
        s.name = require_string(jstates[i], "name", where);
        const auto kind = require_string(jstates[i], "kind", where);
        auto k = state_kind_from_string(kind);
        if (!k) throw LoadError(where + ".kind: unknown kind '" + kind + "'");
        s.kind = *k;
        const auto& arity = require(jstates[i], "arity", where);
        if (!arity.is_number_integer()) throw LoadError(where + ".arity: expected an integer");
        s.arity = arity.get<int>();
        catalog.push_back(std::move(s));
    }

    std::vector<TaskDef> tasks;
    if (doc.contains("tasks")) {
        const auto& jtasks = doc.at("tasks");
        if (!jtasks.is_array()) throw LoadError("world.tasks: expected a list");
        for (std::size_t i = 0; i < jtasks.size(); ++i) {
            const std::string where = "tasks[" + std::to_string(i) + "]";
            TaskDef t;
            t.id = require_string(jtasks[i], "id", where);
            t.user_description = require_string(jtasks[i], "description", where);
            if (jtasks[i].contains("success") && !jtasks[i].at("success").is_null())
                t.success_spec = SuccessSpec::from_json(jtasks[i].at("success"), where + ".success");
            if (jtasks[i].contains("surrogate")) {
                const auto& js = jtasks[i].at("surrogate");
                SurrogateSpec sp;
                const auto& truth = require(js, "truth", where + ".surrogate");
                if (!truth.is_object()) throw LoadError(where + ".surrogate.truth: expected an object");
                for (const auto& [name, op] : truth.items()) {
                    if (!op.is_string()) throw LoadError(where + ".surrogate.truth." + name + ": expected a string");
                    auto kind = op_kind_from_string(op.get<std::string>());
                    if (!kind)
                        throw LoadError(where + ".surrogate.truth." + name + ": unknown operation kind");
                    sp.truth_ops.emplace(name, *kind);
                }
                if (js.contains("difficulty")) {
                    if (!js.at("difficulty").is_number())
                        throw LoadError(where + ".surrogate.difficulty: expected a number");
                    sp.difficulty = js.at("difficulty").get<double>();
                }
                t.surrogate = std::move(sp);
            }
            tasks.push_back(std::move(t));
        }
    }
    return WorldModel(id, std::move(catalog), std::move(tasks));
}

WorldModel load_world_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open world model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_world_model(ss.str());
}

void save_world_model(const WorldModel& world, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write world model file " + path.string());
    out << world.to_json().dump(2) << '\n';
}

double noise_scale_for(double difficulty) { return 0.15 * difficulty; }
double exec_failure_rate_for(double difficulty) { return 0.10 * difficulty; }

std::pair<WorldModel, SyntheticTask> generate_synthetic_task(int catalog_size, int truth_size,
                                                             double difficulty, std::uint64_t seed) {
    if (catalog_size < 1) throw ArgumentError("catalog_size must be >= 1");
    if (truth_size < 1 || truth_size > catalog_size)
        throw ArgumentError("truth_size must lie in [1, catalog_size]");
    if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw ArgumentError("difficulty must lie in [0, 1]");

    Rng rng(derive_seed(seed, "synthetic-task"));

    std::vector<StateDescriptor> catalog;
    catalog.reserve(static_cast<std::size_t>(catalog_size));
    for (int i = 0; i < catalog_size; ++i) {
        const auto& v = kVocabulary[static_cast<std::size_t>(i) % kVocabulary.size()];
        const auto index = static_cast<std::size_t>(i) / kVocabulary.size();
        catalog.push_back({std::string(v.stem) + "_" + std::to_string(index), v.kind, v.arity});
    }

    // Partial Fisher-Yates: the first truth_size slots form a uniform sample.
    std::vector<std::size_t> order(catalog.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < static_cast<std::size_t>(truth_size); ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(order.size() - 1)));
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> chosen(order.begin(), order.begin() + truth_size);
    std::sort(chosen.begin(), chosen.end());

    SyntheticTask st;
    for (auto idx : chosen) {
        const auto& name = catalog[idx].name;
        st.truth_subset.push_back(name);
        st.truth_ops[name] = kAllOpKinds[rng.uniform_int(0, std::size(kAllOpKinds) - 1)];
    }
    st.difficulty = difficulty;
    st.noise_scale = noise_scale_for(difficulty);
    st.exec_failure_rate = exec_failure_rate_for(difficulty);

    // The success predicate is shown only to the reconciler.
    SuccessNode all{SuccessNode::Type::All, {}, Comparator::Greater, 0.0, {}};
    for (const auto& name : st.truth_subset)
        all.children.push_back({SuccessNode::Type::Compare, name, Comparator::Less, 0.05, {}});

    st.task.id = "synthetic-" + std::to_string(seed);
    st.task.user_description = "Drive the manipulated object into its goal configuration (synthetic task " +
                               std::to_string(seed) + ").";
    st.task.success_spec = SuccessSpec{std::move(all)};

    WorldModel world("synthetic-world-" + std::to_string(seed), std::move(catalog), {st.task});
    validate_synthetic_task(world, st);
    return {std::move(world), std::move(st)};
}

SyntheticTask synthetic_view(const WorldModel& world, const TaskDef& task) {
    if (!task.surrogate)
        throw ConfigError("task '" + task.id + "' has no surrogate truth block; the surrogate evaluator cannot score it");
    SyntheticTask st;
    st.task = task;
    for (const auto& s : world.catalog())
        if (task.surrogate->truth_ops.count(s.name)) st.truth_subset.push_back(s.name);
    st.truth_ops = task.surrogate->truth_ops;
    st.difficulty = task.surrogate->difficulty;
    st.noise_scale = noise_scale_for(st.difficulty);
    st.exec_failure_rate = exec_failure_rate_for(st.difficulty);
    validate_synthetic_task(world, st);
    return st;
}

void validate_synthetic_task(const WorldModel& world, const SyntheticTask& task) {
    if (task.task.user_description.empty()) throw ValidationError("synthetic task: empty description");
    if (task.truth_subset.empty() || task.truth_subset.size() > world.catalog().size())
        throw ValidationError("synthetic task: truth subset size out of range");
    std::set<std::string> seen;
    for (const auto& name : task.truth_subset) {
        if (!world.has_state(name)) throw ValidationError("synthetic task: unknown truth state '" + name + "'");
        if (!seen.insert(name).second) throw ValidationError("synthetic task: duplicate truth state '" + name + "'");
    }
    if (task.truth_ops.size() != seen.size())
        throw ValidationError("synthetic task: truth_ops keys differ from truth subset");
    for (const auto& [name, op] : task.truth_ops)
        if (!seen.count(name)) throw ValidationError("synthetic task: truth_ops key '" + name + "' not in truth subset");
    if (!(task.difficulty >= 0.0 && task.difficulty <= 1.0))
        throw ValidationError("synthetic task: difficulty outside [0, 1]");
    if (!(task.noise_scale >= 0.0)) throw ValidationError("synthetic task: negative noise scale");
    if (!(task.exec_failure_rate >= 0.0 && task.exec_failure_rate <= 1.0))
        throw ValidationError("synthetic task: failure rate outside [0, 1]");
}

} // namespace rosevo
