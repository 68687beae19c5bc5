#pragma once

// Reward designers: the port that turns a guidance bundle into K reward
// source texts, a seeded synthetic implementation, and a chat-model adapter.

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rosevo/chat_client.hpp"
#include "rosevo/guidance.hpp"
#include "rosevo/settable.hpp"
#include "rosevo/worldmodel.hpp"

namespace rosevo {

class DesignerPort {
public:
    virtual ~DesignerPort() = default;
    /// Returns up to K source texts; fewer means the missing samples failed.
    virtual std::vector<std::string> propose(const GuidanceBundle& bundle, int K, std::uint64_t seed) = 0;
};

struct SamplerConfig {
    double temperature = 1.0;
    double contribution_weight = 1.0; ///< alpha
    double usage_weight = 0.1;        ///< beta
    double invalid_rate = 0.0;
    int member_min = 2;
    int member_max = 6;

    /// Throws ArgumentError on an invalid configuration.
    void validate() const;
};

struct StateDistribution {
    std::vector<std::string> names;
    std::vector<double> probabilities;

    double probability(std::string_view name) const;
};

/// softmax((alpha * contribution - beta * usage) / temperature) over the rows.
/// Scores of states listed in `halved` are multiplied by 0.5 before the softmax.
StateDistribution score_states(const StateExecutionTable& table, const SamplerConfig& config,
                               const std::vector<std::string>& halved = {});

/// Reads a rendered execution table back; rows absent from the text stay zero.
StateExecutionTable parse_table_text(std::string_view text, const WorldModel& world);

/// Reward text for one synthetic sample: a `def compute_reward(...)` signature,
/// one term line per operation, the sum, and a return line.
std::string render_synthetic_reward(const std::vector<std::string>& members, const std::vector<OpTerm>& terms,
                                    const std::vector<std::string>& bogus_members = {});

/// Seeded heuristic designer. State selection draws members from the table
/// scores (example members weighted by half); operation refinement keeps the
/// example's members and redraws every term.
class SyntheticDesigner final : public DesignerPort {
public:
    SyntheticDesigner(WorldModel world, SamplerConfig config);

    std::vector<std::string> propose(const GuidanceBundle& bundle, int K, std::uint64_t seed) override;

    const SamplerConfig& config() const { return config_; }

private:
    WorldModel world_;
    SamplerConfig config_;
};

inline std::vector<std::string> synthetic_propose(const GuidanceBundle& bundle, int K, std::uint64_t seed,
                                                  const SamplerConfig& config, const WorldModel& world) {
    return SyntheticDesigner(world, config).propose(bundle, K, seed);
}

/// System prompt for the reward designer; loaded from the prompt directory
/// when present, else a built-in copy.
std::string designer_system_prompt();

/// Designer backed by a chat-completion endpoint.
class LlmDesigner final : public DesignerPort {
public:
    LlmDesigner(WorldModel world, std::shared_ptr<ChatClient> client);

    /// Requests K samples at once, tops up with further requests if the
    /// endpoint returned fewer, then keeps the first code block of each
    /// completion. Throws DesignerError when nothing usable came back.
    std::vector<std::string> propose(const GuidanceBundle& bundle, int K, std::uint64_t seed) override;

    std::vector<ChatMessage> messages(const GuidanceBundle& bundle) const;

private:
    WorldModel world_;
    std::shared_ptr<ChatClient> client_;
};

/// Reconciler backed by a chat-completion endpoint; shares nothing with the
/// designer except the client configuration.
class LlmReconciler final : public ReconcilerPort {
public:
    explicit LlmReconciler(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
    std::string reconcile(const ReconcileRequest& request) override;

private:
    std::shared_ptr<ChatClient> client_;
};

} // namespace rosevo
