#pragma once

// Synthetic subjects: MaxEnt agents that act with the soft-optimal policy
// of a known theta, and history-free threshold agents with a logistic
// pump probability around a target state.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bart/features.hpp"
#include "bart/maxent.hpp"
#include "bart/record.hpp"

namespace bart {

struct MaxEntAgent {
    ThetaWeights theta{};
    FeatureOptions features;
};

/// P(Pump | i) = 1 / (1 + exp((i - tau) / softness)).
struct ThresholdAgent {
    double tau = 64.0;
    double softness = 1.0;
};

struct AgentSpec {
    std::variant<MaxEntAgent, ThresholdAgent> kind;
    int n_subjects = 1;
    /// Scored trials per subject; practice trials come from BartConfig.
    int trials_per_subject = 30;
    std::uint64_t seed = 0;
    /// Subject ids are <prefix><zero-padded index>.
    std::string id_prefix = "s";
};

/// Parses "threshold:<tau>,<softness>" or "maxent:<11 reals>".
/// Throws DomainError on a malformed spec.
std::variant<MaxEntAgent, ThresholdAgent> parse_agent_kind(const std::string& text);
std::string describe_agent_kind(const std::variant<MaxEntAgent, ThresholdAgent>& kind);

/// Throws DomainError when the spec is inconsistent with cfg.
void validate_agent(const AgentSpec& spec, const BartConfig& cfg);

double threshold_pump_probability(const ThresholdAgent& agent, int i) noexcept;

/// The agent's policy in the given history context.
PolicyTable agent_policy(const AgentSpec& spec, const HistoryContext& ctx, const BartConfig& cfg);

/// Simulates n_subjects sessions of practice + trials_per_subject balloons.
/// Subject k draws from the stream derive_seed(seed, k), so output does not
/// depend on the thread count.
std::vector<Session> generate_population(const AgentSpec& spec, const BartConfig& cfg,
                                         std::size_t threads = 1);

}  // namespace bart
