#pragma once

// Exact tabular model of the balloon task: hazards, marginal rewards,
// the optimal stopping point and a seeded trial simulator.

#include <cstdint>
#include <random>
#include <span>
#include <variant>

#include <boost/rational.hpp>

#include "bart/record.hpp"

namespace bart {

using Rational = boost::rational<std::int64_t>;

enum class Action { Pump, Stop };

/// How a trial ended.
struct TrialOutcome {
    Outcome kind = Outcome::Cash;
    int num_pumps = 0;
    int payoff = 0;

    bool operator==(const TrialOutcome&) const = default;
};

/// Result of a single transition: either the next decision state or a
/// terminal outcome.
using StepResult = std::variant<int, TrialOutcome>;

/// Hazard of bursting on the pump taken from state i, 1/(max_state+1-i).
double burst_probability(int i, const BartConfig& cfg);
Rational burst_probability_exact(int i, const BartConfig& cfg);

/// Marginal points of the pump taken from state i: the accumulated
/// points are lost when it bursts, one more increment otherwise.
int true_marginal_reward(int i, bool exploded, const BartConfig& cfg);

/// Expectation of true_marginal_reward under the hazard,
/// points_per_pump*(max_state+1-2i)/(max_state+1-i).
Rational expected_marginal_reward(int i, const BartConfig& cfg);

/// Largest pump count tau whose marginal expected reward is positive (0 if none).
int optimal_stop_pumps(const BartConfig& cfg);

/// Expected payoff of pumping exactly tau times and then cashing.
Rational stop_after_payoff(int tau, const BartConfig& cfg);

/// One transition, deterministic given the balloon's breakpoint.
StepResult step(int i, Action a, int breakpoint, const BartConfig& cfg);

/// Samples a breakpoint uniformly on 1..max_state.
int sample_breakpoint(std::mt19937_64& rng, const BartConfig& cfg);

/// Plays one balloon. pump_prob[i-1] is P(Pump | i). The returned record
/// carries the breakpoint but no subject id or index.
TrialRecord simulate_trial(std::span<const double> pump_prob, std::mt19937_64& rng,
                           const BartConfig& cfg);

/// Seed for stream `index` derived from `base`. Independent of call order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

}  // namespace bart
