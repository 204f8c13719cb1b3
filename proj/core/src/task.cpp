#include "bart/task.hpp"

#include <cmath>
#include <string>

#include "bart/errors.hpp"

namespace bart {

namespace {

void check_state(int i, const BartConfig& cfg) {
    if (i < 1 || i > cfg.max_state) {
        throw DomainError("state index " + std::to_string(i) + " outside [1, " +
                          std::to_string(cfg.max_state) + "]");
    }
}

}  // namespace

void BartConfig::validate() const {
    if (max_state < 1) throw DomainError("max_state must be >= 1");
    if (points_per_pump < 1) throw DomainError("points_per_pump must be >= 1");
    if (formal_trials < 1) throw DomainError("formal_trials must be >= 1");
    if (practice_trials < 0) throw DomainError("practice_trials must be >= 0");
}

std::string_view to_string(Outcome o) noexcept { return o == Outcome::Cash ? "cash" : "burst"; }

double burst_probability(int i, const BartConfig& cfg) {
    check_state(i, cfg);
    return 1.0 / static_cast<double>(cfg.max_state + 1 - i);
}

Rational burst_probability_exact(int i, const BartConfig& cfg) {
    check_state(i, cfg);
    return Rational(1, cfg.max_state + 1 - i);
}

int true_marginal_reward(int i, bool exploded, const BartConfig& cfg) {
    check_state(i, cfg);
    return exploded ? -cfg.points_per_pump * (i - 1) : cfg.points_per_pump;
}

Rational expected_marginal_reward(int i, const BartConfig& cfg) {
    const Rational p = burst_probability_exact(i, cfg);
    return p * Rational(true_marginal_reward(i, true, cfg)) +
           (Rational(1) - p) * Rational(true_marginal_reward(i, false, cfg));
}

int optimal_stop_pumps(const BartConfig& cfg) {
    cfg.validate();
    int tau = 0;
    for (int i = 1; i <= cfg.max_state; ++i) {
        if (expected_marginal_reward(i, cfg) > 0) tau = i;
    }
    return tau;
}

Rational stop_after_payoff(int tau, const BartConfig& cfg) {
    if (tau < 0 || tau > cfg.max_state) {
        throw DomainError("pump count " + std::to_string(tau) + " outside [0, " +
                          std::to_string(cfg.max_state) + "]");
    }
    // survives tau pumps with probability (max_state - tau) / max_state
    return Rational(static_cast<std::int64_t>(cfg.points_per_pump) * tau * (cfg.max_state - tau),
                    cfg.max_state);
}

StepResult step(int i, Action a, int breakpoint, const BartConfig& cfg) {
    check_state(i, cfg);
    if (breakpoint < 1 || breakpoint > cfg.max_state) {
        throw DomainError("breakpoint " + std::to_string(breakpoint) + " outside [1, " +
                          std::to_string(cfg.max_state) + "]");
    }
    if (i > breakpoint) {
        throw std::logic_error("state " + std::to_string(i) + " is past breakpoint " +
                               std::to_string(breakpoint) + "; trial already ended");
    }
    if (a == Action::Stop) {
        return TrialOutcome{Outcome::Cash, i - 1, cfg.points_per_pump * (i - 1)};
    }
    if (i == breakpoint) return TrialOutcome{Outcome::Burst, i, 0};
    return i + 1;
}

int sample_breakpoint(std::mt19937_64& rng, const BartConfig& cfg) {
    std::uniform_int_distribution<int> dist(1, cfg.max_state);
    return dist(rng);
}

TrialRecord simulate_trial(std::span<const double> pump_prob, std::mt19937_64& rng,
                           const BartConfig& cfg) {
    if (pump_prob.size() != static_cast<std::size_t>(cfg.max_state)) {
        throw DomainError("policy must define all " + std::to_string(cfg.max_state) + " states");
    }
    for (double p : pump_prob) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("pump probability outside [0,1]");
    }

    TrialRecord rec;
    const int bp = sample_breakpoint(rng, cfg);
    rec.breakpoint = bp;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int i = 1;
    for (;;) {
        const Action a = unit(rng) < pump_prob[i - 1] ? Action::Pump : Action::Stop;
        const StepResult r = step(i, a, bp, cfg);
        if (const auto* out = std::get_if<TrialOutcome>(&r)) {
            rec.outcome = out->kind;
            rec.num_pumps = out->num_pumps;
            return rec;
        }
        i = std::get<int>(r);
    }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    // splitmix64 finalizer over base xor index
    std::uint64_t z = base ^ (index * 0x9E3779B97F4A7C15ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace bart
