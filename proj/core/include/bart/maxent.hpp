#pragma once

// Maximum-entropy IRL on the per-trial balloon MDP.
//
// Each trial is its own finite-horizon MDP over decision states 1..max_state
// with the task's true hazard. The reward of state i is theta . f(i); cash
// and burst are absorbing with zero reward. The soft backward pass is the
// causal one, taking the expectation over the burst outcome:
//
//   Q_stop(i) = 0
//   Q_pump(i) = (1 - p(i)) V(i+1)
//   V(i)      = r(i) + log(1 + exp Q_pump(i))
//
// with p(i) the burst hazard (p(max_state) = 1), and the stochastic policy
// P(Pump | i) = exp(Q_pump(i) - log(1 + exp Q_pump(i))).
//
// Training maximizes the concave objective mean(theta . f~ - V(1)), whose
// gradient is exactly empirical minus expected feature counts under the
// policy and the true hazard. It equals the demonstrations' action
// log-likelihood up to a term with zero mean over burst outcomes.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bart/features.hpp"
#include "bart/record.hpp"
#include "bart/trajectory.hpp"

namespace bart {

using ThetaWeights = std::array<double, kNumFeatures>;

double dot(const ThetaWeights& theta, const FeatureVector& f) noexcept;
double inf_norm(const std::array<double, kNumFeatures>& v) noexcept;

/// Per-state action log-probabilities of one trial context.
struct PolicyTable {
    std::vector<double> log_pump;  // index i-1
    std::vector<double> log_stop;

    int max_state() const noexcept { return static_cast<int>(log_pump.size()); }
    double pump_prob(int i) const;
    double stop_prob(int i) const;
    std::vector<double> pump_probs() const;
};

/// Soft value iteration in log space. Throws DomainError on non-finite theta.
PolicyTable soft_backward(const ThetaWeights& theta, const FeatureMatrix& features,
                          const BartConfig& cfg);

/// Expected visits D(i) and the terminal masses of a policy.
struct VisitationVector {
    std::vector<double> visits;      // D(i) at index i-1
    std::vector<double> cash_mass;   // trial cashes at state i
    std::vector<double> burst_mass;  // trial bursts on the pump from state i

    double D(int i) const { return visits.at(static_cast<std::size_t>(i - 1)); }
};

VisitationVector forward_visitation(const PolicyTable& policy, const BartConfig& cfg);

/// One demonstrated trial with the feature matrix of its history context.
struct Demonstration {
    FeatureMatrix features;
    Outcome outcome = Outcome::Cash;
    int num_pumps = 0;

    /// Number of decision states visited (= actions taken).
    int visited() const noexcept { return outcome == Outcome::Cash ? num_pumps + 1 : num_pumps; }
};

/// Demonstrations for the referenced trials; features always see the full
/// preceding history of each session.
std::vector<Demonstration> make_demonstrations(const std::vector<Session>& sessions,
                                               std::span<const TrialRef> refs,
                                               const FeatureOptions& opts = {});

/// Mean over trials of the summed features of visited states.
FeatureVector empirical_feature_expectation(std::span<const Demonstration> demos);

/// Mean over trials of sum_i D_theta(i) f(i).
FeatureVector expected_feature_expectation(const ThetaWeights& theta,
                                           std::span<const Demonstration> demos,
                                           const BartConfig& cfg, std::size_t threads = 1);

/// Soft value V(1) of one trial context.
double soft_value(const ThetaWeights& theta, const FeatureMatrix& features, const BartConfig& cfg);

/// Mean over trials of theta . f~ - V(1); concave in theta.
double training_objective(const ThetaWeights& theta, std::span<const Demonstration> demos,
                          const BartConfig& cfg, std::size_t threads = 1);

/// Gradient of training_objective: empirical minus expected feature counts.
FeatureVector gradient(const ThetaWeights& theta, std::span<const Demonstration> demos,
                       const BartConfig& cfg, std::size_t threads = 1);

struct LikelihoodSummary {
    /// Mean log-likelihood per trajectory (nats).
    double action_only = 0.0;
    double with_transitions = 0.0;
    /// Same totals divided by the number of decisions.
    double action_only_per_decision = 0.0;
    double with_transitions_per_decision = 0.0;
    std::size_t n_trajectories = 0;
    std::size_t n_decisions = 0;
};

/// Log-probability of one demonstration's actions (plus hazards when
/// include_transitions).
double trajectory_log_likelihood(const PolicyTable& policy, const Demonstration& demo,
                                 const BartConfig& cfg, bool include_transitions);

/// Per-trajectory mean log-likelihood. Throws DomainError on an empty set.
double log_likelihood(const ThetaWeights& theta, std::span<const Demonstration> demos,
                      const BartConfig& cfg, bool include_transitions, std::size_t threads = 1);

LikelihoodSummary evaluate_likelihood(const ThetaWeights& theta,
                                      std::span<const Demonstration> demos,
                                      const BartConfig& cfg, std::size_t threads = 1);

enum class Optimizer {
    /// fixed step, halved whenever a step would lower the objective
    GradientAscent,
    /// Newton steps on the exact Hessian with backtracking
    Newton,
};

Optimizer parse_optimizer(const std::string& name);
std::string_view to_string(Optimizer o) noexcept;

struct TrainOptions {
    double learning_rate = 0.05;
    int max_iters = 5000;
    double grad_tol_inf = 1e-4;
    /// Finite samples can put the empirical counts outside what any policy
    /// reaches in expectation (one lucky survival in a rare context is
    /// enough), and then the unpenalized objective has no maximizer. A small
    /// penalty keeps theta finite in that case.
    double l2_lambda = 1e-3;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Newton;
    /// 0 = hardware concurrency (still capped by BART_IRL_THREADS).
    std::size_t threads = 0;
};

struct TrainReport {
    ThetaWeights theta{};
    int iterations = 0;
    bool converged = false;
    /// Inf-norm of the regularized gradient at theta.
    double final_grad_inf_norm = 0.0;
    /// Inf-norm of empirical minus expected features at theta.
    double moment_gap_inf_norm = 0.0;
    /// Regularized objective at theta.
    double objective = 0.0;
    double final_learning_rate = 0.0;
    double train_lld_action_only = 0.0;
    double train_lld_with_transitions = 0.0;
    std::size_t n_train = 0;
    TrainOptions options;
};

/// Maximizes training_objective - l2/2 |theta|^2 from theta = 0.
/// Deterministic given inputs. Throws TrainingError if the objective
/// becomes non-finite.
TrainReport train(std::span<const Demonstration> demos, const BartConfig& cfg,
                  const TrainOptions& opts = {});

}  // namespace bart
