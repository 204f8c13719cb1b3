#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bart/agents.hpp"
#include "bart/errors.hpp"
#include "bart/maxent.hpp"
#include "bart/task.hpp"
#include "test_support.hpp"

namespace bart {
namespace {

using testing::enumerate_outcomes;
using testing::random_demo;
using testing::random_features;
using testing::random_theta;

BartConfig config(int m) {
    BartConfig c;
    c.max_state = m;
    return c;
}

FeatureMatrix empty_history_features(int m, const FeatureOptions& opts = {}) {
    return feature_matrix(HistoryBuilder(m).context(), opts);
}

PolicyTable fixed_policy(const std::vector<double>& pump) {
    PolicyTable p;
    for (double x : pump) {
        p.log_pump.push_back(std::log(x));
        p.log_stop.push_back(std::log1p(-x));
    }
    return p;
}

Demonstration demo(const FeatureMatrix& f, Outcome o, int pumps) { return {f, o, pumps}; }

TEST(SoftBackward, ZeroThetaBaseCase) {
    const BartConfig cfg;
    const auto pol = soft_backward(ThetaWeights{}, empty_history_features(128), cfg);
    EXPECT_DOUBLE_EQ(pol.pump_prob(128), 0.5);
    for (int i = 1; i <= 128; ++i) EXPECT_NEAR(pol.pump_prob(i) + pol.stop_prob(i), 1.0, 1e-15);
}

TEST(SoftBackward, StrongStepPenaltySuppressesPumping) {
    const BartConfig cfg;
    ThetaWeights theta{};
    theta[10] = -1000.0;
    const auto pol = soft_backward(theta, empty_history_features(128), cfg);
    for (int i = 1; i < 128; ++i) EXPECT_LT(pol.pump_prob(i), 1e-6) << "i=" << i;
    // From the last state the pump bursts surely and leads nowhere, so both
    // actions are worth 0 whatever theta is.
    EXPECT_DOUBLE_EQ(pol.pump_prob(128), 0.5);
}

TEST(SoftBackward, FiniteForLargeWeights) {
    std::mt19937_64 rng(1);
    const BartConfig cfg;
    for (int rep = 0; rep < 10; ++rep) {
        const auto pol = soft_backward(random_theta(rng, 50.0), random_features(rng, 128, 3.0), cfg);
        for (int i = 1; i <= 128; ++i) {
            ASSERT_TRUE(std::isfinite(pol.log_pump[static_cast<std::size_t>(i - 1)]));
            ASSERT_TRUE(std::isfinite(pol.log_stop[static_cast<std::size_t>(i - 1)]) || pol.pump_prob(i) == 1.0);
            EXPECT_NEAR(pol.pump_prob(i) + pol.stop_prob(i), 1.0, 1e-12);
        }
    }
}

TEST(SoftBackward, RecursionByHand) {
    // max_state = 2, f = state index, theta = w.
    const BartConfig cfg = config(2);
    const double w = 0.3;
    ThetaWeights theta{};
    theta[10] = w;
    const auto pol = soft_backward(theta, empty_history_features(2), cfg);
    const double v2 = 2 * w + std::log(2.0);
    const double q1 = 0.5 * v2;  // hazard at state 1 is 1/2
    EXPECT_NEAR(pol.pump_prob(1), std::exp(q1) / (1 + std::exp(q1)), 1e-15);
    EXPECT_NEAR(soft_value(theta, empty_history_features(2), cfg), w + std::log1p(std::exp(q1)), 1e-15);
}

TEST(SoftBackward, Errors) {
    const BartConfig cfg;
    ThetaWeights theta{};
    theta[3] = std::nan("");
    EXPECT_THROW(soft_backward(theta, empty_history_features(128), cfg), DomainError);
    EXPECT_THROW(soft_backward(ThetaWeights{}, empty_history_features(8), cfg), DomainError);
}

TEST(ForwardVisitation, AlwaysPump) {
    const BartConfig cfg;
    const auto v = forward_visitation(fixed_policy(std::vector<double>(128, 1.0)), cfg);
    for (int i = 1; i <= 128; ++i) EXPECT_NEAR(v.D(i), (129.0 - i) / 128.0, 1e-14);
}

TEST(ForwardVisitation, AlwaysStop) {
    const BartConfig cfg;
    const auto v = forward_visitation(fixed_policy(std::vector<double>(128, 0.0)), cfg);
    EXPECT_EQ(v.D(1), 1.0);
    for (int i = 2; i <= 128; ++i) EXPECT_EQ(v.D(i), 0.0);
}

TEST(ForwardVisitation, ConservationAndMonotone) {
    std::mt19937_64 rng(2);
    const BartConfig cfg;
    for (int rep = 0; rep < 20; ++rep) {
        const auto pol = soft_backward(random_theta(rng, 0.2), random_features(rng, 128), cfg);
        const auto v = forward_visitation(pol, cfg);
        double total = 0.0;
        for (int i = 1; i <= 128; ++i) {
            total += v.cash_mass[static_cast<std::size_t>(i - 1)] + v.burst_mass[static_cast<std::size_t>(i - 1)];
            EXPECT_GE(v.D(i), 0.0);
            EXPECT_LE(v.D(i), 1.0);
            if (i > 1) {
                EXPECT_LE(v.D(i), v.D(i - 1));
            }
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(ForwardVisitation, MatchesEnumeration) {
    std::mt19937_64 rng(3);
    for (int m = 1; m <= 8; ++m) {
        const BartConfig cfg = config(m);
        for (int rep = 0; rep < 20; ++rep) {
            const auto pol = soft_backward(random_theta(rng), random_features(rng, m), cfg);
            const auto v = forward_visitation(pol, cfg);
            const auto e = enumerate_outcomes(pol.pump_probs(), m);
            for (int i = 1; i <= m; ++i) {
                EXPECT_NEAR(v.D(i), e.visits[static_cast<std::size_t>(i - 1)], 1e-12);
                EXPECT_NEAR(v.cash_mass[static_cast<std::size_t>(i - 1)], e.prob(Outcome::Cash, i - 1), 1e-12);
                EXPECT_NEAR(v.burst_mass[static_cast<std::size_t>(i - 1)], e.prob(Outcome::Burst, i), 1e-12);
            }
        }
    }
}

TEST(TrajectoryLikelihood, MatchesEnumeration) {
    std::mt19937_64 rng(4);
    for (int m = 3; m <= 8; ++m) {
        const BartConfig cfg = config(m);
        const auto f = random_features(rng, m);
        const auto pol = soft_backward(random_theta(rng), f, cfg);
        const auto e = enumerate_outcomes(pol.pump_probs(), m);
        double total = 0.0;
        for (const auto& o : e.outcomes) {
            const double p = std::exp(trajectory_log_likelihood(pol, demo(f, o.kind, o.num_pumps), cfg, true));
            EXPECT_NEAR(p, o.prob, 1e-12);
            total += p;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(TrajectoryLikelihood, Examples) {
    const BartConfig cfg;
    const auto f = empty_history_features(128);
    const auto pol = soft_backward(ThetaWeights{}, f, cfg);
    EXPECT_DOUBLE_EQ(trajectory_log_likelihood(pol, demo(f, Outcome::Cash, 0), cfg, false), pol.log_stop[0]);

    // Pump from every state through 128, bursting on the last: the final
    // action term is log 0.5, its transition term log 1.
    const auto d = demo(f, Outcome::Burst, 128);
    const double a = trajectory_log_likelihood(pol, d, cfg, false);
    const double t = trajectory_log_likelihood(pol, d, cfg, true);
    double prefix = 0.0, hazards = 0.0;
    for (int j = 1; j < 128; ++j) {
        prefix += pol.log_pump[static_cast<std::size_t>(j - 1)];
        hazards += std::log1p(-burst_probability(j, cfg));
    }
    EXPECT_NEAR(a - prefix, std::log(0.5), 1e-12);
    EXPECT_NEAR(t - a - hazards, 0.0, 1e-12);
}

TEST(Likelihood, SummaryPerDecision) {
    const BartConfig cfg = config(8);
    const auto f = empty_history_features(8);
    const std::vector<Demonstration> demos = {demo(f, Outcome::Cash, 2), demo(f, Outcome::Burst, 4)};
    const auto s = evaluate_likelihood(ThetaWeights{}, demos, cfg);
    EXPECT_EQ(s.n_trajectories, 2u);
    EXPECT_EQ(s.n_decisions, 7u);
    EXPECT_NEAR(s.action_only_per_decision * 7, s.action_only * 2, 1e-12);
    EXPECT_NEAR(s.with_transitions_per_decision * 7, s.with_transitions * 2, 1e-12);
    EXPECT_EQ(log_likelihood(ThetaWeights{}, demos, cfg, true), s.with_transitions);
    EXPECT_THROW(evaluate_likelihood(ThetaWeights{}, {}, cfg), DomainError);
}

TEST(EmpiricalFeatures, Examples) {
    const auto f = empty_history_features(128);
    const std::vector<Demonstration> cash = {demo(f, Outcome::Cash, 2)};
    const auto e = empirical_feature_expectation(cash);
    EXPECT_EQ(e[10], 6.0);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(e[k], 0.0);
    const std::vector<Demonstration> burst = {demo(f, Outcome::Burst, 2)};
    EXPECT_EQ(empirical_feature_expectation(burst)[10], 3.0);
    const std::vector<Demonstration> twice = {cash[0], cash[0]};
    EXPECT_EQ(empirical_feature_expectation(twice), e);
    EXPECT_THROW(empirical_feature_expectation({}), DomainError);
}

TEST(Gradient, MatchesFiniteDifferencesOfObjective) {
    std::mt19937_64 rng(5);
    const BartConfig cfg = config(8);
    for (int draw = 0; draw < 20; ++draw) {
        std::vector<Demonstration> demos;
        for (int k = 0; k < 20; ++k) demos.push_back(random_demo(rng, 8));
        const ThetaWeights theta = random_theta(rng);
        const auto g = gradient(theta, demos, cfg);
        const auto fd = testing::central_difference(
            [&](const ThetaWeights& t) { return training_objective(t, demos, cfg); }, theta, 1e-5);
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            EXPECT_LT(std::abs(g[k] - fd[k]) / std::abs(fd[k]), 1e-5) << "draw " << draw << " f" << k + 1;
        }
    }
}

TEST(Gradient, ExpectedFeaturesAreValueDerivative) {
    std::mt19937_64 rng(6);
    const BartConfig cfg = config(6);
    const Demonstration d = random_demo(rng, 6);
    const ThetaWeights theta = random_theta(rng);
    const std::vector<Demonstration> one = {d};
    const auto expected = expected_feature_expectation(theta, one, cfg);
    const auto fd = testing::central_difference(
        [&](const ThetaWeights& t) { return soft_value(t, d.features, cfg); }, theta, 1e-5);
    for (std::size_t k = 0; k < kNumFeatures; ++k) EXPECT_NEAR(expected[k], fd[k], 1e-8);
}

TEST(Gradient, SmallAtGeneratingTheta) {
    // i.i.d. trials from one fixed context, sampled from the theta* policy.
    const BartConfig cfg;
    ThetaWeights star{};
    star[10] = -0.2;
    const auto f = empty_history_features(128);
    const auto pump = soft_backward(star, f, cfg).pump_probs();
    std::mt19937_64 rng(7);
    std::array<double, kNumFeatures> mean{};
    const int chunks = 10, per_chunk = 10000;
    for (int c = 0; c < chunks; ++c) {
        std::vector<Demonstration> demos;
        demos.reserve(per_chunk);
        for (int k = 0; k < per_chunk; ++k) {
            const TrialRecord r = simulate_trial(pump, rng, cfg);
            demos.push_back(demo(f, r.outcome, r.num_pumps));
        }
        const auto g = gradient(star, demos, cfg);
        for (std::size_t k = 0; k < kNumFeatures; ++k) mean[k] += g[k] / chunks;
    }
    EXPECT_LT(inf_norm(mean), 0.02);
}

std::vector<Demonstration> population_demos(const AgentSpec& spec, const BartConfig& cfg, bool train_half,
                                            const FeatureOptions& opts = {}) {
    const auto sessions = generate_population(spec, cfg, 1);
    const auto split = train_test_split(sessions, SplitScheme::Interleaved);
    return make_demonstrations(sessions, train_half ? split.train : split.test, opts);
}

TEST(Train, ZeroThetaDataGivesSmallWeights) {
    const BartConfig cfg;
    for (std::uint64_t seed : {1, 2, 3}) {
        AgentSpec spec;
        spec.kind = MaxEntAgent{};
        spec.n_subjects = 1000;
        spec.seed = seed;
        const auto demos = population_demos(spec, cfg, true);
        const auto rep = train(demos, cfg);
        ASSERT_TRUE(rep.converged);
        const double base = log_likelihood(ThetaWeights{}, demos, cfg, false);
        EXPECT_LT(std::abs(rep.train_lld_action_only - base), 1e-3) << "seed " << seed;
        // The lag indicators fire on one state per trial, so their weights
        // carry the most sampling noise.
        EXPECT_LT(inf_norm(rep.theta), 0.25) << "seed " << seed;
    }
}

TEST(Train, StrongL2Shrinks) {
    const BartConfig cfg;
    AgentSpec spec;
    spec.kind = ThresholdAgent{30.0, 3.0};
    spec.n_subjects = 20;
    const auto demos = population_demos(spec, cfg, true, {FeatureSemantics::Exact, true});
    TrainOptions opts;
    opts.l2_lambda = 1e3;
    const auto rep = train(demos, cfg, opts);
    EXPECT_TRUE(rep.converged);
    EXPECT_LT(inf_norm(rep.theta), 1e-2);
    // strong concavity: |theta^| <= |grad(0)| / lambda
    const auto g0 = gradient(ThetaWeights{}, demos, cfg);
    EXPECT_LE(std::sqrt(dot(rep.theta, rep.theta)), std::sqrt(dot(g0, g0)) / opts.l2_lambda + 1e-12);
}

TEST(Train, MomentMatchingAtConvergence) {
    const BartConfig cfg;
    for (double l2 : {1e-3, 0.1}) {
        AgentSpec spec;
        spec.kind = ThresholdAgent{25.0, 2.0};
        spec.n_subjects = 30;
        const auto demos = population_demos(spec, cfg, true);
        TrainOptions opts;
        opts.l2_lambda = l2;
        const auto rep = train(demos, cfg, opts);
        ASSERT_TRUE(rep.converged);
        const auto emp = empirical_feature_expectation(demos);
        const auto exp = expected_feature_expectation(rep.theta, demos, cfg);
        std::array<double, kNumFeatures> gap{};
        for (std::size_t k = 0; k < kNumFeatures; ++k) gap[k] = emp[k] - exp[k];
        EXPECT_LE(inf_norm(gap), opts.grad_tol_inf + l2 * inf_norm(rep.theta) + 1e-12);
        EXPECT_NEAR(inf_norm(gap), rep.moment_gap_inf_norm, 1e-12);
    }
}

TEST(Train, ObjectiveNeverDecreases) {
    const BartConfig cfg;
    AgentSpec spec;
    spec.kind = ThresholdAgent{40.0, 4.0};
    spec.n_subjects = 10;
    const auto demos = population_demos(spec, cfg, true, {FeatureSemantics::Exact, true});
    for (Optimizer o : {Optimizer::Newton, Optimizer::GradientAscent}) {
        double last = -std::numeric_limits<double>::infinity();
        for (int iters = 0; iters <= 12; ++iters) {
            TrainOptions opts;
            opts.optimizer = o;
            opts.max_iters = iters;
            const auto rep = train(demos, cfg, opts);
            EXPECT_GE(rep.objective, last) << to_string(o) << " after " << iters;
            last = rep.objective;
        }
    }
}

TEST(Train, GradientAscentReachesNewtonOptimum) {
    const BartConfig cfg = config(8);
    std::mt19937_64 rng(10);
    std::vector<Demonstration> demos;
    for (int k = 0; k < 50; ++k) demos.push_back(random_demo(rng, 8, 0.3));
    TrainOptions ga;
    ga.optimizer = Optimizer::GradientAscent;
    ga.l2_lambda = 0.1;
    ga.grad_tol_inf = 1e-5;
    ga.max_iters = 100000;
    const auto a = train(demos, cfg, ga);
    ASSERT_TRUE(a.converged) << "grad " << a.final_grad_inf_norm;
    TrainOptions nt = ga;
    nt.optimizer = Optimizer::Newton;
    const auto b = train(demos, cfg, nt);
    ASSERT_TRUE(b.converged);
    EXPECT_LT(b.iterations, 20);
    for (std::size_t k = 0; k < kNumFeatures; ++k) EXPECT_NEAR(a.theta[k], b.theta[k], 1e-3);
}

TEST(Train, ZeroIterations) {
    const BartConfig cfg = config(8);
    std::mt19937_64 rng(8);
    std::vector<Demonstration> demos;
    for (int k = 0; k < 5; ++k) demos.push_back(random_demo(rng, 8));
    TrainOptions opts;
    opts.max_iters = 0;
    const auto rep = train(demos, cfg, opts);
    EXPECT_EQ(rep.theta, ThetaWeights{});
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 0);
}

TEST(Train, DeterministicAcrossThreadCounts) {
    const BartConfig cfg;
    AgentSpec spec;
    spec.kind = ThresholdAgent{30.0, 2.0};
    spec.n_subjects = 20;
    const auto demos = population_demos(spec, cfg, true);
    TrainOptions one, four;
    one.threads = 1;
    four.threads = 4;
    const auto a = train(demos, cfg, one);
    const auto b = train(demos, cfg, four);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Train, Errors) {
    const BartConfig cfg = config(8);
    EXPECT_THROW(train({}, cfg), DomainError);
    std::mt19937_64 rng(9);
    const std::vector<Demonstration> demos = {random_demo(rng, 8)};
    TrainOptions bad;
    bad.learning_rate = 0.0;
    EXPECT_THROW(train(demos, cfg, bad), DomainError);
    EXPECT_THROW(train(demos, config(9)), DomainError);
    EXPECT_EQ(parse_optimizer("gradient"), Optimizer::GradientAscent);
    EXPECT_THROW(parse_optimizer("adam"), DomainError);
}

}  // namespace
}  // namespace bart
