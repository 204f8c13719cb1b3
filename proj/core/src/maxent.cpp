#include "bart/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "bart/errors.hpp"
#include "bart/parallel.hpp"

namespace bart {

namespace {

using Vec = Eigen::Matrix<double, kNumFeatures, 1>;
using Mat = Eigen::Matrix<double, kNumFeatures, kNumFeatures>;

double log_add_exp(double a, double b) noexcept {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double hazard(int i, int max_state) noexcept { return 1.0 / static_cast<double>(max_state + 1 - i); }

void check_theta(const ThetaWeights& theta) {
    for (double w : theta) {
        if (!std::isfinite(w)) throw DomainError("theta must be finite");
    }
}

void check_matrix(const FeatureMatrix& m, const BartConfig& cfg) {
    if (m.max_state() != cfg.max_state) {
        throw DomainError("feature matrix covers " + std::to_string(m.max_state()) +
                          " states, config has " + std::to_string(cfg.max_state));
    }
}

void check_demo(const Demonstration& d, const BartConfig& cfg) {
    check_matrix(d.features, cfg);
    if (d.visited() < 1 || d.visited() > cfg.max_state) {
        throw DomainError("demonstration visits " + std::to_string(d.visited()) +
                          " states, outside [1, max_state]");
    }
}

/// Backward pass that also returns V(1).
double backward(const ThetaWeights& theta, const FeatureMatrix& features, int n, PolicyTable& pol) {
    pol.log_pump.assign(static_cast<std::size_t>(n), 0.0);
    pol.log_stop.assign(static_cast<std::size_t>(n), 0.0);
    double v_next = 0.0;  // V(i+1); the pump from max_state bursts surely
    for (int i = n; i >= 1; --i) {
        const double q_pump = (1.0 - hazard(i, n)) * v_next;
        const double z = log_add_exp(0.0, q_pump);
        pol.log_pump[static_cast<std::size_t>(i - 1)] = q_pump - z;
        pol.log_stop[static_cast<std::size_t>(i - 1)] = -z;
        v_next = dot(theta, features.row(i)) + z;
    }
    return v_next;
}

/// Everything one trial contributes to objective, gradient and Hessian.
struct TrialTerms {
    double value = 0.0;  // V(1)
    double ll_action = 0.0;
    double ll_transitions = 0.0;
    FeatureVector expected{};
    Mat hessian = Mat::Zero();  // of V(1)
};

TrialTerms trial_terms(const ThetaWeights& theta, const Demonstration& demo,
                       const BartConfig& cfg, bool with_hessian) {
    TrialTerms out;
    const int n = cfg.max_state;
    PolicyTable policy;
    out.value = backward(theta, demo.features, n, policy);
    const VisitationVector vis = forward_visitation(policy, cfg);
    for (int i = 1; i <= n; ++i) {
        const double d = vis.D(i);
        if (d == 0.0) break;
        const auto& f = demo.features.row(i);
        for (std::size_t k = 0; k < kNumFeatures; ++k) out.expected[k] += d * f[k];
    }
    out.ll_action = trajectory_log_likelihood(policy, demo, cfg, false);
    out.ll_transitions = trajectory_log_likelihood(policy, demo, cfg, true);

    if (with_hessian) {
        // F(i) = dV(i)/dtheta, the expected feature sum from i onwards, and
        // d2V(i) = pi_p pi_s (1-p)^2 F(i+1) F(i+1)^T + pi_p (1-p) d2V(i+1).
        Vec future = Vec::Zero();
        for (int i = n; i >= 1; --i) {
            const double p = hazard(i, n);
            const double pump = policy.pump_prob(i);
            if (i < n) {
                const double w = vis.D(i) * pump * policy.stop_prob(i) * (1.0 - p) * (1.0 - p);
                if (w > 0.0) out.hessian.noalias() += w * future * future.transpose();
            }
            const auto& f = demo.features.row(i);
            future *= pump * (1.0 - p);
            for (std::size_t k = 0; k < kNumFeatures; ++k) future[static_cast<Eigen::Index>(k)] += f[k];
        }
    }
    return out;
}

struct Evaluation {
    double value = 0.0;           // mean V(1)
    double ll_action = 0.0;       // mean per trajectory
    double ll_transitions = 0.0;  // mean per trajectory
    FeatureVector expected{};     // mean per trajectory
    Mat hessian = Mat::Zero();
};

Evaluation evaluate(const ThetaWeights& theta, std::span<const Demonstration> demos,
                    const BartConfig& cfg, std::size_t threads, bool with_hessian) {
    check_theta(theta);
    if (demos.empty()) throw DomainError("need at least one demonstration");
    std::vector<TrialTerms> terms(demos.size());
    parallel_for(demos.size(), threads, [&](std::size_t k) {
        terms[k] = trial_terms(theta, demos[k], cfg, with_hessian);
    });
    // Reduction in trial order keeps results independent of the thread count.
    Evaluation ev;
    for (const auto& t : terms) {
        ev.value += t.value;
        ev.ll_action += t.ll_action;
        ev.ll_transitions += t.ll_transitions;
        for (std::size_t k = 0; k < kNumFeatures; ++k) ev.expected[k] += t.expected[k];
        if (with_hessian) ev.hessian += t.hessian;
    }
    const double n = static_cast<double>(demos.size());
    ev.value /= n;
    ev.ll_action /= n;
    ev.ll_transitions /= n;
    for (double& v : ev.expected) v /= n;
    ev.hessian /= n;
    return ev;
}

double l2_penalty(const ThetaWeights& theta, double lambda) noexcept {
    double s = 0.0;
    for (double w : theta) s += w * w;
    return 0.5 * lambda * s;
}

FeatureVector regularized_gradient(const FeatureVector& empirical, const Evaluation& ev,
                                   const ThetaWeights& theta, double lambda) noexcept {
    FeatureVector g{};
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        g[k] = empirical[k] - ev.expected[k] - lambda * theta[k];
    }
    return g;
}

}  // namespace

double dot(const ThetaWeights& theta, const FeatureVector& f) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < kNumFeatures; ++k) s += theta[k] * f[k];
    return s;
}

double inf_norm(const std::array<double, kNumFeatures>& v) noexcept {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double PolicyTable::pump_prob(int i) const {
    return std::exp(log_pump.at(static_cast<std::size_t>(i - 1)));
}

double PolicyTable::stop_prob(int i) const {
    return std::exp(log_stop.at(static_cast<std::size_t>(i - 1)));
}

std::vector<double> PolicyTable::pump_probs() const {
    std::vector<double> out(log_pump.size());
    std::transform(log_pump.begin(), log_pump.end(), out.begin(), [](double l) { return std::exp(l); });
    return out;
}

PolicyTable soft_backward(const ThetaWeights& theta, const FeatureMatrix& features,
                          const BartConfig& cfg) {
    check_theta(theta);
    check_matrix(features, cfg);
    PolicyTable pol;
    backward(theta, features, cfg.max_state, pol);
    return pol;
}

double soft_value(const ThetaWeights& theta, const FeatureMatrix& features, const BartConfig& cfg) {
    check_theta(theta);
    check_matrix(features, cfg);
    PolicyTable pol;
    return backward(theta, features, cfg.max_state, pol);
}

VisitationVector forward_visitation(const PolicyTable& policy, const BartConfig& cfg) {
    const int n = cfg.max_state;
    if (policy.max_state() != n) throw DomainError("policy does not match max_state");
    VisitationVector v;
    v.visits.assign(static_cast<std::size_t>(n), 0.0);
    v.cash_mass.assign(static_cast<std::size_t>(n), 0.0);
    v.burst_mass.assign(static_cast<std::size_t>(n), 0.0);
    double d = 1.0;
    for (int i = 1; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        const double p = hazard(i, n);
        const double pump = policy.pump_prob(i);
        v.visits[k] = d;
        v.cash_mass[k] = d * policy.stop_prob(i);
        v.burst_mass[k] = d * pump * p;
        d = i == n ? 0.0 : d * pump * (1.0 - p);
    }
    return v;
}

std::vector<Demonstration> make_demonstrations(const std::vector<Session>& sessions,
                                               std::span<const TrialRef> refs,
                                               const FeatureOptions& opts) {
    std::vector<std::vector<FeatureMatrix>> cache(sessions.size());
    std::vector<Demonstration> out;
    out.reserve(refs.size());
    for (const auto& ref : refs) {
        const Session& s = sessions.at(ref.session);
        auto& mats = cache[ref.session];
        if (mats.empty()) mats = session_feature_matrices(s, opts);
        const TrialRecord& t = s.trials.at(ref.trial);
        out.push_back({mats.at(ref.trial), t.outcome, t.num_pumps});
    }
    return out;
}

FeatureVector empirical_feature_expectation(std::span<const Demonstration> demos) {
    if (demos.empty()) throw DomainError("empirical feature expectation of an empty set");
    FeatureVector sum{};
    for (const auto& d : demos) {
        for (int i = 1; i <= d.visited(); ++i) {
            const auto& f = d.features.row(i);
            for (std::size_t k = 0; k < kNumFeatures; ++k) sum[k] += f[k];
        }
    }
    for (double& v : sum) v /= static_cast<double>(demos.size());
    return sum;
}

FeatureVector expected_feature_expectation(const ThetaWeights& theta,
                                           std::span<const Demonstration> demos,
                                           const BartConfig& cfg, std::size_t threads) {
    return evaluate(theta, demos, cfg, threads, false).expected;
}

double training_objective(const ThetaWeights& theta, std::span<const Demonstration> demos,
                          const BartConfig& cfg, std::size_t threads) {
    const FeatureVector emp = empirical_feature_expectation(demos);
    return dot(theta, emp) - evaluate(theta, demos, cfg, threads, false).value;
}

FeatureVector gradient(const ThetaWeights& theta, std::span<const Demonstration> demos,
                       const BartConfig& cfg, std::size_t threads) {
    const FeatureVector emp = empirical_feature_expectation(demos);
    return regularized_gradient(emp, evaluate(theta, demos, cfg, threads, false), theta, 0.0);
}

double trajectory_log_likelihood(const PolicyTable& policy, const Demonstration& demo,
                                 const BartConfig& cfg, bool include_transitions) {
    check_demo(demo, cfg);
    const int end = demo.visited();
    double ll = 0.0;
    for (int j = 1; j < end; ++j) {
        ll += policy.log_pump[static_cast<std::size_t>(j - 1)];
        if (include_transitions) ll += std::log1p(-hazard(j, cfg.max_state));
    }
    if (demo.outcome == Outcome::Cash) {
        ll += policy.log_stop[static_cast<std::size_t>(end - 1)];
    } else {
        ll += policy.log_pump[static_cast<std::size_t>(end - 1)];
        if (include_transitions) ll += std::log(hazard(end, cfg.max_state));
    }
    return ll;
}

double log_likelihood(const ThetaWeights& theta, std::span<const Demonstration> demos,
                      const BartConfig& cfg, bool include_transitions, std::size_t threads) {
    const auto s = evaluate_likelihood(theta, demos, cfg, threads);
    return include_transitions ? s.with_transitions : s.action_only;
}

LikelihoodSummary evaluate_likelihood(const ThetaWeights& theta,
                                      std::span<const Demonstration> demos,
                                      const BartConfig& cfg, std::size_t threads) {
    check_theta(theta);
    if (demos.empty()) throw DomainError("log-likelihood of an empty set");
    std::vector<std::pair<double, double>> lls(demos.size());
    parallel_for(demos.size(), threads, [&](std::size_t k) {
        const PolicyTable pol = soft_backward(theta, demos[k].features, cfg);
        lls[k] = {trajectory_log_likelihood(pol, demos[k], cfg, false),
                  trajectory_log_likelihood(pol, demos[k], cfg, true)};
    });
    LikelihoodSummary s;
    double a = 0.0, t = 0.0;
    for (std::size_t k = 0; k < demos.size(); ++k) {
        a += lls[k].first;
        t += lls[k].second;
        s.n_decisions += static_cast<std::size_t>(demos[k].visited());
    }
    s.n_trajectories = demos.size();
    s.action_only = a / static_cast<double>(s.n_trajectories);
    s.with_transitions = t / static_cast<double>(s.n_trajectories);
    s.action_only_per_decision = a / static_cast<double>(s.n_decisions);
    s.with_transitions_per_decision = t / static_cast<double>(s.n_decisions);
    return s;
}

Optimizer parse_optimizer(const std::string& name) {
    if (name == "gradient") return Optimizer::GradientAscent;
    if (name == "newton") return Optimizer::Newton;
    throw DomainError("unknown optimizer '" + name + "' (gradient|newton)");
}

std::string_view to_string(Optimizer o) noexcept {
    return o == Optimizer::GradientAscent ? "gradient" : "newton";
}

TrainReport train(std::span<const Demonstration> demos, const BartConfig& cfg,
                  const TrainOptions& opts) {
    if (demos.empty()) throw DomainError("training set is empty");
    if (!(opts.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (opts.max_iters < 0) throw DomainError("max_iters must be >= 0");
    if (opts.l2_lambda < 0.0) throw DomainError("l2_lambda must be >= 0");
    for (const auto& d : demos) check_demo(d, cfg);

    const std::size_t threads = worker_count(opts.threads);
    const bool newton = opts.optimizer == Optimizer::Newton;
    const FeatureVector empirical = empirical_feature_expectation(demos);

    TrainReport rep;
    rep.options = opts;
    rep.n_train = demos.size();
    ThetaWeights theta{};
    Evaluation ev = evaluate(theta, demos, cfg, threads, newton);
    const auto objective_at = [&](const ThetaWeights& t, const Evaluation& e) {
        return dot(t, empirical) - e.value - l2_penalty(t, opts.l2_lambda);
    };
    double objective = objective_at(theta, ev);
    if (!std::isfinite(objective)) throw TrainingError("objective is not finite at theta = 0");
    double step = opts.learning_rate;

    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const FeatureVector g = regularized_gradient(empirical, ev, theta, opts.l2_lambda);
        if (inf_norm(g) < opts.grad_tol_inf) {
            rep.converged = true;
            break;
        }

        FeatureVector direction = g;
        double scale = step;
        if (newton) {
            Vec gv;
            for (std::size_t k = 0; k < kNumFeatures; ++k) gv[static_cast<Eigen::Index>(k)] = g[k];
            // A feature that never varies leaves the Hessian singular; the
            // ridge keeps the solve defined without moving the other weights.
            Mat neg_h = ev.hessian + opts.l2_lambda * Mat::Identity();
            neg_h += (1e-12 * std::max(1.0, neg_h.trace())) * Mat::Identity();
            const Vec d = neg_h.ldlt().solve(gv);
            for (std::size_t k = 0; k < kNumFeatures; ++k) direction[k] = d[static_cast<Eigen::Index>(k)];
            if (!d.allFinite() || d.dot(gv) <= 0.0) direction = g;
            scale = 1.0;
        }

        // Halve until the step does not lower the objective. A non-finite
        // candidate counts as a decrease.
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            ThetaWeights cand = theta;
            bool finite = true;
            for (std::size_t k = 0; k < kNumFeatures; ++k) {
                cand[k] += scale * direction[k];
                finite = finite && std::isfinite(cand[k]);
            }
            if (finite) {
                Evaluation cand_ev = evaluate(cand, demos, cfg, threads, newton);
                const double cand_obj = objective_at(cand, cand_ev);
                if (std::isfinite(cand_obj) && cand_obj >= objective) {
                    theta = cand;
                    ev = std::move(cand_ev);
                    objective = cand_obj;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
            if (!newton) step = scale;
        }
        if (!accepted) {
            // No ascent direction left at floating-point resolution.
            ++it;
            break;
        }
    }

    const FeatureVector g = regularized_gradient(empirical, ev, theta, opts.l2_lambda);
    FeatureVector gap{};
    for (std::size_t k = 0; k < kNumFeatures; ++k) gap[k] = empirical[k] - ev.expected[k];

    rep.theta = theta;
    rep.iterations = it;
    rep.final_grad_inf_norm = inf_norm(g);
    if (!rep.converged && opts.max_iters > 0 && rep.final_grad_inf_norm < opts.grad_tol_inf) {
        rep.converged = true;
    }
    rep.moment_gap_inf_norm = inf_norm(gap);
    rep.objective = objective;
    rep.final_learning_rate = newton ? 1.0 : step;
    rep.train_lld_action_only = ev.ll_action;
    rep.train_lld_with_transitions = ev.ll_transitions;
    return rep;
}

}  // namespace bart
