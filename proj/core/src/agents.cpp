#include "bart/agents.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "bart/errors.hpp"
#include "bart/parallel.hpp"
#include "bart/task.hpp"

namespace bart {

namespace {

/// log(1 / (1 + exp(-y))) without overflow.
double log_sigmoid(double y) noexcept {
    return y < 0.0 ? y - std::log1p(std::exp(y)) : -std::log1p(std::exp(-y));
}

std::vector<double> parse_reals(const std::string& body, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw DomainError("agent spec '" + text + "': '" + item + "' is not a number");
        }
        if (used != item.size() || !std::isfinite(v)) {
            throw DomainError("agent spec '" + text + "': '" + item + "' is not a finite number");
        }
        out.push_back(v);
    }
    if (!body.empty() && body.back() == ',') throw DomainError("agent spec '" + text + "': trailing comma");
    return out;
}

}  // namespace

std::variant<MaxEntAgent, ThresholdAgent> parse_agent_kind(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw DomainError("agent spec '" + text + "' must be threshold:<tau>,<softness> or maxent:<11 reals>");
    }
    const std::string name = text.substr(0, colon);
    const auto values = parse_reals(text.substr(colon + 1), text);
    if (name == "threshold") {
        if (values.size() != 2) throw DomainError("threshold agent needs <tau>,<softness>");
        if (!(values[1] > 0.0)) throw DomainError("threshold softness must be > 0");
        return ThresholdAgent{values[0], values[1]};
    }
    if (name == "maxent") {
        if (values.size() != kNumFeatures) {
            throw DomainError("maxent agent needs " + std::to_string(kNumFeatures) + " weights, got " +
                              std::to_string(values.size()));
        }
        MaxEntAgent a;
        std::copy(values.begin(), values.end(), a.theta.begin());
        return a;
    }
    throw DomainError("unknown agent kind '" + name + "' (threshold|maxent)");
}

std::string describe_agent_kind(const std::variant<MaxEntAgent, ThresholdAgent>& kind) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (const auto* t = std::get_if<ThresholdAgent>(&kind)) {
        os << "threshold:" << t->tau << ',' << t->softness;
    } else {
        const auto& m = std::get<MaxEntAgent>(kind);
        os << "maxent:";
        for (std::size_t k = 0; k < kNumFeatures; ++k) os << (k ? "," : "") << m.theta[k];
    }
    return os.str();
}

void validate_agent(const AgentSpec& spec, const BartConfig& cfg) {
    cfg.validate();
    if (spec.n_subjects < 1) throw DomainError("n_subjects must be >= 1");
    if (spec.trials_per_subject < 1) throw DomainError("trials_per_subject must be >= 1");
    if (const auto* t = std::get_if<ThresholdAgent>(&spec.kind)) {
        if (!(t->softness > 0.0)) throw DomainError("threshold softness must be > 0");
        if (!(t->tau >= 1.0 && t->tau <= cfg.max_state)) {
            throw DomainError("threshold tau must lie in [1, max_state]");
        }
    } else {
        for (double w : std::get<MaxEntAgent>(spec.kind).theta) {
            if (!std::isfinite(w)) throw DomainError("maxent theta must be finite");
        }
    }
}

double threshold_pump_probability(const ThresholdAgent& agent, int i) noexcept {
    return std::exp(log_sigmoid(-(i - agent.tau) / agent.softness));
}

PolicyTable agent_policy(const AgentSpec& spec, const HistoryContext& ctx, const BartConfig& cfg) {
    if (const auto* t = std::get_if<ThresholdAgent>(&spec.kind)) {
        PolicyTable pol;
        pol.log_pump.resize(static_cast<std::size_t>(cfg.max_state));
        pol.log_stop.resize(static_cast<std::size_t>(cfg.max_state));
        for (int i = 1; i <= cfg.max_state; ++i) {
            const double x = (i - t->tau) / t->softness;
            pol.log_pump[static_cast<std::size_t>(i - 1)] = log_sigmoid(-x);
            pol.log_stop[static_cast<std::size_t>(i - 1)] = log_sigmoid(x);
        }
        return pol;
    }
    const auto& m = std::get<MaxEntAgent>(spec.kind);
    return soft_backward(m.theta, feature_matrix(ctx, m.features), cfg);
}

std::vector<Session> generate_population(const AgentSpec& spec, const BartConfig& base_cfg,
                                         std::size_t threads) {
    validate_agent(spec, base_cfg);
    BartConfig cfg = base_cfg;
    cfg.formal_trials = spec.trials_per_subject;

    const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.n_subjects - 1).size()));
    const bool history_free = std::holds_alternative<ThresholdAgent>(spec.kind);
    std::vector<double> fixed_policy;
    if (history_free) fixed_policy = agent_policy(spec, HistoryContext{}, cfg).pump_probs();

    std::vector<Session> out(static_cast<std::size_t>(spec.n_subjects));
    parallel_for(out.size(), threads, [&](std::size_t k) {
        std::ostringstream id;
        id << spec.id_prefix << std::setw(width) << std::setfill('0') << k;
        Session& s = out[k];
        s.subject_id = id.str();
        s.config = cfg;
        std::mt19937_64 rng(derive_seed(spec.seed, k));
        HistoryBuilder history(cfg.max_state);
        const int total = cfg.practice_trials + cfg.formal_trials;
        s.trials.reserve(static_cast<std::size_t>(total));
        for (int t = 0; t < total; ++t) {
            TrialRecord rec = history_free
                                  ? simulate_trial(fixed_policy, rng, cfg)
                                  : simulate_trial(agent_policy(spec, history.context(), cfg).pump_probs(),
                                                   rng, cfg);
            rec.subject_id = s.subject_id;
            rec.trial_index = t;
            rec.practice = t < cfg.practice_trials;
            history.add(rec);
            s.trials.push_back(std::move(rec));
        }
    });
    return out;
}

}  // namespace bart
