#include "bart/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "bart/errors.hpp"

namespace bart {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kDescriptions = {
    "times in this state",
    "burst here in previous trial",
    "stopped here in previous trial",
    "burst here 2 trials back",
    "stopped here 2 trials back",
    "burst here 3 trials back",
    "stopped here 3 trials back",
    "average burst state",
    "average stop state",
    "average end state",
    "steps in current trial",
};

constexpr std::array<std::string_view, kNumFeatures> kLabels = {
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11"};

bool end_matches(const std::optional<EndEvent>& e, Outcome kind, int i, FeatureSemantics sem) {
    if (!e || e->kind != kind) return false;
    return sem == FeatureSemantics::Exact ? e->end_state == i : e->end_state <= i;
}

bool average_matches(const std::optional<double>& avg, int i) {
    return avg && round_half_up(*avg) == i;
}

}  // namespace

std::string_view feature_label(std::size_t k) { return kLabels.at(k); }
std::string_view feature_description(std::size_t k) { return kDescriptions.at(k); }

FeatureSemantics parse_feature_semantics(const std::string& name) {
    if (name == "exact") return FeatureSemantics::Exact;
    if (name == "threshold") return FeatureSemantics::Threshold;
    throw DomainError("unknown feature semantics '" + name + "' (exact|threshold)");
}

std::string_view to_string(FeatureSemantics s) noexcept {
    return s == FeatureSemantics::Exact ? "exact" : "threshold";
}

int round_half_up(double x) noexcept { return static_cast<int>(std::floor(x + 0.5)); }

HistoryBuilder::HistoryBuilder(int max_state) {
    ctx_.max_state = max_state;
    ctx_.visit_count.assign(static_cast<std::size_t>(max_state) + 1, 0);
}

void HistoryBuilder::add(const TrialRecord& t) {
    const int end = std::min(end_state(t), ctx_.max_state);
    for (int i = 1; i <= end; ++i) ++ctx_.visit_count[static_cast<std::size_t>(i)];
    ctx_.prev_end[2] = ctx_.prev_end[1];
    ctx_.prev_end[1] = ctx_.prev_end[0];
    ctx_.prev_end[0] = EndEvent{t.outcome, end};
    ++ctx_.prior_trials;
    end_sum_ += end;
    if (t.outcome == Outcome::Burst) {
        burst_sum_ += end;
        ++bursts_;
    } else {
        stop_sum_ += end;
        ++stops_;
    }
    ctx_.avg_end_state = end_sum_ / ctx_.prior_trials;
    if (bursts_ > 0) ctx_.avg_burst_state = burst_sum_ / bursts_;
    if (stops_ > 0) ctx_.avg_stop_state = stop_sum_ / stops_;
}

HistoryContext build_history(const Session& session, int trial_index) {
    if (trial_index < 0 || trial_index >= static_cast<int>(session.trials.size())) {
        throw DomainError("trial index " + std::to_string(trial_index) + " outside session of " +
                          std::to_string(session.trials.size()) + " trials");
    }
    HistoryBuilder acc(session.config.max_state);
    for (int k = 0; k < trial_index; ++k) acc.add(session.trials[static_cast<std::size_t>(k)]);
    return acc.context();
}

FeatureVector feature_vector(const HistoryContext& ctx, int i, const FeatureOptions& opts) {
    FeatureVector f{};
    f[0] = ctx.visits(i);
    for (std::size_t k = 0; k < 3; ++k) {
        f[1 + 2 * k] = end_matches(ctx.prev_end[k], Outcome::Burst, i, opts.semantics) ? 1.0 : 0.0;
        f[2 + 2 * k] = end_matches(ctx.prev_end[k], Outcome::Cash, i, opts.semantics) ? 1.0 : 0.0;
    }
    f[7] = average_matches(ctx.avg_burst_state, i) ? 1.0 : 0.0;
    f[8] = average_matches(ctx.avg_stop_state, i) ? 1.0 : 0.0;
    f[9] = average_matches(ctx.avg_end_state, i) ? 1.0 : 0.0;
    f[10] = i;
    if (opts.normalize) {
        f[0] = ctx.prior_trials > 0 ? f[0] / ctx.prior_trials : 0.0;
        f[10] = f[10] / ctx.max_state;
    }
    return f;
}

FeatureMatrix feature_matrix(const HistoryContext& ctx, const FeatureOptions& opts) {
    std::vector<FeatureVector> rows;
    rows.reserve(static_cast<std::size_t>(ctx.max_state));
    for (int i = 1; i <= ctx.max_state; ++i) rows.push_back(feature_vector(ctx, i, opts));
    return FeatureMatrix(std::move(rows));
}

FeatureMatrix trial_feature_matrix(const Session& session, int trial_index,
                                   const FeatureOptions& opts) {
    return feature_matrix(build_history(session, trial_index), opts);
}

std::vector<FeatureMatrix> session_feature_matrices(const Session& session,
                                                    const FeatureOptions& opts) {
    std::vector<FeatureMatrix> out;
    out.reserve(session.trials.size());
    HistoryBuilder acc(session.config.max_state);
    for (const auto& t : session.trials) {
        out.push_back(feature_matrix(acc.context(), opts));
        acc.add(t);
    }
    return out;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
    for (std::size_t k = 0; k < kNumFeatures; ++k) out << (k ? "," : "") << kLabels[k];
    out << '\n';
    for (const auto& row : m.rows()) {
        for (std::size_t k = 0; k < kNumFeatures; ++k) out << (k ? "," : "") << row[k];
        out << '\n';
    }
}

}  // namespace bart
