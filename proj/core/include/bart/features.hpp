#pragma once

// History-dependent state features. For trial t and decision state i the
// eleven features are:
//
//   f1   number of earlier trials that reached state i
//   f2   previous trial burst in state i        f3   previous trial cashed in state i
//   f4   2nd previous trial burst in state i    f5   2nd previous trial cashed in state i
//   f6   3rd previous trial burst in state i    f7   3rd previous trial cashed in state i
//   f8   i is the (rounded) average burst state of earlier trials
//   f9   i is the (rounded) average cash state of earlier trials
//   f10  i is the (rounded) average end state of earlier trials
//   f11  i itself (steps taken in the current trial)
//
// A trial's end state is the decision state where it ended: p+1 after a cash
// with p pumps, p after a burst on pump p.

#include <array>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "bart/record.hpp"

namespace bart {

inline constexpr std::size_t kNumFeatures = 11;

using FeatureVector = std::array<double, kNumFeatures>;

/// Short labels f1..f11 and human-readable descriptions.
std::string_view feature_label(std::size_t k);
std::string_view feature_description(std::size_t k);

enum class FeatureSemantics {
    /// rows 2-7 fire only at the exact state where the earlier trial ended
    Exact,
    /// rows 2-7 fire at every state at or beyond that end state
    Threshold,
};

FeatureSemantics parse_feature_semantics(const std::string& name);
std::string_view to_string(FeatureSemantics s) noexcept;

struct FeatureOptions {
    FeatureSemantics semantics = FeatureSemantics::Exact;
    /// Divide f1 by the number of earlier trials and f11 by max_state.
    bool normalize = false;

    bool operator==(const FeatureOptions&) const = default;
};

struct EndEvent {
    Outcome kind = Outcome::Cash;
    int end_state = 1;

    bool operator==(const EndEvent&) const = default;
};

struct HistoryContext {
    int max_state = 0;
    int prior_trials = 0;
    /// visit_count[i] for i in 1..max_state (index 0 unused).
    std::vector<int> visit_count;
    /// prev_end[0] is the previous trial, prev_end[2] the third previous.
    std::array<std::optional<EndEvent>, 3> prev_end;
    std::optional<double> avg_burst_state;
    std::optional<double> avg_stop_state;
    std::optional<double> avg_end_state;

    int visits(int i) const { return visit_count.at(static_cast<std::size_t>(i)); }
};

/// Folds trials into a HistoryContext one at a time.
class HistoryBuilder {
public:
    explicit HistoryBuilder(int max_state);

    void add(const TrialRecord& t);
    const HistoryContext& context() const noexcept { return ctx_; }

private:
    HistoryContext ctx_;
    double end_sum_ = 0.0, burst_sum_ = 0.0, stop_sum_ = 0.0;
    int bursts_ = 0, stops_ = 0;
};

/// Aggregates trials 0..trial_index-1 of the session, practice included.
HistoryContext build_history(const Session& session, int trial_index);

/// floor(x + 0.5)
int round_half_up(double x) noexcept;

FeatureVector feature_vector(const HistoryContext& ctx, int i, const FeatureOptions& opts = {});

/// Feature rows for states 1..max_state of one trial context.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(std::vector<FeatureVector> rows) : rows_(std::move(rows)) {}

    int max_state() const noexcept { return static_cast<int>(rows_.size()); }
    /// Row of decision state i (1-based).
    const FeatureVector& row(int i) const { return rows_.at(static_cast<std::size_t>(i - 1)); }
    FeatureVector& row(int i) { return rows_.at(static_cast<std::size_t>(i - 1)); }
    const std::vector<FeatureVector>& rows() const noexcept { return rows_; }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::vector<FeatureVector> rows_;
};

FeatureMatrix feature_matrix(const HistoryContext& ctx, const FeatureOptions& opts = {});

FeatureMatrix trial_feature_matrix(const Session& session, int trial_index,
                                   const FeatureOptions& opts = {});

/// Feature matrices for every trial of the session, built with one pass
/// over the history.
std::vector<FeatureMatrix> session_feature_matrices(const Session& session,
                                                    const FeatureOptions& opts = {});

/// CSV with header f1..f11, one row per state.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);

}  // namespace bart
