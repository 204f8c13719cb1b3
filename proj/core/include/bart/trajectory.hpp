#pragma once

// Trajectory data: JSONL reading/writing, validation, behavioral summary
// statistics, the median risk split and the train/test split.

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bart/record.hpp"

namespace bart {

struct ParseOptions {
    /// Reject unknown keys instead of warning about them.
    bool strict = false;
};

struct ParsedData {
    BartConfig config;
    std::vector<Session> sessions;  // in order of first appearance
    std::vector<std::string> warnings;
};

/// Reads JSONL trials (optionally preceded by a {"config": {...}} line),
/// validates every record and groups them into sessions ordered by
/// trial_index. Throws ParseError or ValidationError carrying the line.
ParsedData parse_sessions(std::istream& in, const ParseOptions& opts = {});
ParsedData parse_sessions_file(const std::string& path, const ParseOptions& opts = {});

/// Writes the config line followed by one line per trial. All sessions
/// must share one config.
void serialize_sessions(std::ostream& out, const std::vector<Session>& sessions);
void serialize_sessions(std::ostream& out, const std::vector<Session>& sessions,
                        const BartConfig& cfg);

struct BehavioralStats {
    double mean_pumps = 0.0;
    double cash_rate = 0.0;
    /// Mean points per scored trial.
    double mean_payoff = 0.0;
    /// Mean over subjects of the points banked across their scored trials.
    double mean_total_payoff_per_subject = 0.0;
    /// Seconds, over the scored trials that carry reaction times; per pump
    /// divides by every key press, the cash press included.
    std::optional<double> mean_rt_per_trial;
    std::optional<double> mean_rt_per_pump;
    int n_subjects = 0;
    int n_trials = 0;
};

/// Summary over non-practice trials. Throws DomainError when there are none.
BehavioralStats behavioral_stats(const std::vector<Session>& sessions);

/// Mean pump count over a session's scored trials (nullopt if it has none).
std::optional<double> subject_mean_pumps(const Session& s);

struct GroupSplit {
    double median = 0.0;
    std::set<std::string> risk_prone;
    std::set<std::string> risk_averse;
};

/// Subjects strictly above the median of subject mean pump counts are
/// risk-prone; the rest, including ties at the median, are risk-averse.
GroupSplit median_split(const std::vector<Session>& sessions);

/// Keeps only the sessions whose subject is in `ids` (order preserved).
std::vector<Session> select_subjects(const std::vector<Session>& sessions,
                                     const std::set<std::string>& ids);

enum class SplitScheme { Interleaved, FirstHalf };

SplitScheme parse_split_scheme(const std::string& name);
std::string_view to_string(SplitScheme s) noexcept;

/// Address of a trial inside a session vector.
struct TrialRef {
    std::size_t session = 0;
    std::size_t trial = 0;

    bool operator==(const TrialRef&) const = default;
    auto operator<=>(const TrialRef&) const = default;
};

struct TrialSplit {
    std::vector<TrialRef> train;
    std::vector<TrialRef> test;
};

/// Partitions each subject's scored trials 50/50. Interleaved sends even
/// positions (among scored trials) to train; first-half sends the first
/// ceil(n/2). Practice trials are never assigned.
TrialSplit train_test_split(const std::vector<Session>& sessions, SplitScheme scheme);

/// Every non-practice trial.
std::vector<TrialRef> scored_trials(const std::vector<Session>& sessions);

}  // namespace bart
