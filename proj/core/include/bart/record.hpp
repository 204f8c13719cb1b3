#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bart {

/// Task parameters. Defaults are the standard 128-breakpoint task with
/// one practice balloon and thirty scored balloons.
struct BartConfig {
    int max_state = 128;
    int points_per_pump = 10;
    int formal_trials = 30;
    int practice_trials = 1;

    /// Throws DomainError when an invariant is broken.
    void validate() const;

    bool operator==(const BartConfig&) const = default;
};

enum class Outcome { Cash, Burst };

std::string_view to_string(Outcome o) noexcept;

/// One balloon.
struct TrialRecord {
    std::string subject_id;
    int trial_index = 0;
    bool practice = false;
    Outcome outcome = Outcome::Cash;
    int num_pumps = 0;
    std::optional<int> breakpoint;
    std::optional<std::vector<double>> reaction_times_ms;

    bool operator==(const TrialRecord&) const = default;
};

/// A subject's ordered trials. trial_index runs 0..n-1.
struct Session {
    std::string subject_id;
    BartConfig config;
    std::vector<TrialRecord> trials;

    bool operator==(const Session&) const = default;
};

/// Points banked by a trial. Always derived from outcome and pump count.
inline int trial_payoff(const TrialRecord& t, const BartConfig& cfg) noexcept {
    return t.outcome == Outcome::Cash ? cfg.points_per_pump * t.num_pumps : 0;
}

/// Decision state in which the trial ended: a cash after p pumps ends in
/// state p+1, a burst after p pumps ends in state p.
inline int end_state(const TrialRecord& t) noexcept {
    return t.outcome == Outcome::Cash ? t.num_pumps + 1 : t.num_pumps;
}

/// Throws ValidationError naming the field and rule on the first violated
/// record invariant.
void validate_record(const TrialRecord& t, const BartConfig& cfg);

/// Record invariants plus session invariants (shared subject id, contiguous
/// trial indices).
void validate_session(const Session& s);

}  // namespace bart
