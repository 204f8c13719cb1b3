#include "bart/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "json.hpp"

#include "bart/errors.hpp"

namespace bart {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// validation

void validate_record(const TrialRecord& t, const BartConfig& cfg) {
    if (t.subject_id.empty()) throw ValidationError("subject_id", "must be non-empty");
    if (t.trial_index < 0) throw ValidationError("trial_index", "must be >= 0");
    if (t.num_pumps < 0 || t.num_pumps > cfg.max_state) {
        throw ValidationError("num_pumps", "must be in [0, " + std::to_string(cfg.max_state) + "]");
    }
    if (t.outcome == Outcome::Burst && t.num_pumps < 1) {
        throw ValidationError("num_pumps", "Burst requires num_pumps ≥ 1");
    }
    if (t.outcome == Outcome::Cash && t.num_pumps >= cfg.max_state) {
        throw ValidationError("num_pumps", "Cash requires num_pumps < max_state (pump " +
                                               std::to_string(cfg.max_state) +
                                               " always bursts)");
    }
    if (t.breakpoint) {
        const int bp = *t.breakpoint;
        if (bp < 1 || bp > cfg.max_state) {
            throw ValidationError("breakpoint",
                                  "must be in [1, " + std::to_string(cfg.max_state) + "]");
        }
        if (t.outcome == Outcome::Burst && bp != t.num_pumps) {
            throw ValidationError("breakpoint", "Burst requires breakpoint = num_pumps");
        }
        if (t.outcome == Outcome::Cash && bp <= t.num_pumps) {
            throw ValidationError("breakpoint", "Cash requires breakpoint > num_pumps");
        }
    }
    if (t.reaction_times_ms) {
        const auto& rts = *t.reaction_times_ms;
        const std::size_t expected =
            static_cast<std::size_t>(t.num_pumps) + (t.outcome == Outcome::Cash ? 1 : 0);
        if (rts.size() != expected) {
            throw ValidationError("reaction_times_ms",
                                  "needs one entry per key press (" + std::to_string(expected) +
                                      "), got " + std::to_string(rts.size()));
        }
        for (double rt : rts) {
            if (!std::isfinite(rt) || rt < 0.0) {
                throw ValidationError("reaction_times_ms", "entries must be finite and >= 0");
            }
        }
    }
}

void validate_session(const Session& s) {
    s.config.validate();
    for (std::size_t k = 0; k < s.trials.size(); ++k) {
        const auto& t = s.trials[k];
        validate_record(t, s.config);
        if (t.subject_id != s.subject_id) {
            throw ValidationError("subject_id", "trial subject '" + t.subject_id +
                                                    "' differs from session '" + s.subject_id +
                                                    "'");
        }
        if (t.trial_index != static_cast<int>(k)) {
            throw ValidationError("trial_index", "session '" + s.subject_id +
                                                     "' must have contiguous indices from 0; "
                                                     "expected " +
                                                     std::to_string(k));
        }
    }
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

int require_int(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
    if (!it->is_number_integer()) throw ParseError(line, std::string("'") + key + "' must be an integer");
    return it->get<int>();
}

BartConfig parse_config(const json& obj, std::size_t line, const ParseOptions& opts,
                        std::vector<std::string>& warnings) {
    if (!obj.is_object()) throw ParseError(line, "'config' must be an object");
    BartConfig cfg;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        int* slot = key == "max_state"         ? &cfg.max_state
                    : key == "points_per_pump" ? &cfg.points_per_pump
                    : key == "formal_trials"   ? &cfg.formal_trials
                    : key == "practice_trials" ? &cfg.practice_trials
                                               : nullptr;
        if (!slot) {
            if (opts.strict) throw ParseError(line, "unknown config key '" + key + "'");
            warnings.push_back("line " + std::to_string(line) + ": ignoring unknown config key '" +
                               key + "'");
            continue;
        }
        if (!it->is_number_integer()) throw ParseError(line, "config '" + key + "' must be an integer");
        *slot = it->get<int>();
    }
    try {
        cfg.validate();
    } catch (const DomainError& e) {
        throw ValidationError("config", e.what(), line);
    }
    return cfg;
}

TrialRecord parse_trial(const json& obj, std::size_t line, const ParseOptions& opts,
                        std::vector<std::string>& warnings) {
    static const std::set<std::string> known = {"subject_id", "trial_index",     "practice",
                                                "outcome",    "num_pumps",       "breakpoint",
                                                "reaction_times_ms"};
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (known.count(it.key())) continue;
        if (opts.strict) throw ParseError(line, "unknown key '" + it.key() + "'");
        warnings.push_back("line " + std::to_string(line) + ": ignoring unknown key '" + it.key() +
                           "'");
    }

    TrialRecord t;
    auto sid = obj.find("subject_id");
    if (sid == obj.end()) throw ParseError(line, "missing key 'subject_id'");
    if (!sid->is_string()) throw ParseError(line, "'subject_id' must be a string");
    t.subject_id = sid->get<std::string>();
    t.trial_index = require_int(obj, "trial_index", line);

    auto pr = obj.find("practice");
    if (pr == obj.end()) throw ParseError(line, "missing key 'practice'");
    if (!pr->is_boolean()) throw ParseError(line, "'practice' must be a boolean");
    t.practice = pr->get<bool>();

    auto oc = obj.find("outcome");
    if (oc == obj.end()) throw ParseError(line, "missing key 'outcome'");
    if (!oc->is_string()) throw ParseError(line, "'outcome' must be a string");
    const auto outcome = oc->get<std::string>();
    if (outcome == "cash") {
        t.outcome = Outcome::Cash;
    } else if (outcome == "burst") {
        t.outcome = Outcome::Burst;
    } else {
        throw ParseError(line, "'outcome' must be \"cash\" or \"burst\", got \"" + outcome + "\"");
    }
    t.num_pumps = require_int(obj, "num_pumps", line);

    if (auto bp = obj.find("breakpoint"); bp != obj.end() && !bp->is_null()) {
        if (!bp->is_number_integer()) throw ParseError(line, "'breakpoint' must be an integer");
        t.breakpoint = bp->get<int>();
    }
    if (auto rt = obj.find("reaction_times_ms"); rt != obj.end() && !rt->is_null()) {
        if (!rt->is_array()) throw ParseError(line, "'reaction_times_ms' must be an array");
        std::vector<double> rts;
        rts.reserve(rt->size());
        for (const auto& v : *rt) {
            if (!v.is_number()) throw ParseError(line, "'reaction_times_ms' entries must be numbers");
            rts.push_back(v.get<double>());
        }
        t.reaction_times_ms = std::move(rts);
    }
    return t;
}

}  // namespace

ParsedData parse_sessions(std::istream& in, const ParseOptions& opts) {
    ParsedData out;
    bool config_seen = false;
    bool trial_seen = false;

    struct Pending {
        TrialRecord rec;
        std::size_t line;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Pending>> by_subject;
    std::map<std::pair<std::string, int>, std::size_t> first_line;

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;

        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(line, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(line, "expected a JSON object");

        if (auto c = obj.find("config"); c != obj.end()) {
            if (config_seen || trial_seen) {
                throw ParseError(line, "config object must be the first line");
            }
            if (obj.size() != 1) throw ParseError(line, "config line must hold only 'config'");
            out.config = parse_config(*c, line, opts, out.warnings);
            config_seen = true;
            continue;
        }
        trial_seen = true;

        TrialRecord rec = parse_trial(obj, line, opts, out.warnings);
        try {
            validate_record(rec, out.config);
        } catch (const ValidationError& e) {
            throw e.at_line(line);
        }
        auto key = std::make_pair(rec.subject_id, rec.trial_index);
        if (auto [it, inserted] = first_line.emplace(key, line); !inserted) {
            throw ValidationError("trial_index",
                                  "duplicate (subject_id, trial_index) = ('" + rec.subject_id +
                                      "', " + std::to_string(rec.trial_index) +
                                      "), first seen on line " + std::to_string(it->second),
                                  line);
        }
        auto& bucket = by_subject[rec.subject_id];
        if (bucket.empty()) order.push_back(rec.subject_id);
        bucket.push_back({std::move(rec), line});
    }

    for (const auto& sid : order) {
        auto& bucket = by_subject[sid];
        std::sort(bucket.begin(), bucket.end(),
                  [](const Pending& a, const Pending& b) { return a.rec.trial_index < b.rec.trial_index; });
        Session s{sid, out.config, {}};
        s.trials.reserve(bucket.size());
        for (std::size_t k = 0; k < bucket.size(); ++k) {
            if (bucket[k].rec.trial_index != static_cast<int>(k)) {
                throw ValidationError("trial_index",
                                      "subject '" + sid +
                                          "' must have contiguous indices from 0; missing " +
                                          std::to_string(k),
                                      bucket[k].line);
            }
            s.trials.push_back(std::move(bucket[k].rec));
        }
        out.sessions.push_back(std::move(s));
    }
    return out;
}

ParsedData parse_sessions_file(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return parse_sessions(in, opts);
}

void serialize_sessions(std::ostream& out, const std::vector<Session>& sessions) {
    serialize_sessions(out, sessions, sessions.empty() ? BartConfig{} : sessions.front().config);
}

void serialize_sessions(std::ostream& out, const std::vector<Session>& sessions,
                        const BartConfig& cfg) {
    for (const auto& s : sessions) {
        if (!(s.config == cfg)) throw DomainError("sessions with different configs cannot share a file");
    }
    ordered_json head;
    head["config"] = ordered_json{{"max_state", cfg.max_state},
                                  {"points_per_pump", cfg.points_per_pump},
                                  {"formal_trials", cfg.formal_trials},
                                  {"practice_trials", cfg.practice_trials}};
    out << head.dump() << '\n';
    for (const auto& s : sessions) {
        for (const auto& t : s.trials) {
            ordered_json j;
            j["subject_id"] = t.subject_id;
            j["trial_index"] = t.trial_index;
            j["practice"] = t.practice;
            j["outcome"] = std::string(to_string(t.outcome));
            j["num_pumps"] = t.num_pumps;
            if (t.breakpoint) j["breakpoint"] = *t.breakpoint;
            if (t.reaction_times_ms) j["reaction_times_ms"] = *t.reaction_times_ms;
            out << j.dump() << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// statistics

std::optional<double> subject_mean_pumps(const Session& s) {
    double sum = 0.0;
    int n = 0;
    for (const auto& t : s.trials) {
        if (t.practice) continue;
        sum += t.num_pumps;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

BehavioralStats behavioral_stats(const std::vector<Session>& sessions) {
    BehavioralStats st;
    double pumps = 0.0, payoff = 0.0, cashes = 0.0;
    double rt_trial_sum = 0.0, rt_press_sum = 0.0;
    int rt_trials = 0;
    std::size_t rt_presses = 0;
    double subject_total_sum = 0.0;

    for (const auto& s : sessions) {
        bool has_scored = false;
        double subject_total = 0.0;
        for (const auto& t : s.trials) {
            if (t.practice) continue;
            has_scored = true;
            ++st.n_trials;
            pumps += t.num_pumps;
            const int pay = trial_payoff(t, s.config);
            payoff += pay;
            subject_total += pay;
            if (t.outcome == Outcome::Cash) cashes += 1.0;
            if (t.reaction_times_ms) {
                double secs = 0.0;
                for (double rt : *t.reaction_times_ms) secs += rt / 1000.0;
                rt_trial_sum += secs;
                rt_press_sum += secs;
                rt_presses += t.reaction_times_ms->size();
                ++rt_trials;
            }
        }
        if (has_scored) {
            ++st.n_subjects;
            subject_total_sum += subject_total;
        }
    }
    if (st.n_trials == 0) throw DomainError("behavioral statistics need at least one scored trial");

    st.mean_pumps = pumps / st.n_trials;
    st.cash_rate = cashes / st.n_trials;
    st.mean_payoff = payoff / st.n_trials;
    st.mean_total_payoff_per_subject = subject_total_sum / st.n_subjects;
    if (rt_trials > 0) st.mean_rt_per_trial = rt_trial_sum / rt_trials;
    if (rt_presses > 0) st.mean_rt_per_pump = rt_press_sum / static_cast<double>(rt_presses);
    return st;
}

GroupSplit median_split(const std::vector<Session>& sessions) {
    if (sessions.size() < 2) throw DomainError("median split requires ≥ 2 subjects");
    std::vector<std::pair<std::string, double>> means;
    means.reserve(sessions.size());
    for (const auto& s : sessions) {
        auto m = subject_mean_pumps(s);
        if (!m) throw DomainError("subject '" + s.subject_id + "' has no scored trials");
        means.emplace_back(s.subject_id, *m);
    }
    std::vector<double> values;
    values.reserve(means.size());
    for (const auto& [_, m] : means) values.push_back(m);
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    GroupSplit g;
    g.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    for (const auto& [id, m] : means) {
        (m > g.median ? g.risk_prone : g.risk_averse).insert(id);
    }
    return g;
}

std::vector<Session> select_subjects(const std::vector<Session>& sessions,
                                     const std::set<std::string>& ids) {
    std::vector<Session> out;
    for (const auto& s : sessions) {
        if (ids.count(s.subject_id)) out.push_back(s);
    }
    return out;
}

SplitScheme parse_split_scheme(const std::string& name) {
    if (name == "interleaved") return SplitScheme::Interleaved;
    if (name == "first-half") return SplitScheme::FirstHalf;
    throw DomainError("unknown split scheme '" + name + "' (interleaved|first-half)");
}

std::string_view to_string(SplitScheme s) noexcept {
    return s == SplitScheme::Interleaved ? "interleaved" : "first-half";
}

TrialSplit train_test_split(const std::vector<Session>& sessions, SplitScheme scheme) {
    TrialSplit out;
    for (std::size_t si = 0; si < sessions.size(); ++si) {
        std::vector<std::size_t> scored;
        for (std::size_t k = 0; k < sessions[si].trials.size(); ++k) {
            if (!sessions[si].trials[k].practice) scored.push_back(k);
        }
        const std::size_t n_train = (scored.size() + 1) / 2;
        for (std::size_t pos = 0; pos < scored.size(); ++pos) {
            const bool train =
                scheme == SplitScheme::Interleaved ? pos % 2 == 0 : pos < n_train;
            (train ? out.train : out.test).push_back({si, scored[pos]});
        }
    }
    return out;
}

std::vector<TrialRef> scored_trials(const std::vector<Session>& sessions) {
    std::vector<TrialRef> out;
    for (std::size_t si = 0; si < sessions.size(); ++si) {
        for (std::size_t k = 0; k < sessions[si].trials.size(); ++k) {
            if (!sessions[si].trials[k].practice) out.push_back({si, k});
        }
    }
    return out;
}

}  // namespace bart
