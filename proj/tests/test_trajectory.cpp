#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "bart/errors.hpp"
#include "bart/trajectory.hpp"
#include "test_support.hpp"

namespace bart {
namespace {

ParsedData parse(const std::string& text, bool strict = false) {
    std::istringstream in(text);
    return parse_sessions(in, ParseOptions{strict});
}

TrialRecord trial(const std::string& id, int index, Outcome o, int pumps, bool practice = false) {
    TrialRecord t;
    t.subject_id = id;
    t.trial_index = index;
    t.practice = practice;
    t.outcome = o;
    t.num_pumps = pumps;
    return t;
}

Session session(const std::string& id, const std::vector<std::pair<Outcome, int>>& trials) {
    Session s;
    s.subject_id = id;
    for (std::size_t k = 0; k < trials.size(); ++k) {
        s.trials.push_back(trial(id, static_cast<int>(k), trials[k].first, trials[k].second));
    }
    return s;
}

/// A subject with no practice and `pumps` cash trials.
Session cash_subject(const std::string& id, std::initializer_list<int> pumps) {
    std::vector<std::pair<Outcome, int>> t;
    for (int p : pumps) t.emplace_back(Outcome::Cash, p);
    Session s = session(id, t);
    s.config.practice_trials = 0;
    return s;
}

TEST(Parse, SingleCashLine) {
    const auto d = parse(R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":12})");
    ASSERT_EQ(d.sessions.size(), 1u);
    ASSERT_EQ(d.sessions[0].trials.size(), 1u);
    EXPECT_EQ(d.sessions[0].trials[0].num_pumps, 12);
    EXPECT_EQ(d.sessions[0].config, BartConfig{});
}

TEST(Parse, BurstWithZeroPumps) {
    try {
        parse(R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"burst","num_pumps":0})");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "num_pumps");
        EXPECT_EQ(e.rule(), "Burst requires num_pumps ≥ 1");
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(Parse, BurstBreakpointMismatch) {
    EXPECT_THROW(
        parse(R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"burst","num_pumps":9,"breakpoint":10})"),
        ValidationError);
}

TEST(Parse, ConfigLine) {
    const auto d = parse(
        "{\"config\":{\"max_state\":8,\"points_per_pump\":5,\"formal_trials\":2,\"practice_trials\":0}}\n"
        R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"burst","num_pumps":8})");
    EXPECT_EQ(d.config.max_state, 8);
    EXPECT_EQ(d.sessions[0].config.points_per_pump, 5);
}

TEST(Parse, ConfigAfterTrialsIsAnError) {
    EXPECT_THROW(parse(R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1})"
                       "\n{\"config\":{\"max_state\":8}}"),
                 ParseError);
}

TEST(Parse, MalformedJsonCitesLine) {
    try {
        parse(R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1})"
              "\n{not json");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Parse, UnknownKeysWarnOrFail) {
    const std::string line =
        R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1,"mood":"ok"})";
    const auto d = parse(line);
    ASSERT_EQ(d.warnings.size(), 1u);
    EXPECT_NE(d.warnings[0].find("mood"), std::string::npos);
    EXPECT_THROW(parse(line, true), ParseError);
}

TEST(Parse, NullOptionalFieldsAreAbsent) {
    const auto d = parse(
        R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1,"breakpoint":null,"reaction_times_ms":null})");
    EXPECT_FALSE(d.sessions[0].trials[0].breakpoint);
    EXPECT_FALSE(d.sessions[0].trials[0].reaction_times_ms);
}

TEST(Parse, GroupsAndOrdersTrials) {
    const auto d = parse(R"({"subject_id":"b","trial_index":1,"practice":false,"outcome":"cash","num_pumps":3})"
                         "\n"
                         R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1})"
                         "\n"
                         R"({"subject_id":"b","trial_index":0,"practice":true,"outcome":"cash","num_pumps":2})");
    ASSERT_EQ(d.sessions.size(), 2u);
    EXPECT_EQ(d.sessions[0].subject_id, "b");
    EXPECT_EQ(d.sessions[0].trials[0].num_pumps, 2);
    EXPECT_EQ(d.sessions[0].trials[1].num_pumps, 3);
}

TEST(Parse, DuplicateAndGapIndices) {
    const std::string a0 = R"({"subject_id":"a","trial_index":0,"practice":false,"outcome":"cash","num_pumps":1})";
    const std::string a2 = R"({"subject_id":"a","trial_index":2,"practice":false,"outcome":"cash","num_pumps":1})";
    EXPECT_THROW(parse(a0 + "\n" + a0), ValidationError);
    EXPECT_THROW(parse(a0 + "\n" + a2), ValidationError);
}

TEST(Validate, RecordRules) {
    const BartConfig cfg;
    auto t = trial("a", 0, Outcome::Cash, 5);
    EXPECT_NO_THROW(validate_record(t, cfg));

    auto bad = t;
    bad.num_pumps = -1;
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad = t;
    bad.num_pumps = 128;  // a cash after 128 pumps is impossible, pump 128 always bursts
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad = t;
    bad.breakpoint = 5;
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad = t;
    bad.breakpoint = 129;
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad = t;
    bad.reaction_times_ms = std::vector<double>(5, 100.0);  // needs 6: five pumps and the cash press
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad.reaction_times_ms = std::vector<double>(6, 100.0);
    EXPECT_NO_THROW(validate_record(bad, cfg));
    (*bad.reaction_times_ms)[2] = -1.0;
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
    bad = t;
    bad.subject_id.clear();
    EXPECT_THROW(validate_record(bad, cfg), ValidationError);
}

TEST(Serialize, RoundTripRandomSessions) {
    std::mt19937_64 rng(5);
    BartConfig cfg;
    std::vector<Session> sessions;
    for (int k = 0; k < 50; ++k) sessions.push_back(testing::random_session(rng, "s" + std::to_string(k), cfg, 31));
    std::ostringstream out;
    serialize_sessions(out, sessions);
    const auto back = parse(out.str(), true);
    EXPECT_EQ(back.sessions, sessions);
    std::ostringstream again;
    serialize_sessions(again, back.sessions);
    EXPECT_EQ(again.str(), out.str());
}

TEST(Serialize, RejectsMixedConfigs) {
    auto a = session("a", {{Outcome::Cash, 1}});
    auto b = session("b", {{Outcome::Cash, 1}});
    b.config.max_state = 8;
    std::ostringstream out;
    EXPECT_THROW(serialize_sessions(out, {a, b}), DomainError);
}

TEST(Stats, TwoTrials) {
    const auto s = cash_subject("a", {});
    Session x = s;
    x.trials = {trial("a", 0, Outcome::Cash, 10), trial("a", 1, Outcome::Burst, 20)};
    const auto st = behavioral_stats({x});
    EXPECT_DOUBLE_EQ(st.mean_pumps, 15.0);
    EXPECT_DOUBLE_EQ(st.cash_rate, 0.5);
    EXPECT_DOUBLE_EQ(st.mean_payoff, 50.0);
    EXPECT_DOUBLE_EQ(st.mean_total_payoff_per_subject, 100.0);
    EXPECT_EQ(st.n_trials, 2);
    EXPECT_FALSE(st.mean_rt_per_trial);
}

TEST(Stats, PracticeExcluded) {
    Session s;
    s.subject_id = "a";
    s.trials = {trial("a", 0, Outcome::Burst, 100, true), trial("a", 1, Outcome::Cash, 4)};
    const auto st = behavioral_stats({s});
    EXPECT_DOUBLE_EQ(st.cash_rate, 1.0);
    EXPECT_DOUBLE_EQ(st.mean_pumps, 4.0);
    EXPECT_EQ(st.n_trials, 1);
}

TEST(Stats, ReactionTimes) {
    Session s;
    s.subject_id = "a";
    auto t0 = trial("a", 0, Outcome::Cash, 1);
    t0.reaction_times_ms = std::vector<double>{1000.0, 3000.0};
    auto t1 = trial("a", 1, Outcome::Burst, 2);
    t1.reaction_times_ms = std::vector<double>{500.0, 1500.0};
    s.trials = {t0, t1};
    const auto st = behavioral_stats({s});
    ASSERT_TRUE(st.mean_rt_per_trial);
    EXPECT_DOUBLE_EQ(*st.mean_rt_per_trial, 3.0);  // (4 s + 2 s) / 2 trials
    EXPECT_DOUBLE_EQ(*st.mean_rt_per_pump, 1.5);   // 6 s / 4 presses
}

TEST(Stats, EmptyIsDomainError) {
    EXPECT_THROW(behavioral_stats({}), DomainError);
    Session s;
    s.subject_id = "a";
    s.trials = {trial("a", 0, Outcome::Cash, 4, true)};
    EXPECT_THROW(behavioral_stats({s}), DomainError);
}

TEST(Stats, PermutationInvariant) {
    std::mt19937_64 rng(8);
    std::vector<Session> sessions;
    for (int k = 0; k < 6; ++k) sessions.push_back(testing::random_session(rng, "s" + std::to_string(k), {}, 11));
    const auto a = behavioral_stats(sessions);
    std::reverse(sessions.begin(), sessions.end());
    const auto b = behavioral_stats(sessions);
    EXPECT_NEAR(a.mean_pumps, b.mean_pumps, 1e-12);
    EXPECT_NEAR(a.mean_payoff, b.mean_payoff, 1e-12);
    EXPECT_EQ(a.cash_rate, b.cash_rate);
}

TEST(MedianSplit, FourSubjects) {
    const std::vector<Session> s = {cash_subject("a", {10}), cash_subject("b", {20}), cash_subject("c", {30}),
                                    cash_subject("d", {40})};
    const auto g = median_split(s);
    EXPECT_DOUBLE_EQ(g.median, 25.0);
    EXPECT_EQ(g.risk_prone, (std::set<std::string>{"c", "d"}));
    EXPECT_EQ(g.risk_averse, (std::set<std::string>{"a", "b"}));
}

TEST(MedianSplit, TiesAreRiskAverse) {
    const std::vector<Session> s = {cash_subject("a", {10}), cash_subject("b", {20}), cash_subject("c", {20})};
    const auto g = median_split(s);
    EXPECT_DOUBLE_EQ(g.median, 20.0);
    EXPECT_TRUE(g.risk_prone.empty());
    EXPECT_EQ(g.risk_averse.size(), 3u);
}

TEST(MedianSplit, NeedsTwoSubjects) {
    try {
        median_split({cash_subject("a", {1})});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_STREQ(e.what(), "median split requires ≥ 2 subjects");
    }
}

TEST(MedianSplit, Partitions) {
    std::mt19937_64 rng(3);
    std::vector<Session> sessions;
    for (int k = 0; k < 9; ++k) sessions.push_back(testing::random_session(rng, "s" + std::to_string(k), {}, 7));
    const auto g = median_split(sessions);
    EXPECT_EQ(g.risk_prone.size() + g.risk_averse.size(), 9u);
    for (const auto& id : g.risk_prone) EXPECT_EQ(g.risk_averse.count(id), 0u);
}

TEST(TrainTestSplit, InterleavedAndFirstHalf) {
    std::vector<std::pair<Outcome, int>> t(30, {Outcome::Cash, 3});
    Session s = session("a", t);
    s.config.practice_trials = 0;
    const auto inter = train_test_split({s}, SplitScheme::Interleaved);
    ASSERT_EQ(inter.train.size(), 15u);
    ASSERT_EQ(inter.test.size(), 15u);
    for (std::size_t k = 0; k < 15; ++k) {
        EXPECT_EQ(inter.train[k].trial, 2 * k);
        EXPECT_EQ(inter.test[k].trial, 2 * k + 1);
    }
    const auto first = train_test_split({s}, SplitScheme::FirstHalf);
    ASSERT_EQ(first.train.size(), 15u);
    EXPECT_EQ(first.train.back().trial, 14u);
    EXPECT_EQ(first.test.front().trial, 15u);
}

TEST(TrainTestSplit, SingleTrial) {
    Session s = session("a", {{Outcome::Cash, 1}});
    for (auto scheme : {SplitScheme::Interleaved, SplitScheme::FirstHalf}) {
        const auto sp = train_test_split({s}, scheme);
        EXPECT_EQ(sp.train.size(), 1u);
        EXPECT_TRUE(sp.test.empty());
    }
}

TEST(TrainTestSplit, SkipsPracticeAndCoversScored) {
    std::mt19937_64 rng(4);
    std::vector<Session> sessions;
    for (int k = 0; k < 5; ++k) sessions.push_back(testing::random_session(rng, "s" + std::to_string(k), {}, 31));
    for (auto scheme : {SplitScheme::Interleaved, SplitScheme::FirstHalf}) {
        const auto sp = train_test_split(sessions, scheme);
        std::set<TrialRef> all(sp.train.begin(), sp.train.end());
        for (const auto& r : sp.test) EXPECT_TRUE(all.insert(r).second);
        const auto scored = scored_trials(sessions);
        EXPECT_EQ(all, std::set<TrialRef>(scored.begin(), scored.end()));
        for (const auto& r : all) EXPECT_FALSE(sessions[r.session].trials[r.trial].practice);
    }
}

TEST(SplitScheme, Names) {
    EXPECT_EQ(parse_split_scheme("first-half"), SplitScheme::FirstHalf);
    EXPECT_EQ(to_string(SplitScheme::Interleaved), "interleaved");
    EXPECT_THROW(parse_split_scheme("random"), DomainError);
}

}  // namespace
}  // namespace bart
