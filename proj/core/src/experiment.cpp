#include "bart/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "bart/errors.hpp"
#include "bart/parallel.hpp"

namespace bart {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// small helpers

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Grouping parse_grouping(const std::string& name) {
    if (name == "pooled") return Grouping::Pooled;
    if (name == "median") return Grouping::Median;
    if (name == "both") return Grouping::Both;
    if (name == "per-subject") return Grouping::PerSubject;
    throw DomainError("unknown grouping '" + name + "' (pooled|median|both|per-subject)");
}

std::string_view to_string(Grouping g) noexcept {
    switch (g) {
        case Grouping::Pooled: return "pooled";
        case Grouping::Median: return "median";
        case Grouping::Both: return "both";
        case Grouping::PerSubject: return "per-subject";
    }
    return "both";
}

const GroupModel* ExperimentReport::model(std::string_view group) const {
    for (const auto& m : models) {
        if (m.group == group) return &m;
    }
    return nullptr;
}

const LldRow* ExperimentReport::find_lld(std::string_view model, std::string_view eval_group,
                                         std::string_view subset) const {
    for (const auto& r : lld) {
        if (r.model == model && r.eval_group == eval_group && r.subset == subset) return &r;
    }
    return nullptr;
}

bool ExperimentReport::all_converged() const {
    return std::all_of(models.begin(), models.end(),
                       [](const GroupModel& m) { return m.report.converged; });
}

// ---------------------------------------------------------------------------
// running

std::vector<Session> load_sessions(const DataSource& source, std::vector<std::string>* warnings) {
    if (source.path) {
        ParsedData data = parse_sessions_file(*source.path, ParseOptions{source.strict});
        if (warnings) warnings->insert(warnings->end(), data.warnings.begin(), data.warnings.end());
        return std::move(data.sessions);
    }
    if (source.agents.empty()) throw DomainError("data source names neither a file nor agents");

    std::map<std::string, int> prefix_uses;
    for (const auto& a : source.agents) ++prefix_uses[a.id_prefix];
    std::vector<Session> out;
    for (std::size_t k = 0; k < source.agents.size(); ++k) {
        AgentSpec spec = source.agents[k];
        if (prefix_uses[spec.id_prefix] > 1) spec.id_prefix = "p" + std::to_string(k) + "_" + spec.id_prefix;
        auto pop = generate_population(spec, source.task, worker_count());
        std::move(pop.begin(), pop.end(), std::back_inserter(out));
    }
    return out;
}

namespace {

struct GroupData {
    std::string name;
    std::vector<Session> sessions;
    std::vector<Demonstration> train;
    std::vector<Demonstration> test;
};

GroupData make_group(std::string name, std::vector<Session> sessions, const ExperimentConfig& cfg) {
    GroupData g{std::move(name), std::move(sessions), {}, {}};
    const TrialSplit split = train_test_split(g.sessions, cfg.split);
    g.train = make_demonstrations(g.sessions, split.train, cfg.features);
    g.test = make_demonstrations(g.sessions, split.test, cfg.features);
    return g;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    std::vector<std::string> warnings;
    const auto sessions = load_sessions(cfg.source, &warnings);
    ExperimentReport rep = run_experiment(cfg, sessions);
    rep.warnings.insert(rep.warnings.begin(), warnings.begin(), warnings.end());
    if (cfg.output_dir) write_report_bundle(rep, sessions, *cfg.output_dir);
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<Session>& sessions) {
    if (sessions.empty()) throw DomainError("experiment needs at least one session");
    ExperimentReport rep;
    rep.config = cfg;
    rep.task = sessions.front().config;
    for (const auto& s : sessions) {
        validate_session(s);
        if (s.config.max_state != rep.task.max_state ||
            s.config.points_per_pump != rep.task.points_per_pump) {
            throw DomainError("sessions disagree on max_state or points_per_pump");
        }
    }
    const std::size_t threads = worker_count(cfg.train.threads);

    rep.behavior.push_back({std::string(kGroupAll), behavioral_stats(sessions)});

    std::vector<GroupData> models;  // groups that get their own model
    std::vector<GroupData> evals;   // groups scored by every model
    const bool pooled = cfg.grouping == Grouping::Pooled || cfg.grouping == Grouping::Both;
    const bool median = cfg.grouping == Grouping::Median || cfg.grouping == Grouping::Both;

    evals.push_back(make_group(std::string(kGroupAll), sessions, cfg));
    if (median) {
        rep.split = median_split(sessions);
        for (auto [name, ids] : {std::pair{kGroupProne, &rep.split->risk_prone},
                                 std::pair{kGroupAverse, &rep.split->risk_averse}}) {
            if (ids->empty()) throw DomainError("group " + std::string(name) + " has no subjects");
            auto subset = select_subjects(sessions, *ids);
            rep.behavior.push_back({std::string(name), behavioral_stats(subset)});
            evals.push_back(make_group(std::string(name), std::move(subset), cfg));
        }
    }
    if (pooled) models.push_back(evals.front());
    if (median) {
        models.push_back(evals[1]);
        models.push_back(evals[2]);
    }
    if (cfg.grouping == Grouping::PerSubject) {
        rep.warnings.push_back("per-subject training: each model sees only one subject's trials; "
                               "weights are poorly determined at this data size");
        for (const auto& s : sessions) models.push_back(make_group(s.subject_id, {s}, cfg));
    }

    for (const auto& g : models) {
        if (g.train.empty()) throw DomainError("group " + g.name + " has zero training trials");
        if (g.test.empty()) throw DomainError("group " + g.name + " has zero test trials");
    }
    for (const auto& g : evals) {
        if (g.test.empty()) throw DomainError("group " + g.name + " has zero test trials");
    }

    for (const auto& g : models) {
        GroupModel m{g.name, g.test.size(), train(g.train, rep.task, cfg.train)};
        if (!m.report.converged) {
            rep.warnings.push_back("model " + g.name + " did not converge: |grad|_inf = " +
                                   format_number(m.report.final_grad_inf_norm) + " after " +
                                   std::to_string(m.report.iterations) + " iterations");
        }
        rep.models.push_back(std::move(m));
    }

    for (const auto& m : rep.models) {
        std::vector<const GroupData*> targets;
        if (cfg.grouping == Grouping::PerSubject) {
            for (const auto& g : models) {
                if (g.name == m.group) targets.push_back(&g);
            }
        } else {
            for (const auto& g : evals) targets.push_back(&g);
        }
        for (const GroupData* g : targets) {
            rep.lld.push_back({m.group, g->name, "train",
                               evaluate_likelihood(m.report.theta, g->train, rep.task, threads)});
            rep.lld.push_back({m.group, g->name, "test",
                               evaluate_likelihood(m.report.theta, g->test, rep.task, threads)});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// weight tables

ThetaWeights WeightTable::difference(std::size_t a, std::size_t b) const {
    ThetaWeights d{};
    for (std::size_t k = 0; k < kNumFeatures; ++k) d[k] = weights.at(a)[k] - weights.at(b)[k];
    return d;
}

WeightTable weight_report(const std::vector<GroupModel>& models) {
    WeightTable t;
    for (const auto& m : models) {
        t.groups.push_back(m.group);
        t.weights.push_back(m.report.theta);
        std::vector<std::size_t> order(kNumFeatures);
        for (std::size_t k = 0; k < kNumFeatures; ++k) order[k] = k;
        const auto& w = m.report.theta;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(w[a]) > std::abs(w[b]); });
        t.ranking.push_back(std::move(order));
    }
    return t;
}

std::string weights_csv(const WeightTable& table) {
    std::ostringstream os;
    os << "feature,description";
    for (const auto& g : table.groups) os << ',' << g;
    for (const auto& g : table.groups) os << ",rank_" << g;
    os << '\n';
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        os << feature_label(k) << ",\"" << feature_description(k) << '"';
        for (const auto& w : table.weights) os << ',' << format_number(w[k]);
        for (const auto& r : table.ranking) {
            const auto pos = std::find(r.begin(), r.end(), k) - r.begin();
            os << ',' << pos + 1;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

ordered_json theta_array(const ThetaWeights& theta) {
    ordered_json arr = ordered_json::array();
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        arr.push_back(ordered_json{{"feature", feature_label(k)},
                                   {"description", feature_description(k)},
                                   {"weight", theta[k]}});
    }
    return arr;
}

ThetaWeights theta_from(const json& j) {
    const json* arr = &j;
    if (j.is_object()) {
        auto it = j.find("theta");
        if (it == j.end()) throw DomainError("theta JSON object needs a 'theta' key");
        arr = &*it;
    }
    if (!arr->is_array()) throw DomainError("theta JSON must be an array");
    if (arr->size() != kNumFeatures) {
        throw DomainError("theta has " + std::to_string(arr->size()) + " entries, expected " +
                          std::to_string(kNumFeatures));
    }
    ThetaWeights theta{};
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const json& e = (*arr)[k];
        if (e.is_number()) {
            theta[k] = e.get<double>();
        } else if (e.is_object() && e.contains("weight") && e["weight"].is_number()) {
            if (e.contains("feature") && e["feature"] != std::string(feature_label(k))) {
                throw DomainError("theta entry " + std::to_string(k) + " is labeled " +
                                  e["feature"].dump() + ", expected " + std::string(feature_label(k)));
            }
            theta[k] = e["weight"].get<double>();
        } else {
            throw DomainError("theta entry " + std::to_string(k) + " is not a weight");
        }
        if (!std::isfinite(theta[k])) throw DomainError("theta entries must be finite");
    }
    return theta;
}

}  // namespace

std::string weights_json(const WeightTable& table) {
    ordered_json j;
    ordered_json features = ordered_json::array();
    for (std::size_t k = 0; k < kNumFeatures; ++k) features.push_back(feature_label(k));
    j["features"] = features;
    ordered_json groups = ordered_json::object();
    for (std::size_t g = 0; g < table.groups.size(); ++g) {
        ordered_json ranking = ordered_json::array();
        for (auto k : table.ranking[g]) ranking.push_back(feature_label(k));
        groups[table.groups[g]] = ordered_json{{"theta", theta_array(table.weights[g])}, {"ranking", ranking}};
    }
    j["groups"] = groups;
    ordered_json diffs = ordered_json::object();
    for (std::size_t a = 0; a < table.groups.size(); ++a) {
        for (std::size_t b = a + 1; b < table.groups.size(); ++b) {
            const auto d = table.difference(a, b);
            diffs[table.groups[a] + " - " + table.groups[b]] = std::vector<double>(d.begin(), d.end());
        }
    }
    j["differences"] = diffs;
    return j.dump(2) + "\n";
}

std::string theta_json(const ThetaWeights& theta) { return theta_array(theta).dump(2) + "\n"; }

ThetaWeights parse_theta_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("theta file is not JSON: ") + e.what());
    }
    return theta_from(j);
}

// ---------------------------------------------------------------------------
// figure data and CSV tables

FigureData figure_data(const ExperimentReport& report, const std::vector<Session>& sessions) {
    FigureData fig;
    fig.pump_histogram.assign(static_cast<std::size_t>(report.task.max_state) + 1, 0);
    for (const auto& s : sessions) {
        for (const auto& t : s.trials) {
            if (t.practice) continue;
            ++fig.pump_histogram.at(static_cast<std::size_t>(t.num_pumps));
            fig.payoff_vs_pumps.push_back(
                {t.subject_id, t.trial_index, t.outcome, t.num_pumps, trial_payoff(t, s.config)});
        }
    }
    fig.weights = weight_report(report.models);
    return fig;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

std::string behavioral_csv(const ExperimentReport& report) {
    std::ostringstream os;
    os << "group,n_subjects,n_trials,mean_pumps,cash_rate,mean_payoff_per_trial,"
          "mean_total_payoff_per_subject,mean_rt_per_trial_s,mean_rt_per_pump_s\n";
    for (const auto& b : report.behavior) {
        const auto& s = b.stats;
        os << b.group << ',' << s.n_subjects << ',' << s.n_trials << ',' << format_number(s.mean_pumps)
           << ',' << format_number(s.cash_rate) << ',' << format_number(s.mean_payoff) << ','
           << format_number(s.mean_total_payoff_per_subject) << ',' << optional_number(s.mean_rt_per_trial)
           << ',' << optional_number(s.mean_rt_per_pump) << '\n';
    }
    return os.str();
}

std::string lld_csv(const ExperimentReport& report) {
    std::ostringstream os;
    os << "model,eval_group,subset,n_trajectories,n_decisions,action_only,with_transitions,"
          "action_only_per_decision,with_transitions_per_decision\n";
    for (const auto& r : report.lld) {
        os << r.model << ',' << r.eval_group << ',' << r.subset << ',' << r.lld.n_trajectories << ','
           << r.lld.n_decisions << ',' << format_number(r.lld.action_only) << ','
           << format_number(r.lld.with_transitions) << ',' << format_number(r.lld.action_only_per_decision)
           << ',' << format_number(r.lld.with_transitions_per_decision) << '\n';
    }
    return os.str();
}

std::string pump_histogram_csv(const FigureData& fig) {
    std::ostringstream os;
    os << "num_pumps,count\n";
    for (std::size_t k = 0; k < fig.pump_histogram.size(); ++k) os << k << ',' << fig.pump_histogram[k] << '\n';
    return os.str();
}

std::string payoff_vs_pumps_csv(const FigureData& fig) {
    std::ostringstream os;
    os << "subject_id,trial_index,outcome,num_pumps,payoff\n";
    for (const auto& p : fig.payoff_vs_pumps) {
        os << p.subject_id << ',' << p.trial_index << ',' << to_string(p.outcome) << ',' << p.num_pumps
           << ',' << p.payoff << '\n';
    }
    return os.str();
}

std::string weight_bars_csv(const FigureData& fig) {
    std::ostringstream os;
    os << "group,feature,weight\n";
    for (std::size_t g = 0; g < fig.weights.groups.size(); ++g) {
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            os << fig.weights.groups[g] << ',' << feature_label(k) << ','
               << format_number(fig.weights.weights[g][k]) << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// report.json

namespace {

ordered_json to_json(const BartConfig& c) {
    return {{"max_state", c.max_state},
            {"points_per_pump", c.points_per_pump},
            {"formal_trials", c.formal_trials},
            {"practice_trials", c.practice_trials}};
}

BartConfig config_from(const json& j) {
    BartConfig c;
    c.max_state = j.at("max_state").get<int>();
    c.points_per_pump = j.at("points_per_pump").get<int>();
    c.formal_trials = j.at("formal_trials").get<int>();
    c.practice_trials = j.at("practice_trials").get<int>();
    return c;
}

ordered_json to_json(const TrainOptions& o) {
    return {{"learning_rate", o.learning_rate}, {"max_iters", o.max_iters},
            {"grad_tol_inf", o.grad_tol_inf},   {"l2_lambda", o.l2_lambda},
            {"seed", o.seed},                   {"optimizer", to_string(o.optimizer)},
            {"threads", o.threads}};
}

TrainOptions train_options_from(const json& j) {
    TrainOptions o;
    o.learning_rate = j.at("learning_rate").get<double>();
    o.max_iters = j.at("max_iters").get<int>();
    o.grad_tol_inf = j.at("grad_tol_inf").get<double>();
    o.l2_lambda = j.at("l2_lambda").get<double>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    o.threads = j.at("threads").get<std::size_t>();
    return o;
}

ordered_json to_json(const AgentSpec& a) {
    return {{"kind", describe_agent_kind(a.kind)},
            {"n_subjects", a.n_subjects},
            {"trials_per_subject", a.trials_per_subject},
            {"seed", a.seed},
            {"id_prefix", a.id_prefix}};
}

AgentSpec agent_from(const json& j) {
    AgentSpec a;
    a.kind = parse_agent_kind(j.at("kind").get<std::string>());
    a.n_subjects = j.at("n_subjects").get<int>();
    a.trials_per_subject = j.at("trials_per_subject").get<int>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.id_prefix = j.at("id_prefix").get<std::string>();
    return a;
}

ordered_json to_json(const ExperimentConfig& c) {
    ordered_json src;
    src["path"] = c.source.path ? ordered_json(*c.source.path) : ordered_json(nullptr);
    src["strict"] = c.source.strict;
    ordered_json agents = ordered_json::array();
    for (const auto& a : c.source.agents) agents.push_back(to_json(a));
    src["agents"] = agents;
    src["task"] = to_json(c.source.task);
    return {{"source", src},
            {"split", to_string(c.split)},
            {"train", to_json(c.train)},
            {"features", {{"semantics", to_string(c.features.semantics)}, {"normalize", c.features.normalize}}},
            {"grouping", to_string(c.grouping)},
            {"output_dir", c.output_dir ? ordered_json(*c.output_dir) : ordered_json(nullptr)},
            {"seed", c.seed}};
}

ExperimentConfig experiment_config_from(const json& j) {
    ExperimentConfig c;
    const json& src = j.at("source");
    if (!src.at("path").is_null()) c.source.path = src.at("path").get<std::string>();
    c.source.strict = src.at("strict").get<bool>();
    for (const auto& a : src.at("agents")) c.source.agents.push_back(agent_from(a));
    c.source.task = config_from(src.at("task"));
    c.split = parse_split_scheme(j.at("split").get<std::string>());
    c.train = train_options_from(j.at("train"));
    c.features.semantics = parse_feature_semantics(j.at("features").at("semantics").get<std::string>());
    c.features.normalize = j.at("features").at("normalize").get<bool>();
    c.grouping = parse_grouping(j.at("grouping").get<std::string>());
    if (!j.at("output_dir").is_null()) c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

ordered_json to_json(const BehavioralStats& s) {
    return {{"n_subjects", s.n_subjects},
            {"n_trials", s.n_trials},
            {"mean_pumps", s.mean_pumps},
            {"cash_rate", s.cash_rate},
            {"mean_payoff_per_trial", s.mean_payoff},
            {"mean_total_payoff_per_subject", s.mean_total_payoff_per_subject},
            {"mean_rt_per_trial_s", s.mean_rt_per_trial ? ordered_json(*s.mean_rt_per_trial) : ordered_json(nullptr)},
            {"mean_rt_per_pump_s", s.mean_rt_per_pump ? ordered_json(*s.mean_rt_per_pump) : ordered_json(nullptr)}};
}

BehavioralStats stats_from(const json& j) {
    BehavioralStats s;
    s.n_subjects = j.at("n_subjects").get<int>();
    s.n_trials = j.at("n_trials").get<int>();
    s.mean_pumps = j.at("mean_pumps").get<double>();
    s.cash_rate = j.at("cash_rate").get<double>();
    s.mean_payoff = j.at("mean_payoff_per_trial").get<double>();
    s.mean_total_payoff_per_subject = j.at("mean_total_payoff_per_subject").get<double>();
    if (!j.at("mean_rt_per_trial_s").is_null()) s.mean_rt_per_trial = j.at("mean_rt_per_trial_s").get<double>();
    if (!j.at("mean_rt_per_pump_s").is_null()) s.mean_rt_per_pump = j.at("mean_rt_per_pump_s").get<double>();
    return s;
}

ordered_json to_json(const TrainReport& r) {
    return {{"theta", theta_array(r.theta)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"final_grad_inf_norm", r.final_grad_inf_norm},
            {"moment_gap_inf_norm", r.moment_gap_inf_norm},
            {"objective", r.objective},
            {"final_learning_rate", r.final_learning_rate},
            {"train_lld_action_only", r.train_lld_action_only},
            {"train_lld_with_transitions", r.train_lld_with_transitions},
            {"n_train", r.n_train},
            {"hyperparameters", to_json(r.options)}};
}

TrainReport train_report_from(const json& j) {
    TrainReport r;
    r.theta = theta_from(j.at("theta"));
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.final_grad_inf_norm = j.at("final_grad_inf_norm").get<double>();
    r.moment_gap_inf_norm = j.at("moment_gap_inf_norm").get<double>();
    r.objective = j.at("objective").get<double>();
    r.final_learning_rate = j.at("final_learning_rate").get<double>();
    r.train_lld_action_only = j.at("train_lld_action_only").get<double>();
    r.train_lld_with_transitions = j.at("train_lld_with_transitions").get<double>();
    r.n_train = j.at("n_train").get<std::size_t>();
    r.options = train_options_from(j.at("hyperparameters"));
    return r;
}

ordered_json to_json(const LikelihoodSummary& s) {
    return {{"n_trajectories", s.n_trajectories},
            {"n_decisions", s.n_decisions},
            {"action_only", s.action_only},
            {"with_transitions", s.with_transitions},
            {"action_only_per_decision", s.action_only_per_decision},
            {"with_transitions_per_decision", s.with_transitions_per_decision}};
}

LikelihoodSummary likelihood_from(const json& j) {
    LikelihoodSummary s;
    s.n_trajectories = j.at("n_trajectories").get<std::size_t>();
    s.n_decisions = j.at("n_decisions").get<std::size_t>();
    s.action_only = j.at("action_only").get<double>();
    s.with_transitions = j.at("with_transitions").get<double>();
    s.action_only_per_decision = j.at("action_only_per_decision").get<double>();
    s.with_transitions_per_decision = j.at("with_transitions_per_decision").get<double>();
    return s;
}

}  // namespace

std::string report_json(const ExperimentReport& report) {
    ordered_json j;
    j["config"] = to_json(report.config);
    j["task"] = to_json(report.task);
    if (report.split) {
        j["split"] = {{"median", report.split->median},
                      {"risk_prone", report.split->risk_prone},
                      {"risk_averse", report.split->risk_averse}};
    } else {
        j["split"] = nullptr;
    }
    ordered_json behavior = ordered_json::array();
    for (const auto& b : report.behavior) behavior.push_back({{"group", b.group}, {"stats", to_json(b.stats)}});
    j["behavior"] = behavior;
    ordered_json models = ordered_json::array();
    for (const auto& m : report.models) {
        models.push_back({{"group", m.group}, {"n_test", m.n_test}, {"train", to_json(m.report)}});
    }
    j["models"] = models;
    ordered_json lld = ordered_json::array();
    for (const auto& r : report.lld) {
        lld.push_back({{"model", r.model}, {"eval_group", r.eval_group}, {"subset", r.subset}, {"lld", to_json(r.lld)}});
    }
    j["lld"] = lld;
    j["warnings"] = report.warnings;
    j["all_converged"] = report.all_converged();
    return j.dump(2) + "\n";
}

ExperimentReport parse_report_json(const std::string& text) {
    ExperimentReport rep;
    try {
        const json j = json::parse(text);
        rep.config = experiment_config_from(j.at("config"));
        rep.task = config_from(j.at("task"));
        if (!j.at("split").is_null()) {
            GroupSplit g;
            g.median = j["split"].at("median").get<double>();
            g.risk_prone = j["split"].at("risk_prone").get<std::set<std::string>>();
            g.risk_averse = j["split"].at("risk_averse").get<std::set<std::string>>();
            rep.split = std::move(g);
        }
        for (const auto& b : j.at("behavior")) {
            rep.behavior.push_back({b.at("group").get<std::string>(), stats_from(b.at("stats"))});
        }
        for (const auto& m : j.at("models")) {
            rep.models.push_back({m.at("group").get<std::string>(), m.at("n_test").get<std::size_t>(),
                                  train_report_from(m.at("train"))});
        }
        for (const auto& r : j.at("lld")) {
            rep.lld.push_back({r.at("model").get<std::string>(), r.at("eval_group").get<std::string>(),
                               r.at("subset").get<std::string>(), likelihood_from(r.at("lld"))});
        }
        rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DomainError(std::string("malformed report.json: ") + e.what());
    }
    return rep;
}

void write_report_bundle(const ExperimentReport& report, const std::vector<Session>& sessions,
                         const std::string& dir) {
    const fs::path root(dir);
    const FigureData fig = figure_data(report, sessions);
    write_file_atomic((root / "behavioral.csv").string(), behavioral_csv(report));
    write_file_atomic((root / "weights.csv").string(), weights_csv(fig.weights));
    write_file_atomic((root / "weights.json").string(), weights_json(fig.weights));
    write_file_atomic((root / "lld.csv").string(), lld_csv(report));
    write_file_atomic((root / "report.json").string(), report_json(report));
    write_file_atomic((root / "figure_data" / "pump_histogram.csv").string(), pump_histogram_csv(fig));
    write_file_atomic((root / "figure_data" / "payoff_vs_pumps.csv").string(), payoff_vs_pumps_csv(fig));
    write_file_atomic((root / "figure_data" / "weight_bars.csv").string(), weight_bars_csv(fig));
    for (const auto& m : report.models) {
        write_file_atomic((root / "theta" / (m.group + ".json")).string(), theta_json(m.report.theta));
    }
}

}  // namespace bart
