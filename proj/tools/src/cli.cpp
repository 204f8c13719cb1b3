#include "bart/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bart/agents.hpp"
#include "bart/errors.hpp"
#include "bart/experiment.hpp"
#include "bart/features.hpp"
#include "bart/maxent.hpp"
#include "bart/parallel.hpp"
#include "bart/task.hpp"
#include "bart/trajectory.hpp"

namespace bart::cli {

namespace {

namespace fs = std::filesystem;

/// Raised for arguments CLI11 accepted syntactically but that make no sense.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) { return format_number(v); }

/// Left-aligned column of at least `width` characters plus a two-space gutter.
struct Col {
    int width;
    std::string text;
};

std::ostream& operator<<(std::ostream& out, const Col& c) {
    return out << std::left << std::setw(c.width) << c.text << "  ";
}

template <class T>
std::string str(const T& v) {
    std::ostringstream os;
    os << v;
    return os.str();
}
std::string num(const std::optional<double>& v) { return v ? format_number(*v) : "-"; }

// ---------------------------------------------------------------------------
// shared flag bundles

struct DataFlags {
    std::string path;
    bool strict = false;

    void add(CLI::App& app) {
        app.add_option("--data", path, "JSONL session file")->required();
        app.add_flag("--strict", strict, "reject unknown keys instead of warning");
    }

    std::vector<Session> load(std::ostream& err) const {
        ParsedData data = parse_sessions_file(path, ParseOptions{strict});
        for (const auto& w : data.warnings) err << "warning: " << w << "\n";
        return std::move(data.sessions);
    }
};

struct FeatureFlags {
    bool normalize = false;
    std::string semantics = "exact";

    void add(CLI::App& app) {
        app.add_flag("--normalize-features", normalize, "divide f1 by prior trials and f11 by max_state");
        app.add_option("--feature-semantics", semantics, "rows 2-7 fire at the exact end state or at every state beyond it")
            ->check(CLI::IsMember({"exact", "threshold"}))
            ->capture_default_str();
    }

    FeatureOptions options() const { return {parse_feature_semantics(semantics), normalize}; }
};

struct SplitFlags {
    std::string scheme = "interleaved";

    void add(CLI::App& app) {
        app.add_option("--split", scheme, "train/test split of each subject's scored trials")
            ->check(CLI::IsMember({"interleaved", "first-half"}))
            ->capture_default_str();
    }

    SplitScheme value() const { return parse_split_scheme(scheme); }
};

// ---------------------------------------------------------------------------
// printing

void print_stats_header(std::ostream& out) {
    out << Col{12, "group"} << Col{8, "subjects"} << Col{8, "trials"} << Col{20, "mean_pumps"}
        << Col{20, "cash_rate"} << Col{20, "mean_payoff"} << Col{20, "mean_subject_total"}
        << Col{20, "rt_per_trial_s"} << "rt_per_pump_s\n";
}

void print_stats_row(std::ostream& out, const std::string& group, const BehavioralStats& s) {
    out << Col{12, group} << Col{8, str(s.n_subjects)} << Col{8, str(s.n_trials)} << Col{20, num(s.mean_pumps)}
        << Col{20, num(s.cash_rate)} << Col{20, num(s.mean_payoff)}
        << Col{20, num(s.mean_total_payoff_per_subject)} << Col{20, num(s.mean_rt_per_trial)}
        << num(s.mean_rt_per_pump) << "\n";
}

void print_lld_header(std::ostream& out) {
    out << Col{12, "model"} << Col{12, "eval_group"} << Col{6, "subset"} << Col{6, "n"}
        << Col{22, "action_only"} << Col{22, "with_transitions"} << Col{22, "action_per_decision"}
        << "transitions_per_decision\n";
}

void print_lld_row(std::ostream& out, const LldRow& r) {
    out << Col{12, r.model} << Col{12, r.eval_group} << Col{6, r.subset} << Col{6, str(r.lld.n_trajectories)}
        << Col{22, num(r.lld.action_only)} << Col{22, num(r.lld.with_transitions)}
        << Col{22, num(r.lld.action_only_per_decision)} << num(r.lld.with_transitions_per_decision) << "\n";
}

void print_weights(std::ostream& out, const WeightTable& table) {
    out << Col{4, "feat"};
    for (const auto& g : table.groups) out << Col{22, g};
    out << "description\n";
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        out << Col{4, std::string(feature_label(k))};
        for (const auto& w : table.weights) out << Col{22, num(w[k])};
        out << feature_description(k) << "\n";
    }
}

void print_report(std::ostream& out, const ExperimentReport& rep) {
    out << "behavior\n";
    print_stats_header(out);
    for (const auto& b : rep.behavior) print_stats_row(out, b.group, b.stats);
    if (rep.split) {
        out << "median subject mean pumps " << num(rep.split->median) << ": " << rep.split->risk_prone.size()
            << " risk_prone, " << rep.split->risk_averse.size() << " risk_averse\n";
    }
    out << "\nmodels\n";
    for (const auto& m : rep.models) {
        out << m.group << ": converged=" << (m.report.converged ? "true" : "false")
            << " iterations=" << m.report.iterations << " grad_inf=" << num(m.report.final_grad_inf_norm)
            << " moment_gap_inf=" << num(m.report.moment_gap_inf_norm) << " n_train=" << m.report.n_train
            << " n_test=" << m.n_test << "\n";
    }
    if (!rep.models.empty()) {
        out << "\nweights\n";
        print_weights(out, weight_report(rep.models));
    }
    out << "\nlog-likelihood (nats)\n";
    print_lld_header(out);
    for (const auto& r : rep.lld) print_lld_row(out, r);
}

// ---------------------------------------------------------------------------
// subcommands

struct Simulate {
    std::string agent;
    int subjects = 1;
    int trials = 30;
    std::uint64_t seed = 0;
    std::string out_path;
    std::string prefix = "s";
    BartConfig task;
    std::size_t threads = 0;

    void add(CLI::App& app) {
        app.add_option("--agent", agent, "threshold:<tau>,<softness> or maxent:<11 reals>")->required();
        app.add_option("--subjects", subjects, "number of subjects")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--trials", trials, "scored trials per subject")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--seed", seed, "base seed")->capture_default_str();
        app.add_option("--out", out_path, "output JSONL file")->required();
        app.add_option("--id-prefix", prefix, "subject id prefix")->capture_default_str();
        app.add_option("--practice", task.practice_trials, "practice trials per subject")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        app.add_option("--max-state", task.max_state, "breakpoints are uniform on 1..max_state")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--points-per-pump", task.points_per_pump, "points per banked pump")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--threads", threads, "worker threads (0 = all)")->capture_default_str();
    }

    int run(std::ostream& out, std::ostream&) const {
        AgentSpec spec;
        try {
            spec.kind = parse_agent_kind(agent);
            spec.n_subjects = subjects;
            spec.trials_per_subject = trials;
            spec.seed = seed;
            spec.id_prefix = prefix;
            validate_agent(spec, task);
        } catch (const DomainError& e) {
            throw UsageError(std::string("--agent: ") + e.what());
        }
        const auto sessions = generate_population(spec, task, worker_count(threads));
        std::ostringstream buf;
        serialize_sessions(buf, sessions);
        write_file_atomic(out_path, buf.str());
        out << "wrote " << sessions.size() << " sessions to " << out_path << "\n";
        print_stats_header(out);
        print_stats_row(out, std::string(kGroupAll), behavioral_stats(sessions));
        return kExitOk;
    }
};

struct Stats {
    DataFlags data;
    bool median = false;

    void add(CLI::App& app) {
        data.add(app);
        app.add_flag("--median-split", median, "also summarize the risk_prone and risk_averse groups");
    }

    int run(std::ostream& out, std::ostream& err) const {
        const auto sessions = data.load(err);
        print_stats_header(out);
        print_stats_row(out, std::string(kGroupAll), behavioral_stats(sessions));
        if (median) {
            const GroupSplit split = median_split(sessions);
            for (auto [name, ids] : {std::pair{kGroupProne, &split.risk_prone},
                                     std::pair{kGroupAverse, &split.risk_averse}}) {
                if (ids->empty()) continue;
                print_stats_row(out, std::string(name), behavioral_stats(select_subjects(sessions, *ids)));
            }
            out << "median subject mean pumps " << num(split.median) << "\n";
        }
        return kExitOk;
    }
};

struct Split {
    DataFlags data;
    SplitFlags split;
    std::string out_path;

    void add(CLI::App& app) {
        data.add(app);
        split.add(app);
        app.add_option("--out", out_path, "CSV of subject_id,trial_index,subset,group per scored trial");
    }

    int run(std::ostream& out, std::ostream& err) const {
        const auto sessions = data.load(err);
        const TrialSplit ts = train_test_split(sessions, split.value());
        std::optional<GroupSplit> groups;
        if (sessions.size() >= 2) groups = median_split(sessions);
        const auto group_of = [&](const std::string& id) -> std::string {
            if (!groups) return "-";
            return std::string(groups->risk_prone.count(id) ? kGroupProne : kGroupAverse);
        };

        std::vector<std::size_t> n_train(sessions.size()), n_test(sessions.size());
        for (const auto& r : ts.train) ++n_train[r.session];
        for (const auto& r : ts.test) ++n_test[r.session];
        out << Col{16, "subject"} << Col{20, "mean_pumps"} << Col{12, "group"} << Col{6, "train"} << "test\n";
        for (std::size_t k = 0; k < sessions.size(); ++k) {
            const auto& id = sessions[k].subject_id;
            out << Col{16, id} << Col{20, num(subject_mean_pumps(sessions[k]))} << Col{12, group_of(id)}
                << Col{6, str(n_train[k])} << n_test[k] << "\n";
        }
        if (groups) out << "median subject mean pumps " << num(groups->median) << "\n";
        out << "train " << ts.train.size() << " trials, test " << ts.test.size() << " trials\n";

        if (!out_path.empty()) {
            std::vector<std::pair<TrialRef, const char*>> rows;
            for (const auto& r : ts.train) rows.emplace_back(r, "train");
            for (const auto& r : ts.test) rows.emplace_back(r, "test");
            std::sort(rows.begin(), rows.end());
            std::ostringstream csv;
            csv << "subject_id,trial_index,subset,group\n";
            for (const auto& [r, subset] : rows) {
                const Session& s = sessions[r.session];
                csv << s.subject_id << ',' << s.trials[r.trial].trial_index << ',' << subset << ','
                    << group_of(s.subject_id) << "\n";
            }
            write_file_atomic(out_path, csv.str());
        }
        return kExitOk;
    }
};

struct Train {
    std::string data_path;
    std::vector<std::string> agents;
    int subjects = 50;
    int trials = 30;
    bool strict = false;
    SplitFlags split;
    FeatureFlags features;
    std::string grouping = "both";
    TrainOptions opts;
    std::string optimizer = "newton";
    std::string out_dir;
    std::uint64_t seed = 0;

    void add(CLI::App& app) {
        auto* data = app.add_option("--data", data_path, "JSONL session file");
        auto* agent = app.add_option("--agent", agents,
                                     "generate a synthetic population instead of reading --data (repeatable)");
        data->excludes(agent);
        app.add_option("--subjects", subjects, "subjects per --agent population")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--trials", trials, "scored trials per synthetic subject")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_flag("--strict", strict, "reject unknown keys instead of warning");
        split.add(app);
        app.add_option("--group", grouping, "which models to train")
            ->check(CLI::IsMember({"pooled", "median", "both", "per-subject"}))
            ->capture_default_str();
        app.add_option("--lr", opts.learning_rate, "gradient-ascent step size")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--tol", opts.grad_tol_inf, "stop when |grad|_inf falls below this")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--max-iters", opts.max_iters, "iteration cap")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        app.add_option("--l2", opts.l2_lambda, "L2 penalty on theta")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        app.add_option("--optimizer", optimizer, "newton or plain gradient ascent")
            ->check(CLI::IsMember({"newton", "gradient"}))
            ->capture_default_str();
        features.add(app);
        app.add_option("--out", out_dir, "report bundle directory");
        app.add_option("--seed", seed, "seed for synthetic data and the run")->capture_default_str();
        app.add_option("--threads", opts.threads, "worker threads (0 = all)")->capture_default_str();
    }

    int run(std::ostream& out, std::ostream& err) const {
        if (data_path.empty() && agents.empty()) throw UsageError("train needs --data or --agent");
        ExperimentConfig cfg;
        cfg.source.strict = strict;
        if (!data_path.empty()) cfg.source.path = data_path;
        for (std::size_t k = 0; k < agents.size(); ++k) {
            AgentSpec spec;
            try {
                spec.kind = parse_agent_kind(agents[k]);
            } catch (const DomainError& e) {
                throw UsageError(std::string("--agent: ") + e.what());
            }
            spec.n_subjects = subjects;
            spec.trials_per_subject = trials;
            spec.seed = derive_seed(seed, k);
            spec.id_prefix = "g" + std::to_string(k) + "_s";
            cfg.source.agents.push_back(std::move(spec));
        }
        cfg.split = split.value();
        cfg.train = opts;
        cfg.train.optimizer = parse_optimizer(optimizer);
        cfg.train.seed = seed;
        cfg.features = features.options();
        cfg.grouping = parse_grouping(grouping);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.seed = seed;

        const ExperimentReport rep = run_experiment(cfg);
        for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
        print_report(out, rep);
        if (cfg.output_dir) out << "\nwrote report bundle to " << *cfg.output_dir << "\n";
        return kExitOk;
    }
};

struct Eval {
    DataFlags data;
    std::string theta_path;
    SplitFlags split;
    FeatureFlags features;
    bool median = false;
    bool include_transitions = false;
    std::size_t threads = 0;

    void add(CLI::App& app) {
        data.add(app);
        app.add_option("--theta", theta_path, "JSON file with 11 labeled weights")->required();
        split.add(app);
        features.add(app);
        app.add_flag("--median-split", median, "also score the risk_prone and risk_averse groups");
        app.add_flag("--include-transitions", include_transitions,
                     "headline figure includes the burst/survival terms");
        app.add_option("--threads", threads, "worker threads (0 = all)")->capture_default_str();
    }

    int run(std::ostream& out, std::ostream& err) const {
        const ThetaWeights theta = parse_theta_json(read_file(theta_path));
        const auto sessions = data.load(err);
        const BartConfig task = sessions.empty() ? BartConfig{} : sessions.front().config;
        if (sessions.empty()) throw DomainError("no sessions in " + data.path);
        const std::size_t workers = worker_count(threads);

        std::vector<std::pair<std::string, std::vector<Session>>> groups{{std::string(kGroupAll), sessions}};
        if (median) {
            const GroupSplit gs = median_split(sessions);
            groups.emplace_back(std::string(kGroupProne), select_subjects(sessions, gs.risk_prone));
            groups.emplace_back(std::string(kGroupAverse), select_subjects(sessions, gs.risk_averse));
        }

        print_lld_header(out);
        std::optional<double> headline;
        for (const auto& [name, subset] : groups) {
            if (subset.empty()) continue;
            const TrialSplit ts = train_test_split(subset, split.value());
            for (auto [label, refs] : {std::pair{"train", &ts.train}, std::pair{"test", &ts.test}}) {
                if (refs->empty()) continue;
                const auto demos = make_demonstrations(subset, *refs, features.options());
                const LldRow row{"theta", name, label, evaluate_likelihood(theta, demos, task, workers)};
                print_lld_row(out, row);
                if (name == kGroupAll && std::string_view(label) == "test") {
                    headline = include_transitions ? row.lld.with_transitions : row.lld.action_only;
                }
            }
        }
        if (headline) {
            out << "test lld (" << (include_transitions ? "with transitions" : "action only")
                << ", nats per trajectory): " << num(*headline) << "\n";
        }
        return kExitOk;
    }
};

struct Validate {
    DataFlags data;

    void add(CLI::App& app) { data.add(app); }

    int run(std::ostream& out, std::ostream& err) const {
        const auto sessions = data.load(err);
        std::size_t trials = 0;
        for (const auto& s : sessions) trials += s.trials.size();
        out << "ok: " << sessions.size() << " sessions, " << trials << " trials\n";
        return kExitOk;
    }
};

struct Report {
    std::string in;
    std::string data_path;
    std::string out_dir;

    void add(CLI::App& app) {
        app.add_option("--in", in, "report.json or a bundle directory containing it")->required();
        app.add_option("--data", data_path, "sessions the report was trained on (needed for --out)");
        app.add_option("--out", out_dir, "rewrite the full bundle here");
    }

    int run(std::ostream& out, std::ostream& err) const {
        fs::path path(in);
        if (fs::is_directory(path)) path /= "report.json";
        const ExperimentReport rep = parse_report_json(read_file(path.string()));
        for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
        print_report(out, rep);
        if (!out_dir.empty()) {
            if (data_path.empty()) throw UsageError("report --out needs --data for the figure data");
            const auto sessions = parse_sessions_file(data_path).sessions;
            write_report_bundle(rep, sessions, out_dir);
            out << "\nwrote report bundle to " << out_dir << "\n";
        }
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MaxEnt inverse reinforcement learning on Balloon Analogue Risk Task sessions", "bart-irl"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand help for every subcommand");

    Simulate simulate;
    Stats stats;
    Split split;
    Train train_cmd;
    Eval eval;
    Validate validate;
    Report report;
    auto* s_sim = app.add_subcommand("simulate", "generate synthetic sessions as JSONL");
    auto* s_stats = app.add_subcommand("stats", "behavioral summary of a session file");
    auto* s_split = app.add_subcommand("split", "show the median split and train/test assignment");
    auto* s_train = app.add_subcommand("train", "train group models and write a report bundle");
    auto* s_eval = app.add_subcommand("eval", "score sessions under a fixed theta");
    auto* s_valid = app.add_subcommand("validate", "check a session file against the data contract");
    auto* s_report = app.add_subcommand("report", "print or re-emit a saved report");
    simulate.add(*s_sim);
    stats.add(*s_stats);
    split.add(*s_split);
    train_cmd.add(*s_train);
    eval.add(*s_eval);
    validate.add(*s_valid);
    report.add(*s_report);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << "run '" << sub->get_name() << " --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (s_sim->parsed()) return simulate.run(out, err);
        if (s_stats->parsed()) return stats.run(out, err);
        if (s_split->parsed()) return split.run(out, err);
        if (s_train->parsed()) return train_cmd.run(out, err);
        if (s_eval->parsed()) return eval.run(out, err);
        if (s_valid->parsed()) return validate.run(out, err);
        if (s_report->parsed()) return report.run(out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

}  // namespace bart::cli
