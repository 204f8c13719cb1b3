#pragma once

// End-to-end protocol: load or generate sessions, split subjects at the
// median, train one model per group on the training half, score every model
// on every group's held-out half, and write a report bundle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bart/agents.hpp"
#include "bart/features.hpp"
#include "bart/maxent.hpp"
#include "bart/trajectory.hpp"

namespace bart {

enum class Grouping {
    Pooled,      ///< one model on everyone
    Median,      ///< risk-prone and risk-averse models
    Both,        ///< pooled plus the two group models
    PerSubject,  ///< one model per subject (small-data warning)
};

Grouping parse_grouping(const std::string& name);
std::string_view to_string(Grouping g) noexcept;

inline constexpr std::string_view kGroupAll = "all";
inline constexpr std::string_view kGroupProne = "risk_prone";
inline constexpr std::string_view kGroupAverse = "risk_averse";

struct DataSource {
    /// JSONL file; takes precedence over agents when set.
    std::optional<std::string> path;
    bool strict = false;
    /// Synthetic populations, concatenated in order.
    std::vector<AgentSpec> agents;
    BartConfig task;
};

struct ExperimentConfig {
    DataSource source;
    SplitScheme split = SplitScheme::Interleaved;
    TrainOptions train;
    FeatureOptions features;
    Grouping grouping = Grouping::Both;
    std::optional<std::string> output_dir;
    std::uint64_t seed = 0;
};

struct GroupBehavior {
    std::string group;
    BehavioralStats stats;
};

struct GroupModel {
    std::string group;
    std::size_t n_test = 0;
    TrainReport report;
};

struct LldRow {
    std::string model;
    std::string eval_group;
    std::string subset;  // "train" or "test"
    LikelihoodSummary lld;
};

struct ExperimentReport {
    ExperimentConfig config;
    BartConfig task;
    std::optional<GroupSplit> split;
    std::vector<GroupBehavior> behavior;
    std::vector<GroupModel> models;
    std::vector<LldRow> lld;
    std::vector<std::string> warnings;

    const GroupModel* model(std::string_view group) const;
    const LldRow* find_lld(std::string_view model, std::string_view eval_group,
                           std::string_view subset) const;
    bool all_converged() const;
};

/// Sessions named by the config's data source.
std::vector<Session> load_sessions(const DataSource& source, std::vector<std::string>* warnings = nullptr);

ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<Session>& sessions);

struct WeightTable {
    std::vector<std::string> groups;
    std::vector<ThetaWeights> weights;
    /// Per group: feature indices ordered by decreasing |weight|.
    std::vector<std::vector<std::size_t>> ranking;

    /// weights[a] - weights[b]
    ThetaWeights difference(std::size_t a, std::size_t b) const;
};

WeightTable weight_report(const std::vector<GroupModel>& models);
std::string weights_csv(const WeightTable& table);
std::string weights_json(const WeightTable& table);

struct FigureData {
    /// count of scored trials with k pumps, k = 0..max_state
    std::vector<int> pump_histogram;
    struct Point {
        std::string subject_id;
        int trial_index = 0;
        Outcome outcome = Outcome::Cash;
        int num_pumps = 0;
        int payoff = 0;
    };
    std::vector<Point> payoff_vs_pumps;
    WeightTable weights;
};

FigureData figure_data(const ExperimentReport& report, const std::vector<Session>& sessions);

std::string behavioral_csv(const ExperimentReport& report);
std::string lld_csv(const ExperimentReport& report);
std::string pump_histogram_csv(const FigureData& fig);
std::string payoff_vs_pumps_csv(const FigureData& fig);
std::string weight_bars_csv(const FigureData& fig);

std::string report_json(const ExperimentReport& report);
ExperimentReport parse_report_json(const std::string& text);

/// Writes behavioral.csv, weights.csv, weights.json, lld.csv, report.json,
/// figure_data/*.csv and theta/<group>.json under dir. Each file is
/// replaced atomically.
void write_report_bundle(const ExperimentReport& report, const std::vector<Session>& sessions,
                         const std::string& dir);

/// 11 labeled weights: [{"feature":"f1","description":...,"weight":w}, ...].
std::string theta_json(const ThetaWeights& theta);
/// Accepts the labeled form, a bare array of 11 numbers, or {"theta": [...]}.
/// Throws DomainError on a dimension mismatch.
ThetaWeights parse_theta_json(const std::string& text);

/// Shortest round-trip decimal form.
std::string format_number(double v);

/// Writes to path + ".tmp" and renames over path.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace bart
