#pragma once

#include "cqabench/evaluation.hpp"
#include "cqabench/features.hpp"
#include "cqabench/hpo.hpp"
#include "cqabench/hybrid.hpp"
#include "cqabench/imputation.hpp"
#include "cqabench/plan.hpp"
#include "cqabench/synthetic.hpp"
#include "cqabench/table.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cqabench {

struct DataSource {
    std::optional<std::filesystem::path> path;
    char delimiter = ',';
    // Used when path is empty.
    std::size_t synthetic_rows = 2000;
    std::uint64_t synthetic_seed = 42;
    SyntheticProfile profile;
};

struct HpoSettings {
    bool enabled = true;
    std::size_t tpe_trials = 100;
    std::size_t tpe_startup = 10;
    std::size_t ga_population = 20;
    std::size_t ga_generations = 25;
    std::size_t top_k = 3;
    double tolerance_percent = 5.0;
};

struct TextprepSettings {
    std::filesystem::path input;
    std::optional<std::filesystem::path> rules;
    std::optional<std::filesystem::path> stopwords;
    std::size_t limit = kMaxSequence;
};

struct HybridSettings {
    std::filesystem::path numeric_scores;
    std::filesystem::path textual_scores;
    std::filesystem::path ground_truth;
    double threshold = 0.5;
};

struct RunConfig {
    // Empty for a hybrid-only configuration.
    std::optional<ResearchQuestion> rq;
    DataSource data;
    nlohmann::json imputation;  // strategy-map override, null for the default
    double vif_threshold = 5.0;
    std::vector<FeTechnique> fe;
    std::vector<std::string> models;
    std::vector<std::string> targets;
    std::size_t runs = 100;
    double train_ratio = 0.8;
    std::uint64_t seed = 42;
    double alpha = 0.01;
    double positive_label = kNonDropoutLabel;
    HpoSettings hpo;
    std::optional<TextprepSettings> textprep;
    std::optional<HybridSettings> hybrid;
    // Default output directory; --out overrides it. Not part of the hash.
    std::filesystem::path out = "out";
    // Relative paths are taken from here; not part of the hash.
    std::filesystem::path base;

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() || base.empty() ? p : base / p;
    }
    // Canonical form (defaults filled in); the provenance hash is taken over
    // its serialization.
    nlohmann::json to_json() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

// Relative paths resolve against `base`. Throws ConfigError on unknown keys,
// bad values, models missing from the registry or not supporting the
// question's task, unknown FE names, or runs < 1.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Throws ConfigError unless the config names a research question.
ExperimentPlan plan_for(const RunConfig& config);

UserFeatureTable load_data(const RunConfig& config);

struct PreparedData {
    UserFeatureTable table;
    std::vector<std::string> predictors;
    std::vector<std::string> imputation_warnings;
    bool em_converged = true;
    VifReport vif;
    std::vector<std::string> vif_removed;
};

// impute -> drop composites -> VIF pruning.
PreparedData prepare_data(const RunConfig& config);

struct CellOutcome {
    PlanCell cell;
    CellResult result;
    Assignment params;
    std::optional<OptimizationResult> tpe;
};

struct TargetSummary {
    std::string target;
    Task task = Task::Regression;
    std::optional<std::size_t> best;  // index into BenchmarkReport::cells
    std::optional<SignificanceReport> significance;
    std::vector<std::string> significance_labels;
    std::vector<RefineOutcome> agreement;
    std::vector<std::string> notes;
};

struct BenchmarkReport {
    std::string config_hash;
    std::uint64_t seed = 0;
    ResearchQuestion rq = ResearchQuestion::RQ1;
    std::size_t rows = 0;
    PreparedData data;
    std::vector<CellOutcome> cells;
    std::vector<TargetSummary> targets;

    nlohmann::json to_json() const;
    // Delimiter-separated grid, one row per plan cell.
    std::string grid_tsv() const;
    // Per target, models x FE with "mean ± std (median)" of the primary metric.
    std::string table_text() const;
    std::string hyperparameters_tsv() const;
    std::string agreement_tsv() const;
};

struct BenchOptions {
    std::size_t workers = 1;
    // Skip the repeated evaluation (hpo-validate).
    bool evaluate = true;
};

BenchmarkReport run_benchmark(const RunConfig& config, const BenchOptions& options = {});

// Writes report.json, grid.tsv, table.txt, hyperparameters.tsv, agreement.tsv.
void write_benchmark_outputs(const BenchmarkReport& report, const std::filesystem::path& dir);

// Re-renders grid.tsv and table.txt from a saved report.json.
void render_report(const std::filesystem::path& dir);

struct TextprepSummary {
    std::size_t posts = 0;
    std::size_t failed = 0;
    std::map<std::string, std::size_t> snippets_per_language;

    nlohmann::json to_json() const;
};

// Input: a directory of *.html files (id = file stem) or a tab-separated
// file of "id<TAB>html" lines. Writes records.jsonl, vocab.txt and
// summary.json into `out`.
TextprepSummary run_textprep(const TextprepSettings& settings, const std::filesystem::path& out);

HybridReport run_hybrid_eval(const HybridSettings& settings, double positive_label = kNonDropoutLabel);

}  // namespace cqabench
