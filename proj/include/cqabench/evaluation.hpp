#pragma once

#include "cqabench/table.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cqabench {

class FittedModel;

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double positive_label = 1.0;

    static ConfusionMatrix from(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred, double positive_label);

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    double accuracy() const;
    // Zero when undefined (no predicted or no actual positives).
    double precision() const;
    double recall() const;
    double f1() const;
};

// Unused fields are NaN.
struct MetricSet {
    Task task = Task::Regression;
    double r2 = 0.0;
    double rmse = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    // R² for regression, F1 for classification.
    double primary() const noexcept { return task == Task::Regression ? r2 : f1; }
    std::map<std::string, double> values() const;
};

// Throws EvaluationError on a length mismatch, an empty input, or (for R²) a
// constant y_true.
MetricSet score(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred, Task task, double positive_label = 1.0);
MetricSet score(const ConfusionMatrix& cm);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Test size is ceil((1 - ratio) * n), at least one row on each side. With
// `strata`, each class contributes its largest-remainder share of the test
// rows.
SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed, const Eigen::VectorXd* strata = nullptr);

std::pair<UserFeatureTable, UserFeatureTable> split_train_test(const UserFeatureTable& table, double ratio,
                                                               std::uint64_t seed,
                                                               std::optional<std::string> stratify_column = {});

struct RunDistribution {
    std::vector<double> values;
    double mean = 0.0;
    // Population standard deviation.
    double std = 0.0;
    double median = 0.0;

    static RunDistribution from(std::vector<double> values);
    // "mean ± std (median)"
    std::string summary() const;
};

// Formats to three decimals with trailing zeros trimmed (at least one
// decimal kept).
std::string format_metric(double v);
std::string summarize(std::span<const double> values);

// Fits on (X, y) with the given seed.
using Fitter = std::function<FittedModel(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed)>;
// Returns transformed (train, test) predictor matrices.
using Preprocessor = std::function<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(const Eigen::MatrixXd& train,
                                                                               const Eigen::MatrixXd& test)>;

struct EvalSetup {
    std::vector<std::string> predictors;
    std::string target;
    Task task = Task::Regression;
    double positive_label = 1.0;
    double train_ratio = 0.8;
    std::size_t runs = 100;
    std::uint64_t master_seed = 42;
    std::size_t workers = 1;
};

struct RepeatedEvalResult {
    // Keyed by metric name (r2, rmse or accuracy, precision, recall, f1).
    std::map<std::string, RunDistribution> metrics;
    std::size_t failed_runs = 0;
    std::string first_error;

    bool all_failed() const noexcept { return metrics.empty(); }
};

// Run i splits and fits with derive_seed(master_seed, i). Failed runs are
// counted and skipped; results do not depend on the worker count.
RepeatedEvalResult repeated_eval(const UserFeatureTable& table, const EvalSetup& setup, const Preprocessor& prep,
                                 const Fitter& fitter);

struct KruskalWallis {
    double h = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

KruskalWallis kruskal_wallis(std::span<const std::vector<double>> groups);

struct PairwiseResult {
    std::size_t a = 0;
    std::size_t b = 0;
    double statistic = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

struct SignificanceReport {
    KruskalWallis kw;
    std::vector<PairwiseResult> posthoc;
    double alpha = 0.01;
    std::string correction = "bonferroni";

    nlohmann::json to_json(std::span<const std::string> labels = {}) const;
};

double bonferroni(double p, std::size_t comparisons);

SignificanceReport conover_iman(std::span<const std::vector<double>> groups, double alpha = 0.01);

struct KsResult {
    double statistic = 0.0;
    double p = 1.0;
};

// Against a normal with the sample mean and (n - 1) standard deviation;
// asymptotic p-value with Stephens' small-sample adjustment.
KsResult ks_normality(std::span<const double> sample);

struct CellResult {
    std::string fe;
    std::string model;
    std::string target;
    bool na = false;
    std::string error;
    std::map<std::string, RunDistribution> metrics;

    double mean(const std::string& metric) const;
};

// Regression: max mean R², then min mean RMSE; classification: max mean F1,
// then max mean accuracy; then (fe, model) lexicographic. Throws
// EvaluationError if every cell is N/A.
const CellResult& select_best(std::span<const CellResult> cells, Task task);

}  // namespace cqabench
