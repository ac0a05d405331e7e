#pragma once

#include "cqabench/table.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cqabench {

enum class FeTechnique { Standardise, Normalise, Log, Power, None };

std::string_view to_string(FeTechnique fe);
// Accepts the config names standardise, normalise, log, power, none.
FeTechnique parse_fe_technique(std::string_view text);
const std::vector<FeTechnique>& all_fe_techniques();

inline constexpr double kPowerGrid[] = {-1.0, -0.5, 0.0, 0.5, 1.0, 2.0};

// Per-column parameters fitted on training rows:
//   Standardise: first = mean, second = population std
//   Normalise:   first = min, second = max
//   Log:         first = shift (min(0, min)), second unused
//   Power:       first = training min, second = exponent
class FittedTransform {
public:
    FeTechnique kind = FeTechnique::None;
    Eigen::VectorXd first;
    Eigen::VectorXd second;
    std::vector<std::string> warnings;

    std::size_t cols() const noexcept { return static_cast<std::size_t>(first.size()); }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
    nlohmann::json to_json(std::span<const std::string> names = {}) const;
};

FittedTransform fit_transform(FeTechnique kind, const Eigen::MatrixXd& train);

struct TransformResult {
    Eigen::MatrixXd train;
    Eigen::MatrixXd eval;
    FittedTransform params;
};

// Fits on `train` only and applies the same parameters to both matrices.
TransformResult fit_apply_transform(FeTechnique kind, const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval);

// Box-Cox style map of y = 1 + x - min; lambda = 0 is the log.
double power_map(double x, double min, double lambda);

// Biased sample skewness g1 (zero for a constant vector).
double skewness(const Eigen::VectorXd& x);

// Throws FeatureError on length mismatch, fewer than two values, or a
// constant input.
double pearson_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct VifReport {
    std::vector<std::string> names;
    // +inf marks an exact linear dependence (or a constant column).
    std::vector<double> values;
    double threshold = 5.0;

    double at(std::string_view name) const;
    // Columns with VIF strictly above the threshold, in report order.
    std::vector<std::string> exceeding() const;
    nlohmann::json to_json() const;
};

// Each column regressed on all others (with intercept) by least squares.
VifReport compute_vif(const Eigen::MatrixXd& X, std::vector<std::string> names, double threshold = 5.0);

struct PruneResult {
    UserFeatureTable table;
    VifReport report;
    std::vector<std::string> removed;
    std::vector<std::string> retained;
};

// Single pass over the named predictors; targets and other columns are left
// untouched. Throws FeatureError if every predictor would be removed.
PruneResult prune_by_vif(const UserFeatureTable& table, std::span<const std::string> predictors,
                         double threshold = 5.0);

// Removes every excluded-composite column present in the schema.
UserFeatureTable drop_composites(const UserFeatureTable& table);
// Removes exactly the named columns; an unknown name is an error.
UserFeatureTable drop_composites(const UserFeatureTable& table, std::span<const std::string> rules);

}  // namespace cqabench
