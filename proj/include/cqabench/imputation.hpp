#pragma once

#include "cqabench/table.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cqabench {

enum class ImputationKind { Zero, Knn, Em };

std::string_view to_string(ImputationKind kind);
ImputationKind parse_imputation_kind(std::string_view text);

enum class KnnMetric { Euclidean, Manhattan };

struct KnnParams {
    std::size_t k = 5;
    KnnMetric metric = KnnMetric::Euclidean;
    bool inverse_distance = true;
};

struct EmParams {
    // Convergence threshold on the change of the mean per-row observed-data
    // log-likelihood.
    double tolerance = 1e-6;
    std::size_t max_iterations = 100;
    // Seeds the random initial fill of missing cells.
    std::uint64_t seed = 42;
};

struct ImputationStrategy {
    ImputationKind kind = ImputationKind::Zero;
    KnnParams knn;
    EmParams em;

    void validate() const;
};

class StrategyMap {
public:
    // Throws ConfigError if the column is already assigned or the strategy is
    // invalid.
    StrategyMap& assign(std::string column, ImputationStrategy strategy);

    const std::vector<std::pair<std::string, ImputationStrategy>>& assignments() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::vector<std::string> columns_with(ImputationKind kind) const;

private:
    std::vector<std::pair<std::string, ImputationStrategy>> entries_;
};

// Default column groups per strategy, restricted to columns present in `schema`.
StrategyMap default_strategy_map(const FeatureSchema& schema);

// {"zero": [names...], "knn": [...], "em": [...], "knn_k": 5, ...}; names may
// end in '*' to match a prefix.
StrategyMap strategy_map_from_json(const nlohmann::json& j, const FeatureSchema& schema);

UserFeatureTable impute_zero(const UserFeatureTable& table, std::string_view column);

// Neighbour space: the given columns, standardized over all rows.
UserFeatureTable impute_knn(const UserFeatureTable& table, std::string_view column, const KnnParams& params,
                            std::span<const std::string> neighbour_columns);
// Neighbour space: every complete predictor column other than `column`.
UserFeatureTable impute_knn(const UserFeatureTable& table, std::string_view column, const KnnParams& params = {});
std::vector<std::string> default_neighbour_columns(const UserFeatureTable& table, std::string_view exclude = {});

struct EmResult {
    UserFeatureTable table;
    bool converged = false;
    std::size_t iterations = 0;
    // Observed-data log-likelihood per iteration, starting at the initial
    // parameters.
    std::vector<double> log_likelihood;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::vector<std::string> warnings;
};

// Multivariate Gaussian EM over the column group; missing cells become their
// conditional expectation under the final parameters.
EmResult impute_em(const UserFeatureTable& table, std::span<const std::string> columns, const EmParams& params = {});

struct ImputationReport {
    UserFeatureTable table;
    std::vector<std::string> warnings;
    bool em_converged = true;
};

// Zero columns, then KNN columns (neighbour space = predictors complete after
// the zero stage), then one EM fit per distinct EM parameter set.
ImputationReport apply_strategy_map(const UserFeatureTable& table, const StrategyMap& map);

}  // namespace cqabench
