#pragma once

// Internal fit entry points, one per registry algorithm. Each returns an
// Estimator whose predict() yields regression values or P(label = 1).

#include "cqabench/models/model.hpp"
#include "cqabench/random.hpp"

#include <memory>
#include <string>

namespace cqabench::detail {

using EstimatorPtr = std::unique_ptr<Estimator>;

struct FitContext {
    const Assignment& params;
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    Task task;
    Rng& rng;

    double real(const std::string& name) const;
    std::int64_t integer(const std::string& name) const;
    const std::string& choice(const std::string& name) const;
    bool flag(const std::string& name) const;
};

EstimatorPtr fit_ols(const FitContext& ctx);
EstimatorPtr fit_logistic(const FitContext& ctx);
EstimatorPtr fit_elastic_net(const FitContext& ctx);
EstimatorPtr fit_ridge_classifier(const FitContext& ctx);
EstimatorPtr fit_lasso_lars(const FitContext& ctx);
EstimatorPtr fit_sgd(const FitContext& ctx);
EstimatorPtr fit_bayesian_ridge(const FitContext& ctx);
EstimatorPtr fit_ard(const FitContext& ctx);
EstimatorPtr fit_huber(const FitContext& ctx);
EstimatorPtr fit_theil_sen(const FitContext& ctx);
EstimatorPtr fit_linear_svm(const FitContext& ctx);

EstimatorPtr fit_epsilon_svr(const FitContext& ctx);
EstimatorPtr fit_nu_svr(const FitContext& ctx);
EstimatorPtr fit_c_svc(const FitContext& ctx);

EstimatorPtr fit_decision_tree(const FitContext& ctx);
EstimatorPtr fit_random_forest(const FitContext& ctx);
EstimatorPtr fit_adaboost(const FitContext& ctx);
EstimatorPtr fit_bagging(const FitContext& ctx);
EstimatorPtr fit_xgboost(const FitContext& ctx);

EstimatorPtr fit_knn(const FitContext& ctx);
EstimatorPtr fit_network(const FitContext& ctx);

EstimatorPtr make_constant(double value);

EstimatorPtr load_linear(const nlohmann::json& j);
EstimatorPtr load_kernel(const nlohmann::json& j);
EstimatorPtr load_forest(const nlohmann::json& j);
EstimatorPtr load_adaboost(const nlohmann::json& j);
EstimatorPtr load_boosting(const nlohmann::json& j);
EstimatorPtr load_knn(const nlohmann::json& j);
EstimatorPtr load_network(const nlohmann::json& j);
EstimatorPtr load_constant(const nlohmann::json& j);

EstimatorPtr load_estimator(const nlohmann::json& j);

// Shared helpers.
double sigmoid(double z);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
void require_finite(const Eigen::VectorXd& v, const char* what);

}  // namespace cqabench::detail
