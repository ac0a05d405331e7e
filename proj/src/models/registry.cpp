#include "cqabench/error.hpp"
#include "cqabench/models/model.hpp"
#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cqabench {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::Linear: return "linear";
        case Family::Bayesian: return "bayesian";
        case Family::OutlierRobust: return "outlier-robust";
        case Family::SupportVector: return "support-vector";
        case Family::Tree: return "tree";
        case Family::Ensemble: return "ensemble";
        case Family::Neighbours: return "neighbours";
        case Family::Deep: return "deep";
    }
    return "?";
}

namespace {

using detail::EstimatorPtr;
using detail::FitContext;
using FitFn = EstimatorPtr (*)(const FitContext&);

struct Entry {
    ModelSpec spec;
    FitFn fit;
};

Integer log_int(std::int64_t lo, std::int64_t hi) { return Integer{lo, hi, true}; }

void add_kernel_params(ModelSpec& s) {
    s.search_space.add("kernel", Categorical{{"rbf", "poly", "linear", "sigmoid"}})
        .add("degree", Integer{1, 4, false})
        .add("coef0", Continuous{0.0, 15.944})
        .add("max_iter", Integer{1, 1836, false});
    s.defaults["kernel"] = std::string("rbf");
    s.defaults["degree"] = std::int64_t{3};
    s.defaults["coef0"] = 0.0;
    s.defaults["max_iter"] = std::int64_t{1000};
}

void add_tree_params(ModelSpec& s) {
    s.search_space.add("max_depth", Integer{1, 20, false})
        .add("min_samples_split", Continuous{0.001, 0.714})
        .add("min_samples_leaf", Continuous{0.0005, 0.16})
        .add("max_features", Continuous{0.05, 1.0});
    s.defaults["max_depth"] = std::int64_t{20};
    s.defaults["min_samples_split"] = 0.001;
    s.defaults["min_samples_leaf"] = 0.0005;
    s.defaults["max_features"] = 1.0;
}

void add_bayes_priors(ModelSpec& s) {
    s.search_space.add("max_iter", Integer{1, 1722, false})
        .add("alpha_1", LogContinuous{1e-8, 7.208})
        .add("alpha_2", LogContinuous{1e-8, 0.092})
        .add("lambda_1", LogContinuous{1e-8, 0.716})
        .add("lambda_2", LogContinuous{1e-8, 19.972})
        .add("compute_score", Boolean{});
    s.defaults["max_iter"] = std::int64_t{300};
    s.defaults["alpha_1"] = 1e-6;
    s.defaults["alpha_2"] = 1e-6;
    s.defaults["lambda_1"] = 1e-6;
    s.defaults["lambda_2"] = 1e-6;
    s.defaults["compute_score"] = false;
}

ModelSpec spec(std::string name, std::string key, Family family, bool regression, bool classification) {
    ModelSpec s;
    s.name = std::move(name);
    s.key = std::move(key);
    s.family = family;
    s.regression = regression;
    s.classification = classification;
    return s;
}

std::vector<Entry> build_entries() {
    std::vector<Entry> out;

    {
        auto s = spec("Ordinary Least Squares", "ols", Family::Linear, true, false);
        s.search_space.add("fit_intercept", Boolean{});
        s.defaults["fit_intercept"] = true;
        out.push_back({std::move(s), detail::fit_ols});
    }
    {
        auto s = spec("Logistic Regression", "logreg", Family::Linear, false, true);
        s.search_space.add("C", LogContinuous{1e-3, 1e3}).add("max_iter", log_int(10, 1000));
        s.defaults["C"] = 1.0;
        s.defaults["max_iter"] = std::int64_t{100};
        out.push_back({std::move(s), detail::fit_logistic});
    }
    {
        auto s = spec("Elastic Net", "elasticnet", Family::Linear, true, false);
        s.search_space.add("alpha", LogContinuous{1e-4, 7.714})
            .add("l1_ratio", Continuous{0.0, 1.0})
            .add("max_iter", log_int(10, 2000));
        s.defaults["alpha"] = 1.0;
        s.defaults["l1_ratio"] = 0.5;
        s.defaults["max_iter"] = std::int64_t{1000};
        out.push_back({std::move(s), detail::fit_elastic_net});
    }
    {
        auto s = spec("Ridge Classifier", "ridge_classifier", Family::Linear, false, true);
        s.search_space.add("alpha", LogContinuous{1e-3, 1e3});
        s.defaults["alpha"] = 1.0;
        out.push_back({std::move(s), detail::fit_ridge_classifier});
    }
    {
        auto s = spec("Lasso LARS", "lasso_lars", Family::Linear, true, false);
        s.search_space.add("alpha", LogContinuous{1e-5, 10.0}).add("max_iter", Integer{1, 1000, false});
        s.defaults["alpha"] = 1.0;
        s.defaults["max_iter"] = std::int64_t{500};
        out.push_back({std::move(s), detail::fit_lasso_lars});
    }
    {
        auto s = spec("Stochastic Gradient Descent", "sgd", Family::Linear, true, true);
        s.search_space.add("alpha", LogContinuous{1e-6, 118.942})
            .add("l1_ratio", Continuous{0.0, 1.0})
            .add("max_iter", log_int(1, 1304))
            .add("eta0", LogContinuous{1e-4, 6.878});
        s.defaults["alpha"] = 1e-4;
        s.defaults["l1_ratio"] = 0.15;
        s.defaults["max_iter"] = std::int64_t{1000};
        s.defaults["eta0"] = 0.01;
        out.push_back({std::move(s), detail::fit_sgd});
    }
    {
        auto s = spec("Bayesian", "bayesian_ridge", Family::Bayesian, true, false);
        add_bayes_priors(s);
        out.push_back({std::move(s), detail::fit_bayesian_ridge});
    }
    {
        auto s = spec("Automatic Relevance Determination", "ard", Family::Bayesian, true, false);
        add_bayes_priors(s);
        s.search_space.add("threshold_lambda", LogContinuous{1e2, 1e5});
        s.defaults["threshold_lambda"] = 1e4;
        out.push_back({std::move(s), detail::fit_ard});
    }
    {
        auto s = spec("Huber", "huber", Family::OutlierRobust, true, false);
        s.search_space.add("epsilon", Continuous{1.0, 29.942})
            .add("max_iter", Integer{10, 1492, false})
            .add("alpha", LogContinuous{1e-6, 12.674});
        s.defaults["epsilon"] = 1.35;
        s.defaults["max_iter"] = std::int64_t{100};
        s.defaults["alpha"] = 1e-4;
        out.push_back({std::move(s), detail::fit_huber});
    }
    {
        auto s = spec("Theil-Sen", "theil_sen", Family::OutlierRobust, true, false);
        s.search_space.add("max_subpopulation", log_int(100, 20000)).add("max_iter", Integer{10, 600, false});
        s.defaults["max_subpopulation"] = std::int64_t{10000};
        s.defaults["max_iter"] = std::int64_t{300};
        out.push_back({std::move(s), detail::fit_theil_sen});
    }
    {
        auto s = spec("Epsilon SVM", "epsilon_svm", Family::SupportVector, true, false);
        add_kernel_params(s);
        s.search_space.add("C", LogContinuous{1e-3, 6.538}).add("epsilon", Continuous{0.0, 1.98});
        s.defaults["C"] = 1.0;
        s.defaults["epsilon"] = 0.1;
        out.push_back({std::move(s), detail::fit_epsilon_svr});
    }
    {
        auto s = spec("Nu SVM", "nu_svm", Family::SupportVector, true, false);
        add_kernel_params(s);
        s.search_space.add("C", LogContinuous{1e-3, 6.538}).add("nu", Continuous{0.01, 1.0});
        s.defaults["C"] = 1.0;
        s.defaults["nu"] = 0.5;
        out.push_back({std::move(s), detail::fit_nu_svr});
    }
    {
        auto s = spec("Linear SVM", "linear_svm", Family::SupportVector, true, true);
        s.search_space.add("C", LogContinuous{1e-3, 1e3})
            .add("epsilon", Continuous{0.0, 2.0})
            .add("max_iter", log_int(10, 2000));
        s.defaults["C"] = 1.0;
        s.defaults["epsilon"] = 0.0;
        s.defaults["max_iter"] = std::int64_t{1000};
        out.push_back({std::move(s), detail::fit_linear_svm});
    }
    {
        auto s = spec("C-SVM", "c_svm", Family::SupportVector, false, true);
        add_kernel_params(s);
        s.search_space.add("C", LogContinuous{1e-3, 1e3});
        s.defaults["C"] = 1.0;
        out.push_back({std::move(s), detail::fit_c_svc});
    }
    {
        auto s = spec("Decision Tree", "decision_tree", Family::Tree, true, true);
        add_tree_params(s);
        out.push_back({std::move(s), detail::fit_decision_tree});
    }
    {
        auto s = spec("Random Forest", "random_forest", Family::Ensemble, true, true);
        add_tree_params(s);
        s.search_space.add("n_estimators", log_int(1, 2400))
            .add("min_weight_fraction_leaf", Continuous{0.0, 0.306})
            .add("max_samples", Continuous{0.001, 1.0})
            .add("oob_score", Boolean{});
        s.defaults["n_estimators"] = std::int64_t{100};
        s.defaults["min_weight_fraction_leaf"] = 0.0;
        s.defaults["max_samples"] = 1.0;
        s.defaults["oob_score"] = false;
        out.push_back({std::move(s), detail::fit_random_forest});
    }
    {
        auto s = spec("AdaBoost", "adaboost", Family::Ensemble, true, true);
        s.search_space.add("n_estimators", log_int(1, 2400)).add("learning_rate", LogContinuous{1e-3, 1.0});
        s.defaults["n_estimators"] = std::int64_t{50};
        s.defaults["learning_rate"] = 1.0;
        out.push_back({std::move(s), detail::fit_adaboost});
    }
    {
        auto s = spec("Bagging", "bagging", Family::Ensemble, true, true);
        s.search_space.add("n_estimators", log_int(1, 2400))
            .add("max_samples", Continuous{0.001, 1.0})
            .add("max_features", Continuous{0.05, 1.0})
            .add("bootstrap", Boolean{})
            .add("bootstrap_features", Boolean{})
            .add("oob_score", Boolean{});
        s.defaults["n_estimators"] = std::int64_t{10};
        s.defaults["max_samples"] = 1.0;
        s.defaults["max_features"] = 1.0;
        s.defaults["bootstrap"] = true;
        s.defaults["bootstrap_features"] = false;
        s.defaults["oob_score"] = false;
        out.push_back({std::move(s), detail::fit_bagging});
    }
    {
        auto s = spec("Extreme Gradient Boosting", "xgboost", Family::Ensemble, true, true);
        s.search_space.add("booster", Categorical{{"gbtree", "gblinear"}})
            .add("max_depth", Integer{1, 20, false})
            .add("subsample", Continuous{0.01, 1.0})
            .add("learning_rate", LogContinuous{1e-3, 1.0})
            .add("n_estimators", log_int(1, 2400))
            .add("reg_alpha", Continuous{0.0, 1.032})
            .add("reg_lambda", Continuous{0.0, 178.0});
        s.defaults["booster"] = std::string("gbtree");
        s.defaults["max_depth"] = std::int64_t{6};
        s.defaults["subsample"] = 1.0;
        s.defaults["learning_rate"] = 0.3;
        s.defaults["n_estimators"] = std::int64_t{100};
        s.defaults["reg_alpha"] = 0.0;
        s.defaults["reg_lambda"] = 1.0;
        out.push_back({std::move(s), detail::fit_xgboost});
    }
    {
        auto s = spec("K-Nearest Neighbours", "knn", Family::Neighbours, true, true);
        s.search_space.add("n_neighbors", Integer{1, 200, false})
            .add("weights", Categorical{{"uniform", "distance"}})
            .add("algorithm", Categorical{{"auto", "ball_tree", "kd_tree", "brute"}})
            .add("leaf_size", Integer{1, 46, false})
            .add("metric", Categorical{{"minkowski", "euclidean", "manhattan", "chebyshev"}});
        s.defaults["n_neighbors"] = std::int64_t{5};
        s.defaults["weights"] = std::string("uniform");
        s.defaults["algorithm"] = std::string("auto");
        s.defaults["leaf_size"] = std::int64_t{30};
        s.defaults["metric"] = std::string("minkowski");
        out.push_back({std::move(s), detail::fit_knn});
    }
    {
        auto s = spec("Neural Network", "neural_network", Family::Deep, true, true);
        s.search_space.add("architecture", Categorical{{"4", "1", "2", "3"}})
            .add("learning_rate", LogContinuous{1e-4, 0.1})
            .add("max_epochs", log_int(1, 400))
            .add("batch_size", log_int(8, 512));
        s.defaults["architecture"] = std::string("4");
        s.defaults["learning_rate"] = 1e-3;
        s.defaults["max_epochs"] = std::int64_t{200};
        s.defaults["batch_size"] = std::int64_t{32};
        out.push_back({std::move(s), detail::fit_network});
    }

    for (const auto& e : out) e.spec.search_space.validate(e.spec.defaults);
    return out;
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> all = build_entries();
    return all;
}

FitFn fit_function(const ModelSpec& spec) {
    for (const auto& e : entries())
        if (e.spec.key == spec.key) return e.fit;
    throw ConfigError("model '" + spec.name + "' is not in the registry");
}

void check_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() == 0) throw ModelError("cannot fit on zero rows");
    if (X.rows() != y.size())
        throw ModelError("design matrix has " + std::to_string(X.rows()) + " rows but target has " +
                         std::to_string(y.size()));
    if (!X.allFinite()) throw ModelError("design matrix contains missing or non-finite values");
    if (!y.allFinite()) throw ModelError("target contains missing or non-finite values");
}

}  // namespace

const std::vector<ModelSpec>& registry() {
    static const std::vector<ModelSpec> specs = [] {
        std::vector<ModelSpec> out;
        for (const auto& e : entries()) out.push_back(e.spec);
        return out;
    }();
    return specs;
}

const ModelSpec& find_model(std::string_view name) {
    for (const auto& s : registry())
        if (s.name == name || s.key == name) return s;
    throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::vector<ModelSpec> models_for(Task task) {
    std::vector<ModelSpec> out;
    for (const auto& s : registry())
        if (s.supports(task)) out.push_back(s);
    return out;
}

namespace detail {

namespace {

const ParamValue& lookup(const Assignment& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing hyperparameter '" + name + "'");
    return it->second;
}

class ConstantEstimator final : public Estimator {
public:
    explicit ConstantEstimator(double value) : value_(value) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return Eigen::VectorXd::Constant(X.rows(), value_); }
    nlohmann::json save() const override { return {{"kind", "constant"}, {"value", value_}}; }

private:
    double value_;
};

}  // namespace

double FitContext::real(const std::string& name) const {
    const auto& v = lookup(params, name);
    if (!is_numeric(v)) throw ConfigError("hyperparameter '" + name + "' must be numeric");
    return as_double(v);
}

std::int64_t FitContext::integer(const std::string& name) const {
    const auto& v = lookup(params, name);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v)) {
        if (std::isfinite(*d)) return static_cast<std::int64_t>(std::llround(*d));
    }
    throw ConfigError("hyperparameter '" + name + "' must be an integer");
}

const std::string& FitContext::choice(const std::string& name) const {
    const auto& v = lookup(params, name);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError("hyperparameter '" + name + "' must be a string choice");
}

bool FitContext::flag(const std::string& name) const {
    const auto& v = lookup(params, name);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError("hyperparameter '" + name + "' must be a boolean");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
        throw ModelError("malformed serialized matrix");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw NonConvergenceError(std::string(what) + " produced non-finite values");
}

EstimatorPtr make_constant(double value) { return std::make_unique<ConstantEstimator>(value); }

EstimatorPtr load_constant(const nlohmann::json& j) { return make_constant(j.at("value").get<double>()); }

EstimatorPtr load_estimator(const nlohmann::json& j) {
    using Loader = EstimatorPtr (*)(const nlohmann::json&);
    static const std::unordered_map<std::string, Loader> loaders = {
        {"linear", load_linear},   {"kernel", load_kernel}, {"forest", load_forest},   {"adaboost", load_adaboost},
        {"boosting", load_boosting}, {"knn", load_knn},     {"network", load_network}, {"constant", load_constant}};
    const auto kind = j.at("kind").get<std::string>();
    const auto it = loaders.find(kind);
    if (it == loaders.end()) throw ModelError("unknown serialized estimator kind '" + kind + "'");
    return it->second(j);
}

}  // namespace detail

FittedModel::FittedModel(std::string name, Task task, std::uint64_t seed, std::size_t rows, std::size_t cols,
                         std::shared_ptr<const detail::Estimator> impl)
    : name_(std::move(name)), task_(task), seed_(seed), rows_(rows), cols_(cols), impl_(std::move(impl)) {
    if (!impl_) throw ModelError("fitted model has no estimator");
}

Prediction FittedModel::predict(const Eigen::MatrixXd& X) const {
    if (cols_ != 0 && static_cast<std::size_t>(X.cols()) != cols_)
        throw ModelError("model '" + name_ + "' was fitted on " + std::to_string(cols_) + " columns, got " +
                         std::to_string(X.cols()));
    Prediction p;
    Eigen::VectorXd raw = impl_->predict(X);
    if (task_ == Task::Regression) {
        p.values = std::move(raw);
        return p;
    }
    p.scores = raw.unaryExpr([](double s) { return std::isfinite(s) ? std::clamp(s, 0.0, 1.0) : 0.5; });
    p.values = p.scores.unaryExpr([](double s) { return s >= 0.5 ? 1.0 : 0.0; });
    return p;
}

nlohmann::json FittedModel::save() const {
    return {{"format_version", kModelFormatVersion},
            {"name", name_},
            {"task", std::string(to_string(task_))},
            {"seed", seed_},
            {"train_rows", rows_},
            {"train_cols", cols_},
            {"estimator", impl_->save()}};
}

FittedModel FittedModel::load(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw ModelError("unsupported model format version " + std::to_string(version));
        const auto task_name = j.at("task").get<std::string>();
        Task task;
        if (task_name == to_string(Task::Regression))
            task = Task::Regression;
        else if (task_name == to_string(Task::Classification))
            task = Task::Classification;
        else
            throw ModelError("unknown task '" + task_name + "' in model file");
        std::shared_ptr<const detail::Estimator> impl = detail::load_estimator(j.at("estimator"));
        return FittedModel(j.at("name").get<std::string>(), task, j.at("seed").get<std::uint64_t>(),
                           j.at("train_rows").get<std::size_t>(), j.at("train_cols").get<std::size_t>(), std::move(impl));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
}

FittedModel fit(const ModelSpec& spec, const Assignment& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                Task task, std::uint64_t seed) {
    if (!spec.supports(task))
        throw ConfigError("model '" + spec.name + "' does not support " + std::string(to_string(task)));
    const FitFn fn = fit_function(spec);
    const Assignment full = spec.search_space.complete(params, spec.defaults);
    check_matrix(X, y);
    if (task == Task::Classification) {
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y(i) != 0.0 && y(i) != 1.0) throw ModelError("classification labels must be 0 or 1");
    }
    Rng rng(seed);
    const FitContext ctx{full, X, y, task, rng};
    std::shared_ptr<const detail::Estimator> impl = fn(ctx);
    return FittedModel(spec.name, task, seed, static_cast<std::size_t>(X.rows()), static_cast<std::size_t>(X.cols()),
                       std::move(impl));
}

FittedModel fit_dummy(Task task, const Eigen::VectorXd& y) {
    if (y.size() == 0) throw ModelError("dummy baseline needs at least one training value");
    double value;
    if (task == Task::Regression) {
        value = y.mean();
    } else {
        const auto ones = static_cast<Eigen::Index>((y.array() == 1.0).count());
        value = ones > y.size() - ones ? 1.0 : 0.0;
    }
    // Columns are irrelevant to a constant model; accept any width.
    return FittedModel("Dummy", task, kDefaultModelSeed, static_cast<std::size_t>(y.size()), 0,
                       detail::make_constant(value));
}

}  // namespace cqabench
