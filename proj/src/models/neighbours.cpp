#include "estimators.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cqabench::detail {

namespace {

enum class Metric { Euclidean, Manhattan, Chebyshev };

Metric parse_metric(const std::string& s) {
    if (s == "minkowski" || s == "euclidean") return Metric::Euclidean;
    if (s == "manhattan") return Metric::Manhattan;
    if (s == "chebyshev") return Metric::Chebyshev;
    throw ConfigError("unknown distance metric '" + s + "'");
}

// Every traversal option resolves to an exact brute-force search, so results
// do not depend on the tree-structure hyperparameters.
class KnnEstimator final : public Estimator {
public:
    KnnEstimator(Eigen::MatrixXd X, Eigen::VectorXd y, std::size_t k, bool distance_weights, std::string metric,
                 std::string algorithm, std::int64_t leaf_size)
        : X_(std::move(X)), y_(std::move(y)), k_(k), distance_(distance_weights), metric_name_(std::move(metric)),
          algorithm_(std::move(algorithm)), leaf_size_(leaf_size), metric_(parse_metric(metric_name_)) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const override {
        const Eigen::Index n = X_.rows();
        Eigen::VectorXd out(Q.rows());
        std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(n));
        for (Eigen::Index q = 0; q < Q.rows(); ++q) {
            for (Eigen::Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = {distance(Q.row(q), X_.row(i)), i};
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_), d.end());
            out(q) = aggregate(d);
        }
        return out;
    }

    nlohmann::json save() const override {
        return {{"kind", "knn"},
                {"X", matrix_to_json(X_)},
                {"y", vector_to_json(y_)},
                {"k", k_},
                {"weights", distance_ ? "distance" : "uniform"},
                {"metric", metric_name_},
                {"algorithm", algorithm_},
                {"leaf_size", leaf_size_}};
    }

private:
    double distance(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
        switch (metric_) {
            case Metric::Euclidean: return (a - b).norm();
            case Metric::Manhattan: return (a - b).cwiseAbs().sum();
            case Metric::Chebyshev: return (a - b).cwiseAbs().maxCoeff();
        }
        return 0.0;
    }

    double aggregate(const std::vector<std::pair<double, Eigen::Index>>& d) const {
        if (!distance_) {
            double s = 0.0;
            for (std::size_t i = 0; i < k_; ++i) s += y_(d[i].second);
            return s / static_cast<double>(k_);
        }
        double zs = 0.0;
        std::size_t zc = 0;
        for (std::size_t i = 0; i < k_; ++i)
            if (d[i].first == 0.0) zs += y_(d[i].second), ++zc;
        if (zc > 0) return zs / static_cast<double>(zc);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < k_; ++i) {
            const double w = 1.0 / d[i].first;
            num += w * y_(d[i].second);
            den += w;
        }
        return num / den;
    }

    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    std::size_t k_;
    bool distance_;
    std::string metric_name_;
    std::string algorithm_;
    std::int64_t leaf_size_;
    Metric metric_;
};

}  // namespace

EstimatorPtr fit_knn(const FitContext& ctx) {
    const auto k = static_cast<std::size_t>(ctx.integer("n_neighbors"));
    if (k > static_cast<std::size_t>(ctx.X.rows()))
        throw ModelError("n_neighbors = " + std::to_string(k) + " exceeds the " + std::to_string(ctx.X.rows()) +
                         " training rows");
    return std::make_unique<KnnEstimator>(ctx.X, ctx.y, k, ctx.choice("weights") == "distance", ctx.choice("metric"),
                                          ctx.choice("algorithm"), ctx.integer("leaf_size"));
}

EstimatorPtr load_knn(const nlohmann::json& j) {
    const Eigen::MatrixXd X = matrix_from_json(j.at("X"));
    const auto k = j.at("k").get<std::size_t>();
    if (k == 0 || k > static_cast<std::size_t>(X.rows())) throw ModelError("malformed serialized KNN model");
    return std::make_unique<KnnEstimator>(X, vector_from_json(j.at("y")), k,
                                          j.at("weights").get<std::string>() == "distance",
                                          j.at("metric").get<std::string>(), j.at("algorithm").get<std::string>(),
                                          j.at("leaf_size").get<std::int64_t>());
}

}  // namespace cqabench::detail
