#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace cqabench {

class Rng;

namespace detail {

struct TreeParams {
    int max_depth = -1;  // -1 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    // Minimum summed `b` per child (sample weight, or hessian for boosting).
    double min_child_weight = 0.0;
    // Features considered per split; 0 = all.
    std::size_t max_features = 0;
    double lambda = 0.0;
    double alpha = 0.0;
    // Minimum gain required to split (xgboost's gamma).
    double min_gain = 1e-12;
};

// Per-feature row orders sorted by value (ties by row index). Computed once
// per design matrix and shared by every tree fitted on it.
using Presorted = std::vector<std::vector<std::int32_t>>;
Presorted presort(const Eigen::MatrixXd& X);

// Binary tree over per-row statistics (a, b). A node's score is
// T(A)^2 / (B + lambda) and its leaf value T(A) / (B + lambda), where T is
// soft-thresholding by alpha. With a = w*y, b = w this is a weighted
// least-squares regression tree; with a = -gradient, b = hessian it is a
// second-order boosting tree. Rows with b == 0 are excluded.
class Tree {
public:
    struct Node {
        std::int32_t feature = -1;
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;
    };

    void fit(const Eigen::MatrixXd& X, const Presorted& order, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
             const TreeParams& params, Rng& rng);
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& a, const Eigen::VectorXd& b, const TreeParams& params,
             Rng& rng);

    double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

    // Multiplies every node value (boosting shrinkage).
    void scale_values(double factor);
    // Rewrites feature indices of a tree fitted on a column subset.
    void remap_features(const std::vector<std::size_t>& columns);

    std::size_t size() const noexcept { return nodes_.size(); }
    int depth() const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    nlohmann::json save() const;
    static Tree load(const nlohmann::json& j);

private:
    std::vector<Node> nodes_;
};

}  // namespace detail
}  // namespace cqabench
