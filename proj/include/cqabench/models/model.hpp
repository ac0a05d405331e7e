#pragma once

#include "cqabench/search_space.hpp"
#include "cqabench/table.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cqabench {

enum class Family { Linear, Bayesian, OutlierRobust, SupportVector, Tree, Ensemble, Neighbours, Deep };
std::string_view to_string(Family family);

inline constexpr std::uint64_t kDefaultModelSeed = 42;

struct ModelSpec {
    std::string name;
    // Short identifier accepted in run configs.
    std::string key;
    Family family = Family::Linear;
    bool regression = false;
    bool classification = false;
    SearchSpace search_space;
    // Library-style defaults, used when no tuned assignment is available.
    Assignment defaults;

    bool supports(Task task) const noexcept { return task == Task::Regression ? regression : classification; }
};

// The closed list of 21 algorithms, in a fixed order.
const std::vector<ModelSpec>& registry();
// Looks up by display name or key; throws ConfigError.
const ModelSpec& find_model(std::string_view name);
std::vector<ModelSpec> models_for(Task task);

// Classification labels are 0/1; `scores` is the estimated probability of
// label 1 and `values` the thresholded label. Regression fills `values` only.
struct Prediction {
    Eigen::VectorXd values;
    Eigen::VectorXd scores;
};

namespace detail {
class Estimator {
public:
    virtual ~Estimator() = default;
    // Regression value, or probability of label 1.
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
    virtual nlohmann::json save() const = 0;
};
}  // namespace detail

class FittedModel {
public:
    FittedModel(std::string name, Task task, std::uint64_t seed, std::size_t rows, std::size_t cols,
                std::shared_ptr<const detail::Estimator> impl);

    const std::string& name() const noexcept { return name_; }
    Task task() const noexcept { return task_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t train_rows() const noexcept { return rows_; }
    std::size_t train_cols() const noexcept { return cols_; }
    const detail::Estimator& estimator() const { return *impl_; }

    // Throws ModelError when the column count differs from training. A model
    // trained with zero columns (the dummy) accepts any width.
    Prediction predict(const Eigen::MatrixXd& X) const;

    // Versioned JSON document; load() restores identical predictions.
    nlohmann::json save() const;
    static FittedModel load(const nlohmann::json& j);

private:
    std::string name_;
    Task task_;
    std::uint64_t seed_;
    std::size_t rows_;
    std::size_t cols_;
    std::shared_ptr<const detail::Estimator> impl_;
};

inline constexpr int kModelFormatVersion = 1;

// Rejects task/spec mismatches and out-of-space parameters before any work.
// Absent parameters are filled from the spec defaults.
FittedModel fit(const ModelSpec& spec, const Assignment& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                Task task, std::uint64_t seed = kDefaultModelSeed);

// Mean (regression) or modal label (classification; ties to the smaller label).
FittedModel fit_dummy(Task task, const Eigen::VectorXd& y);

}  // namespace cqabench
