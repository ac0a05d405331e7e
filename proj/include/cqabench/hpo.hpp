#pragma once

#include "cqabench/search_space.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cqabench {

enum class Direction { Minimize, Maximize };

// May throw; a throwing evaluation is recorded as a failed trial.
using Objective = std::function<double(const Assignment&)>;

struct Trial {
    std::size_t number = 0;
    Assignment params;
    std::optional<double> objective;
    std::string error;

    bool ok() const noexcept { return objective.has_value(); }
};

struct OptimizationResult {
    Direction direction = Direction::Minimize;
    Assignment best_params;
    double best_objective = 0.0;
    std::vector<Trial> trials;
    std::size_t budget_used = 0;

    // Running best over successful trials, one entry per trial (NaN until
    // the first success).
    std::vector<double> best_so_far() const;
    nlohmann::json to_json() const;
};

struct TpeOptions {
    std::size_t n_trials = 100;
    std::size_t startup_trials = 10;
    double gamma = 0.25;
    std::size_t candidates = 24;
    std::uint64_t seed = 42;
    Direction direction = Direction::Minimize;
};

OptimizationResult tpe_optimize(const Objective& objective, const SearchSpace& space, const TpeOptions& options = {});

struct GaOptions {
    std::size_t population = 20;
    std::size_t generations = 25;
    std::size_t tournament = 3;
    double crossover = 0.9;
    double mutation = 0.1;
    std::size_t elitism = 1;
    std::uint64_t seed = 42;
    Direction direction = Direction::Minimize;
    // Concurrent evaluations within a generation; results do not depend on it.
    std::size_t workers = 1;
};

// Evaluates population x generations individuals (elites are carried over
// without re-evaluation, so the budget may be smaller).
OptimizationResult ga_optimize(const Objective& objective, const SearchSpace& space, const GaOptions& options = {});

struct ParamAgreement {
    std::string name;
    ParamValue bo;
    ParamValue ga;
    bool numeric = false;
    // |bo - ga| / |bo| * 100, or |bo - ga| * 100 when bo is zero. Zero or
    // 100 for categorical/boolean pairs.
    double diff_percent = 0.0;
    // "bo" or "absolute"; empty for non-numeric pairs.
    std::string denominator;
    bool pass = false;
};

struct AgreementReport {
    std::vector<ParamAgreement> per_param;
    double tolerance_percent = 5.0;
    bool pass = false;

    nlohmann::json to_json() const;
};

// Throws ConfigError when the parameter names differ.
AgreementReport agreement_check(const Assignment& bo, const Assignment& ga, double tolerance_percent = 5.0);

struct RefineCell {
    std::string label;
    double metric = 0.0;
    Assignment bo_params;
    SearchSpace space;
};

struct RefineOutcome {
    std::string label;
    AgreementReport report;
    OptimizationResult ga;
};

struct RefineResult {
    std::vector<RefineOutcome> outcomes;
    std::vector<std::string> warnings;
};

// Re-optimizes the k best cells (by metric in `metric_direction`; ties keep
// input order) with the GA and checks agreement with their BO optimum.
RefineResult refine_top_k(std::span<const RefineCell> cells, std::size_t k,
                          const std::function<Objective(const RefineCell&)>& objective_factory, const GaOptions& ga,
                          Direction metric_direction = Direction::Maximize, double tolerance_percent = 5.0);

}  // namespace cqabench
