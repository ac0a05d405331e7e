#pragma once

#include "cqabench/features.hpp"
#include "cqabench/models/model.hpp"
#include "cqabench/table.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cqabench {

struct PlanCell {
    FeTechnique fe = FeTechnique::None;
    std::string model;
    std::string target;
    Task task = Task::Regression;

    bool operator==(const PlanCell&) const = default;
};

struct ExperimentPlan {
    std::vector<PlanCell> cells;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return cells.size(); }
};

// Full FE x model x target product ordered by (FE name, model name, target
// name). Throws ConfigError on empty inputs, duplicates, or a model that does
// not support a target's task.
ExperimentPlan build_plan(std::span<const ModelSpec> models, std::span<const FeTechnique> fe,
                          std::span<const TargetSpec> targets, std::uint64_t seed);

}  // namespace cqabench
