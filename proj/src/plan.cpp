#include "cqabench/plan.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace cqabench {

ExperimentPlan build_plan(std::span<const ModelSpec> models, std::span<const FeTechnique> fe,
                          std::span<const TargetSpec> targets, std::uint64_t seed) {
    if (models.empty()) throw ConfigError("experiment plan needs at least one model");
    if (fe.empty()) throw ConfigError("experiment plan needs at least one feature-engineering technique");
    if (targets.empty()) throw ConfigError("experiment plan needs at least one target");

    std::set<std::string> seen_models, seen_targets;
    std::set<FeTechnique> seen_fe;
    for (const auto& m : models)
        if (!seen_models.insert(m.name).second) throw ConfigError("model '" + m.name + "' listed twice");
    for (auto f : fe)
        if (!seen_fe.insert(f).second) throw ConfigError("technique '" + std::string(to_string(f)) + "' listed twice");
    for (const auto& t : targets)
        if (!seen_targets.insert(t.name).second) throw ConfigError("target '" + t.name + "' listed twice");
    for (const auto& m : models)
        for (const auto& t : targets)
            if (!m.supports(t.task))
                throw ConfigError("model '" + m.name + "' does not support the " + std::string(to_string(t.task)) +
                                  " target '" + t.name + "'");

    ExperimentPlan plan;
    plan.seed = seed;
    plan.cells.reserve(models.size() * fe.size() * targets.size());
    for (auto f : fe)
        for (const auto& m : models)
            for (const auto& t : targets) plan.cells.push_back({f, m.name, t.name, t.task});
    std::sort(plan.cells.begin(), plan.cells.end(), [](const PlanCell& a, const PlanCell& b) {
        return std::make_tuple(to_string(a.fe), std::string_view(a.model), std::string_view(a.target)) <
               std::make_tuple(to_string(b.fe), std::string_view(b.model), std::string_view(b.target));
    });
    return plan;
}

}  // namespace cqabench
