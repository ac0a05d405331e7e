#pragma once

#include "cqabench/table.hpp"

#include <string>
#include <vector>

namespace cqabench::catalog {

inline constexpr const char* kAnswers = "Answers";
inline constexpr const char* kDropout = "Dropout";
inline constexpr const char* kUserDevelopmentIndex = "User Development Index";
inline constexpr const char* kUserManagementIndex = "User Management Index";
inline constexpr const char* kGender = "Gender";

// The twenty user-activity predictors shared by every question.
const std::vector<std::string>& base_predictors();

const std::vector<std::string>& languages();
const std::vector<std::string>& quality_dimensions();
// "<Language> <Dimension> Violation Density", language-major order.
std::vector<std::string> violation_density_columns();

// Every column the synthetic generator emits, composites included.
FeatureSchema full_schema();

// Predictors plus targets for one question, composites flagged.
FeatureSchema schema_for(ResearchQuestion rq);
std::vector<TargetSpec> targets_for(ResearchQuestion rq);
std::vector<std::string> predictors_for(ResearchQuestion rq);

}  // namespace cqabench::catalog
