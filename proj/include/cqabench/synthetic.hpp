#pragma once

#include "cqabench/table.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>

namespace cqabench {

struct SyntheticProfile {
    // Share of target variance explained by the planted signal.
    double signal_r2 = 0.8;
    // Per-cell missingness for the zero / KNN / EM column groups.
    double zero_missing = 0.10;
    double knn_missing = 0.05;
    double em_missing = 0.08;
    double non_dropout_fraction = 1.0 / 3.0;

    void validate() const;
};

SyntheticProfile synthetic_profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticProfile& p);

// Emits catalog::full_schema(). Missing cells in the zero-imputed group are
// structural zeros: the planted signal is computed from the zero-filled value,
// so zero imputation recovers the generating predictors exactly. Targets
// (Answers, Dropout) are never masked.
UserFeatureTable generate_synthetic_users(std::size_t n, std::uint64_t seed, const SyntheticProfile& profile = {});

}  // namespace cqabench
