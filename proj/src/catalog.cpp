#include "cqabench/catalog.hpp"

#include <algorithm>

namespace cqabench::catalog {

const std::vector<std::string>& base_predictors() {
    static const std::vector<std::string> names = {
        "Post Attention to Detail", "Post Readability", "Badges", "User Contribution Frequency",
        "Reputation", "YearlyDurationUsage", "User Profile Completion Rate", "Questions", "Comments",
        "Edits", "AboutMe Polarity", "ProfileLength", "Views", "UpVotes", "User Popularity Index",
        "Comment Polarity", "Answer Polarity", "Question Polarity", "Code Length", "DownVotes",
    };
    return names;
}

const std::vector<std::string>& languages() {
    static const std::vector<std::string> names = {"SQL", "JavaScript", "Python", "Ruby", "Java"};
    return names;
}

const std::vector<std::string>& quality_dimensions() {
    static const std::vector<std::string> names = {"Reliability", "Readability", "Performance", "Security"};
    return names;
}

std::vector<std::string> violation_density_columns() {
    std::vector<std::string> out;
    for (const auto& lang : languages())
        for (const auto& dim : quality_dimensions()) out.push_back(lang + " " + dim + " Violation Density");
    return out;
}

namespace {

ColumnSpec predictor(std::string name) { return {std::move(name), Role::Predictor, {}}; }
ColumnSpec composite(std::string name) { return {std::move(name), Role::ExcludedComposite, {}}; }
ColumnSpec target(std::string name) {
    std::string t = name;
    return {std::move(name), Role::Target, {std::move(t)}};
}

}  // namespace

FeatureSchema full_schema() {
    std::vector<ColumnSpec> cols;
    for (const auto& n : base_predictors()) cols.push_back(predictor(n));
    cols.push_back(predictor(kAnswers));
    for (const auto& n : violation_density_columns()) cols.push_back(predictor(n));
    cols.push_back(predictor(kDropout));
    cols.push_back(composite(kUserDevelopmentIndex));
    cols.push_back(composite(kUserManagementIndex));
    return FeatureSchema(std::move(cols));
}

FeatureSchema schema_for(ResearchQuestion rq) {
    std::vector<ColumnSpec> cols;
    for (const auto& n : predictors_for(rq)) cols.push_back(predictor(n));
    for (const auto& t : targets_for(rq)) cols.push_back(target(t.name));
    cols.push_back(composite(kUserDevelopmentIndex));
    cols.push_back(composite(kUserManagementIndex));
    return FeatureSchema(std::move(cols));
}

std::vector<TargetSpec> targets_for(ResearchQuestion rq) {
    switch (rq) {
        case ResearchQuestion::RQ1:
            return {{kAnswers, Task::Regression, rq}};
        case ResearchQuestion::RQ2: {
            std::vector<TargetSpec> out;
            for (const auto& n : violation_density_columns()) out.push_back({n, Task::Regression, rq});
            return out;
        }
        case ResearchQuestion::RQ3:
            return {{kDropout, Task::Classification, rq}};
    }
    return {};
}

std::vector<std::string> predictors_for(ResearchQuestion rq) {
    std::vector<std::string> out = base_predictors();
    if (rq == ResearchQuestion::RQ2 || rq == ResearchQuestion::RQ3) out.push_back(kAnswers);
    if (rq == ResearchQuestion::RQ3) {
        const auto v = violation_density_columns();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace cqabench::catalog
