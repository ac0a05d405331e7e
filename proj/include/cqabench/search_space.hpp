#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cqabench {

class Rng;

struct Continuous {
    double lo = 0.0;
    double hi = 1.0;
};
// Sampled uniformly in log space; both bounds strictly positive.
struct LogContinuous {
    double lo = 1e-3;
    double hi = 1.0;
};
struct Integer {
    std::int64_t lo = 0;
    std::int64_t hi = 1;
    bool log = false;
};
struct Categorical {
    std::vector<std::string> choices;
};
struct Boolean {};

using Domain = std::variant<Continuous, LogContinuous, Integer, Categorical, Boolean>;

using ParamValue = std::variant<double, std::int64_t, std::string, bool>;
using Assignment = std::map<std::string, ParamValue>;

std::string format_value(const ParamValue& v);
nlohmann::json to_json(const ParamValue& v);
nlohmann::json to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);

bool is_numeric(const ParamValue& v);
double as_double(const ParamValue& v);

class SearchSpace {
public:
    SearchSpace() = default;

    // Throws ConfigError if the domain is malformed (lo >= hi, empty
    // categorical, non-positive log bound) or the name is taken.
    SearchSpace& add(std::string name, Domain domain);

    const std::map<std::string, Domain>& params() const noexcept { return params_; }
    bool empty() const noexcept { return params_.empty(); }
    std::size_t size() const noexcept { return params_.size(); }
    const Domain& domain(const std::string& name) const;

    bool contains(const Assignment& a) const;
    // Every parameter at the centre of its domain (geometric centre for log
    // domains, first choice for categoricals, false for booleans).
    Assignment midpoint() const;
    Assignment sample(Rng& rng) const;
    // Fills in absent parameters from `defaults`, then checks membership.
    Assignment complete(const Assignment& partial, const Assignment& defaults) const;
    void validate(const Assignment& a) const;

    nlohmann::json describe() const;

    // Narrows one parameter's domain (used for run-config overrides).
    SearchSpace with_domain(const std::string& name, Domain domain) const;

private:
    std::map<std::string, Domain> params_;
};

bool domain_contains(const Domain& d, const ParamValue& v);
void validate_domain(const Domain& d);
Domain domain_from_json(const nlohmann::json& j, const Domain& like);

}  // namespace cqabench
