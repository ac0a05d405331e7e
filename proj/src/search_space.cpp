#include "cqabench/search_space.hpp"

#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <cmath>
#include <sstream>

namespace cqabench {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string format_value(const ParamValue& v) {
    return std::visit(overloaded{[](double d) {
                                     std::ostringstream os;
                                     os.precision(6);
                                     os << d;
                                     return os.str();
                                 },
                                 [](std::int64_t i) { return std::to_string(i); },
                                 [](const std::string& s) { return s; },
                                 [](bool b) { return std::string(b ? "true" : "false"); }},
                      v);
}

nlohmann::json to_json(const ParamValue& v) {
    return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

nlohmann::json to_json(const Assignment& a) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : a) j[k] = to_json(v);
    return j;
}

Assignment assignment_from_json(const nlohmann::json& j) {
    Assignment a;
    for (const auto& [k, v] : j.items()) {
        if (v.is_boolean())
            a[k] = v.get<bool>();
        else if (v.is_number_integer())
            a[k] = v.get<std::int64_t>();
        else if (v.is_number())
            a[k] = v.get<double>();
        else if (v.is_string())
            a[k] = v.get<std::string>();
        else
            throw ConfigError("unsupported hyperparameter value for '" + k + "'");
    }
    return a;
}

bool is_numeric(const ParamValue& v) {
    return std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v);
}

double as_double(const ParamValue& v) {
    if (auto d = std::get_if<double>(&v)) return *d;
    if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
    throw ConfigError("hyperparameter value '" + std::get<std::string>(v) + "' is not numeric");
}

void validate_domain(const Domain& d) {
    std::visit(overloaded{[](const Continuous& c) {
                              if (!(c.lo < c.hi)) throw ConfigError("continuous domain needs lo < hi");
                          },
                          [](const LogContinuous& c) {
                              if (!(c.lo > 0.0)) throw ConfigError("log domain needs a positive lower bound");
                              if (!(c.lo < c.hi)) throw ConfigError("log domain needs lo < hi");
                          },
                          [](const Integer& c) {
                              if (!(c.lo < c.hi)) throw ConfigError("integer domain needs lo < hi");
                              if (c.log && c.lo < 1) throw ConfigError("log integer domain needs lo >= 1");
                          },
                          [](const Categorical& c) {
                              if (c.choices.empty()) throw ConfigError("categorical domain needs a choice");
                          },
                          [](const Boolean&) {}},
               d);
}

bool domain_contains(const Domain& d, const ParamValue& v) {
    return std::visit(
        overloaded{[&](const Continuous& c) {
                       auto x = std::get_if<double>(&v);
                       return x && *x >= c.lo && *x <= c.hi;
                   },
                   [&](const LogContinuous& c) {
                       auto x = std::get_if<double>(&v);
                       return x && *x >= c.lo && *x <= c.hi;
                   },
                   [&](const Integer& c) {
                       auto x = std::get_if<std::int64_t>(&v);
                       return x && *x >= c.lo && *x <= c.hi;
                   },
                   [&](const Categorical& c) {
                       auto x = std::get_if<std::string>(&v);
                       return x && std::find(c.choices.begin(), c.choices.end(), *x) != c.choices.end();
                   },
                   [&](const Boolean&) { return std::holds_alternative<bool>(v); }},
        d);
}

SearchSpace& SearchSpace::add(std::string name, Domain domain) {
    validate_domain(domain);
    if (params_.contains(name)) throw ConfigError("duplicate hyperparameter '" + name + "'");
    params_.emplace(std::move(name), std::move(domain));
    return *this;
}

const Domain& SearchSpace::domain(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown hyperparameter '" + name + "'");
    return it->second;
}

bool SearchSpace::contains(const Assignment& a) const {
    if (a.size() != params_.size()) return false;
    for (const auto& [name, d] : params_) {
        auto it = a.find(name);
        if (it == a.end() || !domain_contains(d, it->second)) return false;
    }
    return true;
}

void SearchSpace::validate(const Assignment& a) const {
    for (const auto& [name, v] : a)
        if (!params_.contains(name)) throw ConfigError("unknown hyperparameter '" + name + "'");
    for (const auto& [name, d] : params_) {
        auto it = a.find(name);
        if (it == a.end()) throw ConfigError("missing hyperparameter '" + name + "'");
        if (!domain_contains(d, it->second))
            throw ConfigError("hyperparameter '" + name + "' = " + format_value(it->second) + " is out of range");
    }
}

Assignment SearchSpace::midpoint() const {
    Assignment a;
    for (const auto& [name, d] : params_) {
        a[name] = std::visit(
            overloaded{[](const Continuous& c) -> ParamValue { return 0.5 * (c.lo + c.hi); },
                       [](const LogContinuous& c) -> ParamValue { return std::sqrt(c.lo * c.hi); },
                       [](const Integer& c) -> ParamValue {
                           if (c.log)
                               return static_cast<std::int64_t>(
                                   std::llround(std::sqrt(static_cast<double>(c.lo) * static_cast<double>(c.hi))));
                           return c.lo + (c.hi - c.lo) / 2;
                       },
                       [](const Categorical& c) -> ParamValue { return c.choices.front(); },
                       [](const Boolean&) -> ParamValue { return false; }},
            d);
    }
    return a;
}

Assignment SearchSpace::sample(Rng& rng) const {
    Assignment a;
    for (const auto& [name, d] : params_) {
        a[name] = std::visit(
            overloaded{[&](const Continuous& c) -> ParamValue { return rng.uniform(c.lo, c.hi); },
                       [&](const LogContinuous& c) -> ParamValue {
                           return std::clamp(std::exp(rng.uniform(std::log(c.lo), std::log(c.hi))), c.lo, c.hi);
                       },
                       [&](const Integer& c) -> ParamValue {
                           if (c.log) {
                               const double x = std::exp(rng.uniform(std::log(c.lo - 0.5), std::log(c.hi + 0.5)));
                               return std::clamp<std::int64_t>(std::llround(x), c.lo, c.hi);
                           }
                           return rng.integer(c.lo, c.hi);
                       },
                       [&](const Categorical& c) -> ParamValue { return c.choices[rng.index(c.choices.size())]; },
                       [&](const Boolean&) -> ParamValue { return rng.bernoulli(0.5); }},
            d);
    }
    return a;
}

Assignment SearchSpace::complete(const Assignment& partial, const Assignment& defaults) const {
    Assignment a = partial;
    for (const auto& [name, d] : params_) {
        if (a.contains(name)) {
            // Accept integral JSON numbers for continuous domains and vice versa.
            auto& v = a[name];
            if (std::holds_alternative<std::int64_t>(v) &&
                (std::holds_alternative<Continuous>(d) || std::holds_alternative<LogContinuous>(d)))
                v = static_cast<double>(std::get<std::int64_t>(v));
            else if (std::holds_alternative<double>(v) && std::holds_alternative<Integer>(d)) {
                const double x = std::get<double>(v);
                if (x == std::round(x)) v = static_cast<std::int64_t>(x);
            }
            continue;
        }
        auto it = defaults.find(name);
        if (it == defaults.end()) throw ConfigError("missing hyperparameter '" + name + "'");
        a[name] = it->second;
    }
    validate(a);
    return a;
}

nlohmann::json SearchSpace::describe() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, d] : params_) {
        j[name] = std::visit(
            overloaded{[](const Continuous& c) { return nlohmann::json{{"type", "continuous"}, {"lo", c.lo}, {"hi", c.hi}}; },
                       [](const LogContinuous& c) {
                           return nlohmann::json{{"type", "log-continuous"}, {"lo", c.lo}, {"hi", c.hi}};
                       },
                       [](const Integer& c) {
                           return nlohmann::json{{"type", "integer"}, {"lo", c.lo}, {"hi", c.hi}, {"log", c.log}};
                       },
                       [](const Categorical& c) { return nlohmann::json{{"type", "categorical"}, {"choices", c.choices}}; },
                       [](const Boolean&) { return nlohmann::json{{"type", "boolean"}}; }},
            d);
    }
    return j;
}

SearchSpace SearchSpace::with_domain(const std::string& name, Domain domain) const {
    validate_domain(domain);
    const Domain& old = this->domain(name);
    if (old.index() != domain.index()) throw ConfigError("override for '" + name + "' changes the domain kind");
    SearchSpace out = *this;
    out.params_[name] = std::move(domain);
    return out;
}

// Overrides are written as [lo, hi] for numeric domains and a list of
// choices for categoricals.
Domain domain_from_json(const nlohmann::json& j, const Domain& like) {
    return std::visit(
        overloaded{[&](const Continuous&) -> Domain { return Continuous{j.at(0).get<double>(), j.at(1).get<double>()}; },
                   [&](const LogContinuous&) -> Domain {
                       return LogContinuous{j.at(0).get<double>(), j.at(1).get<double>()};
                   },
                   [&](const Integer& c) -> Domain {
                       return Integer{j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), c.log};
                   },
                   [&](const Categorical&) -> Domain { return Categorical{j.get<std::vector<std::string>>()}; },
                   [&](const Boolean&) -> Domain { return Boolean{}; }},
        like);
}

}  // namespace cqabench
