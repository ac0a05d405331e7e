#include "cqabench/hpo.hpp"

#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

namespace cqabench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Numeric domains are searched in an internal real coordinate: log space for
// log domains, and a half-unit padded interval for integers.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
    bool integer = false;
    std::int64_t ilo = 0;
    std::int64_t ihi = 0;
};

std::optional<Axis> numeric_axis(const Domain& d) {
    if (const auto* c = std::get_if<Continuous>(&d)) return Axis{c->lo, c->hi, false, false, 0, 0};
    if (const auto* c = std::get_if<LogContinuous>(&d)) return Axis{std::log(c->lo), std::log(c->hi), true, false, 0, 0};
    if (const auto* c = std::get_if<Integer>(&d)) {
        const double lo = static_cast<double>(c->lo) - 0.5;
        const double hi = static_cast<double>(c->hi) + 0.5;
        if (c->log) return Axis{std::log(std::max(lo, 0.5)), std::log(hi), true, true, c->lo, c->hi};
        return Axis{lo, hi, false, true, c->lo, c->hi};
    }
    return std::nullopt;
}

double encode(const Axis& a, const ParamValue& v) {
    const double x = as_double(v);
    return a.log ? std::log(x) : x;
}

ParamValue decode(const Axis& a, double u) {
    u = std::clamp(u, a.lo, a.hi);
    const double x = a.log ? std::exp(u) : u;
    if (a.integer) return std::clamp<std::int64_t>(std::llround(x), a.ilo, a.ihi);
    if (a.log) return std::clamp(x, std::exp(a.lo), std::exp(a.hi));
    return x;
}

std::vector<std::string> choices_of(const Domain& d) {
    if (const auto* c = std::get_if<Categorical>(&d)) return c->choices;
    return {"false", "true"};
}

ParamValue choice_value(const Domain& d, std::size_t i) {
    if (const auto* c = std::get_if<Categorical>(&d)) return c->choices[i];
    return i == 1;
}

std::size_t choice_index(const Domain& d, const ParamValue& v) {
    if (const auto* c = std::get_if<Categorical>(&d)) {
        const auto& s = std::get<std::string>(v);
        return static_cast<std::size_t>(std::find(c->choices.begin(), c->choices.end(), s) - c->choices.begin());
    }
    return std::get<bool>(v) ? 1 : 0;
}

double loss_of(double objective, Direction dir) { return dir == Direction::Minimize ? objective : -objective; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One-dimensional Parzen estimator: truncated Gaussians at the observations
// plus a broad prior component, bandwidths from neighbour spacing.
class Parzen {
public:
    Parzen(const Axis& axis, std::vector<double> obs) : lo_(axis.lo), hi_(axis.hi) {
        const double range = hi_ - lo_;
        const double prior = 0.5 * (lo_ + hi_);
        obs.push_back(prior);
        std::vector<std::size_t> order(obs.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return obs[a] < obs[b]; });
        const double min_sigma = range / std::min(100.0, 1.0 + static_cast<double>(obs.size()));
        mu_.resize(obs.size());
        sigma_.resize(obs.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            const std::size_t i = order[k];
            mu_[i] = obs[i];
            const double left = k > 0 ? obs[i] - obs[order[k - 1]] : obs[i] - lo_;
            const double right = k + 1 < order.size() ? obs[order[k + 1]] - obs[i] : hi_ - obs[i];
            sigma_[i] = std::clamp(std::max(left, right), min_sigma, range);
        }
        sigma_.back() = range;
        mass_.resize(obs.size());
        for (std::size_t i = 0; i < mu_.size(); ++i)
            mass_[i] = std::max(normal_cdf((hi_ - mu_[i]) / sigma_[i]) - normal_cdf((lo_ - mu_[i]) / sigma_[i]), 1e-300);
    }

    double sample(Rng& rng) const {
        const std::size_t i = rng.index(mu_.size());
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double x = rng.normal(mu_[i], sigma_[i]);
            if (x >= lo_ && x <= hi_) return x;
        }
        return std::clamp(mu_[i], lo_, hi_);
    }

    double log_density(double x) const {
        double p = 0.0;
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            const double z = (x - mu_[i]) / sigma_[i];
            p += std::exp(-0.5 * z * z) / (sigma_[i] * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
        }
        return std::log(std::max(p / static_cast<double>(mu_.size()), 1e-300));
    }

private:
    double lo_, hi_;
    std::vector<double> mu_, sigma_, mass_;
};

class Histogram {
public:
    Histogram(std::size_t k, const std::vector<std::size_t>& obs) : p_(k, 1.0) {
        for (auto i : obs) p_[i] += 1.0;
        const double total = std::accumulate(p_.begin(), p_.end(), 0.0);
        for (auto& v : p_) v /= total;
    }
    std::size_t sample(Rng& rng) const {
        double u = rng.uniform();
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (u < p_[i]) return i;
            u -= p_[i];
        }
        return p_.size() - 1;
    }
    double log_density(std::size_t i) const { return std::log(p_[i]); }

private:
    std::vector<double> p_;
};

void finalize(OptimizationResult& r) {
    bool any = false;
    for (const auto& t : r.trials) {
        if (!t.ok()) continue;
        if (!any || loss_of(*t.objective, r.direction) < loss_of(r.best_objective, r.direction)) {
            r.best_objective = *t.objective;
            r.best_params = t.params;
            any = true;
        }
    }
    r.budget_used = r.trials.size();
    if (!any) {
        const std::string first = r.trials.empty() ? std::string("no trials") : r.trials.front().error;
        throw OptimizationError("every trial failed (first error: " + first + ")");
    }
}

Trial evaluate(const Objective& f, std::size_t number, Assignment params) {
    Trial t;
    t.number = number;
    t.params = std::move(params);
    try {
        const double v = f(t.params);
        if (std::isfinite(v))
            t.objective = v;
        else
            t.error = "objective returned a non-finite value";
    } catch (const std::exception& e) {
        t.error = e.what();
    }
    return t;
}

}  // namespace

std::vector<double> OptimizationResult::best_so_far() const {
    std::vector<double> out;
    double best = kNaN;
    for (const auto& t : trials) {
        if (t.ok() && (std::isnan(best) || loss_of(*t.objective, direction) < loss_of(best, direction)))
            best = *t.objective;
        out.push_back(best);
    }
    return out;
}

nlohmann::json OptimizationResult::to_json() const {
    nlohmann::json trials_j = nlohmann::json::array();
    for (const auto& t : trials) {
        nlohmann::json tj = {{"number", t.number}, {"params", cqabench::to_json(t.params)}};
        if (t.ok())
            tj["objective"] = *t.objective;
        else
            tj["error"] = t.error;
        trials_j.push_back(std::move(tj));
    }
    return {{"direction", direction == Direction::Minimize ? "minimize" : "maximize"},
            {"best_params", cqabench::to_json(best_params)},
            {"best_objective", best_objective},
            {"budget_used", budget_used},
            {"trials", trials_j}};
}

OptimizationResult tpe_optimize(const Objective& objective, const SearchSpace& space, const TpeOptions& options) {
    if (options.n_trials < 1) throw ConfigError("TPE needs at least one trial");
    if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw ConfigError("TPE gamma must lie in (0, 1)");
    if (options.candidates < 1) throw ConfigError("TPE needs at least one candidate per proposal");
    if (space.empty()) throw ConfigError("cannot optimize over an empty search space");

    Rng rng(options.seed);
    OptimizationResult result;
    result.direction = options.direction;
    for (std::size_t n = 0; n < options.n_trials; ++n) {
        std::vector<const Trial*> done;
        for (const auto& t : result.trials)
            if (t.ok()) done.push_back(&t);

        Assignment proposal;
        if (n < options.startup_trials || done.size() < 2) {
            proposal = space.sample(rng);
        } else {
            std::stable_sort(done.begin(), done.end(), [&](const Trial* a, const Trial* b) {
                return loss_of(*a->objective, options.direction) < loss_of(*b->objective, options.direction);
            });
            const auto n_good = std::min(
                done.size() - 1,
                std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(done.size())))));

            std::vector<Assignment> candidates(options.candidates);
            std::vector<double> score(options.candidates, 0.0);
            for (const auto& [name, domain] : space.params()) {
                if (const auto axis = numeric_axis(domain)) {
                    std::vector<double> good, bad;
                    for (std::size_t i = 0; i < done.size(); ++i)
                        (i < n_good ? good : bad).push_back(encode(*axis, done[i]->params.at(name)));
                    const Parzen l(*axis, good), g(*axis, bad);
                    for (std::size_t c = 0; c < options.candidates; ++c) {
                        const double u = l.sample(rng);
                        const ParamValue v = decode(*axis, u);
                        const double ue = encode(*axis, v);
                        candidates[c][name] = v;
                        score[c] += l.log_density(ue) - g.log_density(ue);
                    }
                } else {
                    const std::size_t k = choices_of(domain).size();
                    std::vector<std::size_t> good, bad;
                    for (std::size_t i = 0; i < done.size(); ++i)
                        (i < n_good ? good : bad).push_back(choice_index(domain, done[i]->params.at(name)));
                    const Histogram l(k, good), g(k, bad);
                    for (std::size_t c = 0; c < options.candidates; ++c) {
                        const std::size_t i = l.sample(rng);
                        candidates[c][name] = choice_value(domain, i);
                        score[c] += l.log_density(i) - g.log_density(i);
                    }
                }
            }
            const auto best = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
            proposal = std::move(candidates[best]);
        }
        result.trials.push_back(evaluate(objective, n, std::move(proposal)));
    }
    finalize(result);
    return result;
}

namespace {

struct Individual {
    Assignment params;
    double loss = std::numeric_limits<double>::infinity();
};

Assignment mutate(const SearchSpace& space, Assignment a, double rate, Rng& rng) {
    for (const auto& [name, domain] : space.params()) {
        if (!rng.bernoulli(rate)) continue;
        if (const auto axis = numeric_axis(domain)) {
            const double u = encode(*axis, a.at(name)) + rng.normal(0.0, 0.1 * (axis->hi - axis->lo));
            a[name] = decode(*axis, u);
        } else {
            const std::size_t k = choices_of(domain).size();
            const std::size_t current = choice_index(domain, a.at(name));
            std::size_t next = rng.index(k - 1);
            if (next >= current) ++next;
            a[name] = choice_value(domain, next);
        }
    }
    return a;
}

void evaluate_batch(const Objective& f, std::vector<Trial>& out, std::vector<Assignment> batch, std::size_t first,
                    std::size_t workers) {
    std::vector<Trial> trials(batch.size());
    if (workers <= 1 || batch.size() <= 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) trials[i] = evaluate(f, first + i, std::move(batch[i]));
    } else {
        std::vector<std::thread> pool;
        const std::size_t w = std::min(workers, batch.size());
        for (std::size_t t = 0; t < w; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < batch.size(); i += w) trials[i] = evaluate(f, first + i, batch[i]);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& t : trials) out.push_back(std::move(t));
}

}  // namespace

OptimizationResult ga_optimize(const Objective& objective, const SearchSpace& space, const GaOptions& options) {
    if (options.population < 2) throw ConfigError("GA population must be at least 2");
    if (options.generations < 1) throw ConfigError("GA needs at least one generation");
    if (options.tournament < 1) throw ConfigError("GA tournament size must be at least 1");
    if (options.elitism >= options.population) throw ConfigError("GA elitism must be smaller than the population");
    if (space.empty()) throw ConfigError("cannot optimize over an empty search space");

    Rng rng(options.seed);
    OptimizationResult result;
    result.direction = options.direction;

    std::vector<Assignment> batch;
    for (std::size_t i = 0; i < options.population; ++i) batch.push_back(space.sample(rng));
    std::vector<Individual> pop;
    auto absorb = [&](std::vector<Assignment> fresh, std::vector<Individual> carried) {
        const std::size_t first = result.trials.size();
        evaluate_batch(objective, result.trials, std::move(fresh), first, options.workers);
        pop = std::move(carried);
        for (std::size_t i = first; i < result.trials.size(); ++i) {
            const auto& t = result.trials[i];
            pop.push_back({t.params, t.ok() ? loss_of(*t.objective, options.direction)
                                            : std::numeric_limits<double>::infinity()});
        }
    };
    absorb(std::move(batch), {});

    for (std::size_t gen = 1; gen < options.generations; ++gen) {
        std::vector<std::size_t> rank(pop.size());
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return pop[a].loss < pop[b].loss; });
        std::vector<Individual> elites;
        for (std::size_t e = 0; e < options.elitism; ++e) elites.push_back(pop[rank[e]]);

        auto tournament = [&]() -> const Individual& {
            std::size_t best = rng.index(pop.size());
            for (std::size_t t = 1; t < options.tournament; ++t) {
                const std::size_t c = rng.index(pop.size());
                if (pop[c].loss < pop[best].loss) best = c;
            }
            return pop[best];
        };
        std::vector<Assignment> children;
        while (children.size() + elites.size() < options.population) {
            const Individual& a = tournament();
            const Individual& b = tournament();
            Assignment child = a.params;
            if (rng.bernoulli(options.crossover))
                for (const auto& [name, d] : space.params())
                    if (rng.bernoulli(0.5)) child[name] = b.params.at(name);
            children.push_back(mutate(space, std::move(child), options.mutation, rng));
        }
        absorb(std::move(children), std::move(elites));
    }
    finalize(result);
    return result;
}

AgreementReport agreement_check(const Assignment& bo, const Assignment& ga, double tolerance_percent) {
    if (!(tolerance_percent >= 0.0)) throw ConfigError("agreement tolerance must be non-negative");
    if (bo.size() != ga.size()) throw ConfigError("BO and GA assignments name different parameters");
    AgreementReport report;
    report.tolerance_percent = tolerance_percent;
    report.pass = true;
    for (const auto& [name, bv] : bo) {
        const auto it = ga.find(name);
        if (it == ga.end()) throw ConfigError("parameter '" + name + "' is missing from the GA assignment");
        const ParamValue& gv = it->second;
        ParamAgreement p;
        p.name = name;
        p.bo = bv;
        p.ga = gv;
        p.numeric = is_numeric(bv) && is_numeric(gv);
        if (p.numeric) {
            const double b = as_double(bv);
            const double g = as_double(gv);
            if (b != 0.0) {
                p.diff_percent = std::abs(b - g) / std::abs(b) * 100.0;
                p.denominator = "bo";
            } else {
                p.diff_percent = std::abs(b - g) * 100.0;
                p.denominator = "absolute";
            }
            p.pass = p.diff_percent <= tolerance_percent;
        } else {
            if (is_numeric(bv) != is_numeric(gv)) throw ConfigError("parameter '" + name + "' changes kind between BO and GA");
            p.pass = bv == gv;
            p.diff_percent = p.pass ? 0.0 : 100.0;
        }
        report.pass = report.pass && p.pass;
        report.per_param.push_back(std::move(p));
    }
    return report;
}

nlohmann::json AgreementReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : per_param) {
        nlohmann::json r = {{"name", p.name},
                            {"bo", cqabench::to_json(p.bo)},
                            {"ga", cqabench::to_json(p.ga)},
                            {"diff_percent", p.diff_percent},
                            {"pass", p.pass}};
        if (!p.denominator.empty()) r["denominator"] = p.denominator;
        rows.push_back(std::move(r));
    }
    return {{"tolerance_percent", tolerance_percent}, {"pass", pass}, {"parameters", rows}};
}

RefineResult refine_top_k(std::span<const RefineCell> cells, std::size_t k,
                          const std::function<Objective(const RefineCell&)>& objective_factory, const GaOptions& ga,
                          Direction metric_direction, double tolerance_percent) {
    if (cells.empty()) throw ConfigError("refine_top_k needs at least one grid result");
    RefineResult out;
    if (k > cells.size()) {
        out.warnings.push_back("requested the top " + std::to_string(k) + " cells but only " +
                               std::to_string(cells.size()) + " are available");
        k = cells.size();
    }
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double la = loss_of(cells[a].metric, metric_direction);
        const double lb = loss_of(cells[b].metric, metric_direction);
        if (std::isnan(la)) return false;
        if (std::isnan(lb)) return true;
        return la < lb;
    });
    for (std::size_t i = 0; i < k; ++i) {
        const RefineCell& cell = cells[order[i]];
        RefineOutcome o;
        o.label = cell.label;
        o.ga = ga_optimize(objective_factory(cell), cell.space, ga);
        o.report = agreement_check(cell.bo_params, o.ga.best_params, tolerance_percent);
        out.outcomes.push_back(std::move(o));
    }
    return out;
}

}  // namespace cqabench
