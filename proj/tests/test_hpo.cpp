#include "cqabench/error.hpp"
#include "cqabench/hpo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

using namespace cqabench;

namespace {

SearchSpace sphere_space(int dims) {
    SearchSpace s;
    for (int i = 0; i < dims; ++i) s.add("x" + std::to_string(i), Continuous{-5, 5});
    return s;
}

double sphere(const Assignment& a) {
    double t = 0.0;
    for (const auto& [k, v] : a) t += std::get<double>(v) * std::get<double>(v);
    return t;
}

}  // namespace

TEST(Tpe, DeterministicAndImproving) {
    TpeOptions o;
    o.n_trials = 40;
    o.seed = 3;
    const auto a = tpe_optimize(sphere, sphere_space(3), o);
    const auto b = tpe_optimize(sphere, sphere_space(3), o);
    EXPECT_EQ(a.best_objective, b.best_objective);
    EXPECT_EQ(a.trials.size(), 40u);
    const auto curve = a.best_so_far();
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i], curve[i - 1]);
    EXPECT_EQ(curve.back(), a.best_objective);
}

TEST(Tpe, MaximizeAndMixedDomains) {
    SearchSpace s;
    s.add("x", Continuous{0, 1}).add("k", Categorical{{"a", "b", "c"}}).add("n", Integer{1, 50, true});
    const Objective f = [](const Assignment& a) {
        const double bonus = std::get<std::string>(a.at("k")) == "c" ? 1.0 : 0.0;
        return bonus - std::abs(std::get<double>(a.at("x")) - 0.3) -
               std::abs(static_cast<double>(std::get<std::int64_t>(a.at("n"))) - 10.0) / 50.0;
    };
    TpeOptions o;
    o.n_trials = 80;
    o.direction = Direction::Maximize;
    const auto r = tpe_optimize(f, s, o);
    EXPECT_EQ(std::get<std::string>(r.best_params.at("k")), "c");
    EXPECT_GT(r.best_objective, 0.8);
    for (const auto& t : r.trials) EXPECT_TRUE(s.contains(t.params));
}

TEST(Tpe, FailedTrialsAreRecorded) {
    int calls = 0;
    const Objective f = [&](const Assignment& a) {
        if (++calls % 3 == 0) throw std::runtime_error("bad point");
        return sphere(a);
    };
    TpeOptions o;
    o.n_trials = 15;
    const auto r = tpe_optimize(f, sphere_space(2), o);
    std::size_t failed = 0;
    for (const auto& t : r.trials) failed += t.ok() ? 0 : 1;
    EXPECT_EQ(failed, 5u);
    const Objective always = [](const Assignment&) -> double { throw std::runtime_error("no"); };
    EXPECT_THROW(tpe_optimize(always, sphere_space(2), o), OptimizationError);
}

TEST(Ga, DeterministicIndependentOfWorkers) {
    GaOptions o;
    o.population = 10;
    o.generations = 8;
    o.seed = 5;
    const auto a = ga_optimize(sphere, sphere_space(3), o);
    o.workers = 3;
    const auto b = ga_optimize(sphere, sphere_space(3), o);
    EXPECT_EQ(a.best_objective, b.best_objective);
    EXPECT_EQ(a.best_params, b.best_params);
    EXPECT_LE(a.budget_used, 80u);
    const auto curve = a.best_so_far();
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i], curve[i - 1]);
}

TEST(Agreement, RelativeRuleAndZeroBaseline) {
    const auto r = agreement_check({{"n", std::int64_t{1199}}, {"lr", 0.259}}, {{"n", std::int64_t{1255}}, {"lr", 0.258}});
    ASSERT_EQ(r.per_param.size(), 2u);
    EXPECT_TRUE(r.pass);
    for (const auto& p : r.per_param) {
        if (p.name == "n") {
            EXPECT_NEAR(p.diff_percent, 56.0 / 1199.0 * 100.0, 1e-12);
        }
        if (p.name == "lr") {
            EXPECT_NEAR(p.diff_percent, 0.001 / 0.259 * 100.0, 1e-9);
        }
        EXPECT_EQ(p.denominator, "bo");
    }
    const auto z = agreement_check({{"a", 0.0}}, {{"a", 0.01}});
    EXPECT_EQ(z.per_param[0].denominator, "absolute");
    EXPECT_NEAR(z.per_param[0].diff_percent, 1.0, 1e-12);
    const auto c = agreement_check({{"k", std::string("rbf")}}, {{"k", std::string("poly")}});
    EXPECT_FALSE(c.pass);
    EXPECT_EQ(c.per_param[0].diff_percent, 100.0);
    EXPECT_THROW(agreement_check({{"a", 1.0}}, {{"b", 1.0}}), ConfigError);
}

TEST(Agreement, BoundaryIsInclusive) {
    EXPECT_TRUE(agreement_check({{"a", 100.0}}, {{"a", 105.0}}, 5.0).pass);
    EXPECT_FALSE(agreement_check({{"a", 100.0}}, {{"a", 105.5}}, 5.0).pass);
}

TEST(Refine, PicksTopKByMetric) {
    std::vector<RefineCell> cells;
    for (int i = 0; i < 4; ++i) {
        RefineCell c;
        c.label = "cell" + std::to_string(i);
        c.metric = static_cast<double>(i % 3);
        c.space = sphere_space(1);
        c.bo_params = {{"x0", 0.0}};
        cells.push_back(c);
    }
    GaOptions ga;
    ga.population = 6;
    ga.generations = 3;
    const auto r = refine_top_k(cells, 2, [](const RefineCell&) { return Objective(sphere); }, ga, Direction::Maximize);
    ASSERT_EQ(r.outcomes.size(), 2u);
    EXPECT_EQ(r.outcomes[0].label, "cell2");
    EXPECT_EQ(r.outcomes[1].label, "cell1");
}
