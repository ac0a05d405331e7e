#include "cqabench/error.hpp"
#include "cqabench/evaluation.hpp"
#include "cqabench/models/model.hpp"
#include "cqabench/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace cqabench;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Values in tests/oracles/evaluation_oracles.py.
const std::vector<std::vector<double>> kTied{{1, 2, 2, 3}, {2, 3, 4, 4, 5}, {5, 6, 6}};
const std::vector<std::vector<double>> kPlain{{2.9, 3.0, 2.5, 2.6, 3.2}, {3.8, 2.7, 4.0, 2.4}, {2.8, 3.4, 3.7, 2.2, 2.0}};

}  // namespace

TEST(Metrics, RegressionMatchesSklearn) {
    const auto m = score(vec({3.0, -0.5, 2.0, 7.0, 4.2, 1.1}), vec({2.5, 0.0, 2.0, 8.0, 3.9, 1.4}), Task::Regression);
    EXPECT_NEAR(m.r2, 0.950675278919554, 1e-12);
    EXPECT_NEAR(m.rmse, 0.529150262212918, 1e-12);
    EXPECT_DOUBLE_EQ(m.primary(), m.r2);
}

TEST(Metrics, ClassificationMatchesSklearnForEitherPositiveLabel) {
    const auto yt = vec({0, 0, 1, 1, 0, 1, 0, 1, 1, 0});
    const auto yp = vec({0, 1, 1, 0, 0, 1, 1, 1, 1, 0});
    const auto m0 = score(yt, yp, Task::Classification, 0.0);
    EXPECT_DOUBLE_EQ(m0.accuracy, 0.7);
    EXPECT_NEAR(m0.precision, 0.75, 1e-12);
    EXPECT_NEAR(m0.recall, 0.6, 1e-12);
    EXPECT_NEAR(m0.f1, 0.666666666666667, 1e-12);
    const auto m1 = score(yt, yp, Task::Classification, 1.0);
    EXPECT_NEAR(m1.precision, 0.666666666666667, 1e-12);
    EXPECT_NEAR(m1.recall, 0.8, 1e-12);
    EXPECT_NEAR(m1.f1, 0.727272727272727, 1e-12);
}

TEST(Metrics, UndefinedRatiosAreZero) {
    ConfusionMatrix cm{0, 0, 5, 5, 1.0};
    EXPECT_EQ(cm.precision(), 0.0);
    EXPECT_EQ(cm.recall(), 0.0);
    EXPECT_EQ(cm.f1(), 0.0);
    EXPECT_EQ(cm.accuracy(), 0.5);
}

TEST(Metrics, RejectsBadInput) {
    EXPECT_THROW(score(vec({1, 2}), vec({1}), Task::Regression), EvaluationError);
    EXPECT_THROW(score(Eigen::VectorXd(), Eigen::VectorXd(), Task::Regression), EvaluationError);
    EXPECT_THROW(score(vec({2, 2, 2}), vec({1, 2, 3}), Task::Regression), EvaluationError);
}

TEST(Metrics, MatrixPathAgreesWithVectorPath) {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(60));
        Eigen::VectorXd yt(n), yp(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            yt(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
            yp(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        for (double pos : {0.0, 1.0}) {
            const auto a = score(yt, yp, Task::Classification, pos);
            const auto b = score(ConfusionMatrix::from(yt, yp, pos));
            EXPECT_EQ(a.values(), b.values());
            EXPECT_GE(a.f1, 0.0);
            EXPECT_LE(a.f1, 1.0);
        }
    }
}

TEST(Split, SizesAndDisjointness) {
    for (std::size_t n : {2u, 5u, 10u, 101u, 1000u}) {
        const auto s = split_indices(n, 0.8, 3);
        EXPECT_EQ(s.test.size(), std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(0.2 * n - 1e-9)), 1, n - 1));
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.test.begin(), s.test.end());
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(s.train.size() + s.test.size(), n);
    }
}

TEST(Split, DeterministicPerSeed) {
    const auto a = split_indices(50, 0.8, 9);
    const auto b = split_indices(50, 0.8, 9);
    const auto c = split_indices(50, 0.8, 10);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.test, c.test);
}

TEST(Split, StratifiedKeepsClassShares) {
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) y(i) = i < 30 ? 0.0 : 1.0;
    const auto s = split_indices(100, 0.8, 5, &y);
    ASSERT_EQ(s.test.size(), 20u);
    const auto zeros = std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return y(i) == 0.0; });
    EXPECT_EQ(zeros, 6);
}

TEST(Summary, Formatting) {
    EXPECT_EQ(format_metric(0.5), "0.5");
    EXPECT_EQ(format_metric(0.8806), "0.881");
    EXPECT_EQ(format_metric(0.12345), "0.123");
    EXPECT_EQ(format_metric(2.0), "2.0");
    EXPECT_EQ(format_metric(std::numeric_limits<double>::quiet_NaN()), "N/A");
    EXPECT_EQ(summarize(std::vector<double>{1, 2, 3}), "2.0 ± 0.816 (2.0)");
    const auto d = RunDistribution::from({4, 1, 3, 2});
    EXPECT_DOUBLE_EQ(d.median, 2.5);
    EXPECT_DOUBLE_EQ(d.mean, 2.5);
    EXPECT_NEAR(d.std, std::sqrt(1.25), 1e-15);
}

TEST(KruskalWallis, MatchesScipy) {
    const auto t = kruskal_wallis(kTied);
    EXPECT_NEAR(t.h, 8.06765587529977, 1e-10);
    EXPECT_NEAR(t.p, 0.0177064209853997, 1e-10);
    EXPECT_EQ(t.df, 2u);
    const auto p = kruskal_wallis(kPlain);
    EXPECT_NEAR(p.h, 0.771428571428572, 1e-10);
    EXPECT_NEAR(p.p, 0.679964773578894, 1e-10);
}

TEST(KruskalWallis, DegenerateInputs) {
    const std::vector<std::vector<double>> same{{4, 4}, {4, 4, 4}};
    const auto t = kruskal_wallis(same);
    EXPECT_EQ(t.h, 0.0);
    EXPECT_EQ(t.p, 1.0);
}

TEST(KruskalWallis, InvariantUnderMonotoneMaps) {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::vector<double>> g(3), e(3);
        for (std::size_t k = 0; k < 3; ++k)
            for (int i = 0; i < 6; ++i) {
                const double v = std::round(rng.normal() * 4.0);
                g[k].push_back(v);
                e[k].push_back(std::exp(v / 3.0) + 7.0);
            }
        EXPECT_NEAR(kruskal_wallis(g).h, kruskal_wallis(e).h, 1e-9);
    }
}

TEST(Conover, MatchesIndependentOracle) {
    const double t[] = {-2.55300274321422, -4.97398898436695, -2.85683943225061};
    const double p[] = {0.031041442337405, 0.000765711246374061, 0.0188774340654336};
    const double adj[] = {0.093124327012215, 0.00229713373912218, 0.0566323021963007};
    const auto rep = conover_iman(kTied, 0.01);
    ASSERT_EQ(rep.posthoc.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(rep.posthoc[i].statistic, t[i], 1e-9);
        EXPECT_NEAR(rep.posthoc[i].p_raw, p[i], 1e-10);
        EXPECT_NEAR(rep.posthoc[i].p_adjusted, adj[i], 1e-10);
        EXPECT_EQ(rep.posthoc[i].significant, i == 1);
    }
    const auto plain = conover_iman(kPlain, 0.01);
    EXPECT_NEAR(plain.posthoc[0].statistic, -0.608353070136023, 1e-9);
    EXPECT_NEAR(plain.posthoc[0].p_raw, 0.555306812552282, 1e-10);
    EXPECT_EQ(plain.posthoc[2].p_adjusted, 1.0);
}

TEST(Conover, JsonCarriesLabels) {
    const std::vector<std::string> labels{"a", "b", "c"};
    const auto j = conover_iman(kTied).to_json(labels);
    EXPECT_EQ(j["posthoc"].size(), 3u);
    EXPECT_EQ(j.dump().find("\"a\"") != std::string::npos, true);
}

TEST(KsNormality, MatchesScipyStatistic) {
    const std::vector<double> x{0.12, -1.3, 0.77, 2.1, -0.45, 0.03, 1.6, -0.9, 0.4, 3.2, -2.2, 0.95};
    const auto r = ks_normality(x);
    EXPECT_NEAR(r.statistic, 0.0973817014120101, 1e-12);
    EXPECT_NEAR(r.p, 0.999660316475867, 1e-9);
    EXPECT_THROW(ks_normality(std::vector<double>{1, 2, 3}), EvaluationError);
}

TEST(SelectBest, RanksAndBreaksTies) {
    auto cell = [](std::string fe, std::string model, double r2, double rmse) {
        CellResult c;
        c.fe = std::move(fe);
        c.model = std::move(model);
        c.metrics["r2"] = RunDistribution::from({r2});
        c.metrics["rmse"] = RunDistribution::from({rmse});
        return c;
    };
    std::vector<CellResult> cells{cell("none", "b", 0.5, 1.0), cell("log", "a", 0.6, 2.0), cell("log", "c", 0.6, 1.5),
                                  cell("log", "0", 0.6, 1.5)};
    CellResult na;
    na.na = true;
    cells.push_back(na);
    const auto& best = select_best(cells, Task::Regression);
    EXPECT_EQ(best.model, "0");
    std::vector<CellResult> all_na{na};
    EXPECT_THROW(select_best(all_na, Task::Regression), EvaluationError);
}

TEST(RepeatedEval, IndependentOfWorkerCount) {
    FeatureSchema schema({{"x", Role::Predictor, {}}, {"y", Role::Target, {}}});
    Rng rng(1);
    Eigen::MatrixXd v(80, 2);
    for (int i = 0; i < 80; ++i) {
        v(i, 0) = rng.normal();
        v(i, 1) = 2.0 * v(i, 0) + rng.normal(0.0, 0.5);
    }
    const auto table = UserFeatureTable::complete(schema, v);
    EvalSetup setup{{"x"}, "y", Task::Regression, 1.0, 0.8, 12, 99, 1};
    const Preprocessor prep = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return std::pair{a, b}; };
    const Fitter fitter = [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed) {
        return fit(find_model("ols"), {}, X, y, Task::Regression, seed);
    };
    const auto one = repeated_eval(table, setup, prep, fitter);
    setup.workers = 4;
    const auto four = repeated_eval(table, setup, prep, fitter);
    ASSERT_EQ(one.metrics.at("r2").values.size(), 12u);
    EXPECT_EQ(one.metrics.at("r2").values, four.metrics.at("r2").values);
    EXPECT_GT(one.metrics.at("r2").mean, 0.8);
    EXPECT_EQ(one.failed_runs, 0u);
}

TEST(RepeatedEval, CountsFailures) {
    FeatureSchema schema({{"x", Role::Predictor, {}}, {"y", Role::Target, {}}});
    Eigen::MatrixXd v = Eigen::MatrixXd::Random(20, 2);
    const auto table = UserFeatureTable::complete(schema, v);
    EvalSetup setup{{"x"}, "y", Task::Regression, 1.0, 0.8, 3, 1, 1};
    const Preprocessor prep = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return std::pair{a, b}; };
    const Fitter fitter = [](const Eigen::MatrixXd&, const Eigen::VectorXd&, std::uint64_t) -> FittedModel {
        throw ModelError("boom");
    };
    const auto r = repeated_eval(table, setup, prep, fitter);
    EXPECT_TRUE(r.all_failed());
    EXPECT_EQ(r.failed_runs, 3u);
    EXPECT_NE(r.first_error.find("boom"), std::string::npos);
}
