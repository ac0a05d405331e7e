#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/imputation.hpp"
#include "cqabench/random.hpp"
#include "cqabench/synthetic.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cqabench;

namespace {

UserFeatureTable random_table(std::size_t n, std::size_t cols, double missing, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ColumnSpec> specs;
    for (std::size_t c = 0; c < cols; ++c) specs.push_back({"c" + std::to_string(c), Role::Predictor, {}});
    Eigen::MatrixXd v(n, cols);
    MissingMask m = MissingMask::Constant(n, cols, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cols; ++c) {
            v(i, c) = rng.normal(static_cast<double>(c), 1.0 + static_cast<double>(c));
            m(i, c) = c == 0 && rng.bernoulli(missing);
        }
    return UserFeatureTable(FeatureSchema(specs), v, m);
}

}  // namespace

TEST(Zero, FillsOnlyMaskedCells) {
    const auto t = random_table(50, 3, 0.3, 1);
    const auto z = impute_zero(t, "c0");
    EXPECT_EQ(z.missing_count(), 0u);
    for (std::size_t r = 0; r < t.rows(); ++r) EXPECT_EQ(z.at(r, 0), t.missing(r, 0) ? 0.0 : t.at(r, 0));
}

TEST(Knn, MatchesBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (bool inverse : {true, false}) {
            const auto t = random_table(120, 4, 0.25, seed);
            const KnnParams p{3, KnnMetric::Euclidean, inverse};
            const Eigen::VectorXd got = impute_knn(t, "c0", p).values().col(0);
            EXPECT_EQ(got, oracle::knn_fill(t, 0, {1, 2, 3}, 3, inverse)) << seed;
        }
}

TEST(Knn, ExactDuplicatesTakeTheirMean) {
    FeatureSchema s({{"y", Role::Predictor, {}}, {"x", Role::Predictor, {}}});
    Eigen::MatrixXd v(5, 2);
    v << 1, 0, 3, 0, 10, 5, 20, 6, 0, 0;
    MissingMask m = MissingMask::Constant(5, 2, false);
    m(4, 0) = true;
    const auto out = impute_knn(UserFeatureTable(s, v, m), "y", KnnParams{3, KnnMetric::Euclidean, true});
    EXPECT_DOUBLE_EQ(out.at(4, 0), 2.0);
}

TEST(Knn, ErrorsOnUnusableInput) {
    auto t = random_table(10, 2, 1.0, 2);
    EXPECT_THROW(impute_knn(t, "c0"), ImputationError);
    t = random_table(10, 2, 0.0, 2);
    EXPECT_NO_THROW(impute_knn(t, "c0"));
    EXPECT_THROW(impute_knn(random_table(10, 2, 0.5, 3), "c0", KnnParams{0}), ConfigError);
    EXPECT_THROW(impute_knn(random_table(6, 2, 0.5, 4), "c0", KnnParams{5}), ImputationError);
}

TEST(Em, MatchesClosedFormForMonotoneMissingness) {
    // With only y missing, the observed-data MLE is available in closed form:
    // mean of x over all rows, regression of y on x over complete rows.
    const oracle::Bivariate b;
    const auto t = oracle::bivariate_table(b, 2000, 0.2, 17);
    const std::vector<std::string> cols{"x", "y"};
    const auto r = impute_em(t, cols, EmParams{1e-12, 1000, 1});
    ASSERT_TRUE(r.converged);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (t.missing(i, 1)) continue;
        const double x = t.at(i, 0), y = t.at(i, 1);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        cnt += 1;
    }
    const double slope = (sxy - sx * sy / cnt) / (sxx - sx * sx / cnt);
    const double icpt = sy / cnt - slope * sx / cnt;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (!t.missing(i, 1)) {
            EXPECT_EQ(r.table.at(i, 1), t.at(i, 1));
            continue;
        }
        EXPECT_NEAR(r.table.at(i, 1), icpt + slope * t.at(i, 0), 1e-6);
    }
}

TEST(Em, LogLikelihoodIsNonDecreasing) {
    Rng rng(3);
    Eigen::MatrixXd v(400, 3);
    MissingMask m(400, 3);
    for (int i = 0; i < 400; ++i) {
        const double z = rng.normal();
        v(i, 0) = z + 0.3 * rng.normal();
        v(i, 1) = -z + 0.5 * rng.normal();
        v(i, 2) = 2 * z + rng.normal();
        for (int j = 0; j < 3; ++j) m(i, j) = rng.bernoulli(0.15);
    }
    FeatureSchema s({{"a", Role::Predictor, {}}, {"b", Role::Predictor, {}}, {"c", Role::Predictor, {}}});
    const std::vector<std::string> cols{"a", "b", "c"};
    const auto r = impute_em(UserFeatureTable(s, v, m), cols);
    ASSERT_GE(r.log_likelihood.size(), 2u);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i)
        EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-9);
    EXPECT_EQ(r.table.missing_count(), 0u);
}

TEST(Em, RejectsBadColumns) {
    const auto t = random_table(20, 2, 1.0, 5);
    const std::vector<std::string> all_missing{"c0", "c1"};
    EXPECT_THROW(impute_em(t, all_missing), ImputationError);
    const std::vector<std::string> twice{"c1", "c1"};
    EXPECT_THROW(impute_em(t, twice), ImputationError);
    EXPECT_THROW(impute_em(t, std::vector<std::string>{}), ImputationError);
}

TEST(StrategyMap, JsonParsingAndPrefixes) {
    const auto schema = catalog::full_schema();
    const auto j = nlohmann::json::parse(R"({"zero": ["Python*"], "knn": ["Views"], "knn_k": 3})");
    const auto map = strategy_map_from_json(j, schema);
    const auto zero = map.columns_with(ImputationKind::Zero);
    EXPECT_EQ(zero.size(), 4u);
    EXPECT_EQ(map.columns_with(ImputationKind::Knn), std::vector<std::string>{"Views"});
    EXPECT_EQ(map.assignments().back().second.knn.k, 3u);
    EXPECT_THROW(strategy_map_from_json(nlohmann::json::parse(R"({"bogus": 1})"), schema), ConfigError);
    EXPECT_THROW(strategy_map_from_json(nlohmann::json::parse(R"({"zero": ["Views"], "knn": ["Views"]})"), schema),
                 ConfigError);
}

TEST(StrategyMap, DefaultMapCompletesTheSyntheticTable) {
    const auto raw = generate_synthetic_users(400, 9);
    ASSERT_GT(raw.missing_count(), 0u);
    const auto r = apply_strategy_map(raw, default_strategy_map(raw.schema()));
    for (const auto& name : catalog::predictors_for(ResearchQuestion::RQ3))
        EXPECT_TRUE(r.table.column_complete(r.table.schema().require(name))) << name;
    // Observed cells are never changed.
    for (std::size_t c = 0; c < raw.cols(); ++c)
        for (std::size_t i = 0; i < raw.rows(); ++i)
            if (!raw.missing(i, c)) {
                EXPECT_EQ(r.table.at(i, c), raw.at(i, c));
            }
}
