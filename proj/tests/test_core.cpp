#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/plan.hpp"
#include "cqabench/random.hpp"
#include "cqabench/search_space.hpp"
#include "cqabench/synthetic.hpp"
#include "cqabench/table.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace cqabench;

namespace {

FeatureSchema small_schema() {
    return FeatureSchema({{"a", Role::Predictor, {}}, {"b", Role::Predictor, {}}, {"y", Role::Target, {}}});
}

}  // namespace

TEST(Schema, RejectsDuplicateAndEmptyNames) {
    EXPECT_THROW(FeatureSchema({{"a", Role::Predictor, {}}, {"a", Role::Target, {}}}), SchemaError);
    EXPECT_THROW(FeatureSchema({{"", Role::Predictor, {}}}), SchemaError);
    const auto s = small_schema();
    EXPECT_EQ(s.require("b"), 1u);
    EXPECT_THROW(s.require("c"), SchemaError);
    EXPECT_EQ(s.names_with_role(Role::Target), std::vector<std::string>{"y"});
}

TEST(Table, MaskIsAuthoritative) {
    Eigen::MatrixXd v(2, 3);
    v << 1, 2, 3, 4, 5, 6;
    MissingMask m = MissingMask::Constant(2, 3, false);
    m(1, 0) = true;
    const UserFeatureTable t(small_schema(), v, m);
    EXPECT_EQ(t.missing_count(), 1u);
    EXPECT_TRUE(std::isnan(t.values()(1, 0)));
    EXPECT_THROW(t.at(1, 0), Error);
    EXPECT_THROW(t.column("a"), Error);
    EXPECT_EQ(t.column("b"), Eigen::Vector2d(2, 5));
}

TEST(Table, CsvRoundTripIsBitExact) {
    Rng rng(2);
    Eigen::MatrixXd v(20, 3);
    MissingMask m(20, 3);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) {
            v(i, j) = rng.normal() * 1e3;
            m(i, j) = rng.bernoulli(0.2);
        }
    const UserFeatureTable t(small_schema(), v, m);
    std::stringstream ss;
    write_table(ss, t);
    const auto back = read_table(ss, small_schema());
    EXPECT_TRUE(back.identical(t));
}

TEST(Table, LoaderIgnoresExtraColumnsAndMasksBlanks) {
    std::istringstream in("y,extra,b,a\n1,9,2,3\n4,9,,x\n");
    const auto t = read_table(in, small_schema());
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.at(0, 0), 3.0);
    EXPECT_TRUE(t.missing(1, 0));
    EXPECT_TRUE(t.missing(1, 1));
    EXPECT_EQ(t.at(1, 2), 4.0);
}

TEST(Table, LoaderRejectsMissingColumnsAndRaggedRows) {
    std::istringstream no_col("a,y\n1,2\n");
    EXPECT_THROW(read_table(no_col, small_schema()), Error);
    std::istringstream ragged("a,b,y\n1,2\n");
    EXPECT_THROW(read_table(ragged, small_schema()), ParseError);
}

TEST(Table, SplitRecordHonoursQuotes) {
    EXPECT_EQ(split_record("a,\"b,c\",d", ','), (std::vector<std::string>{"a", "b,c", "d"}));
    EXPECT_EQ(split_record("x\t\ty", '\t'), (std::vector<std::string>{"x", "", "y"}));
}

TEST(Catalog, ShapesPerQuestion) {
    EXPECT_EQ(catalog::base_predictors().size(), 20u);
    EXPECT_EQ(catalog::violation_density_columns().size(), 20u);
    EXPECT_EQ(catalog::targets_for(ResearchQuestion::RQ1).size(), 1u);
    EXPECT_EQ(catalog::targets_for(ResearchQuestion::RQ2).size(), 20u);
    EXPECT_EQ(catalog::targets_for(ResearchQuestion::RQ3).size(), 1u);
    EXPECT_EQ(catalog::targets_for(ResearchQuestion::RQ3)[0].task, Task::Classification);
    EXPECT_EQ(catalog::predictors_for(ResearchQuestion::RQ1).size(), 20u);
    EXPECT_EQ(catalog::predictors_for(ResearchQuestion::RQ2).size(), 21u);
    EXPECT_EQ(catalog::predictors_for(ResearchQuestion::RQ3).size(), 41u);
    for (auto rq : {ResearchQuestion::RQ1, ResearchQuestion::RQ2, ResearchQuestion::RQ3})
        EXPECT_NO_THROW(validate_target_set(rq, catalog::targets_for(rq)));
    EXPECT_THROW(validate_target_set(ResearchQuestion::RQ1, catalog::targets_for(ResearchQuestion::RQ2)), Error);
}

TEST(Plan, OrderedProductAndValidation) {
    const auto models = models_for(Task::Regression);
    const auto targets = catalog::targets_for(ResearchQuestion::RQ1);
    const auto plan = build_plan(models, all_fe_techniques(), targets, 1);
    EXPECT_EQ(plan.size(), 90u);
    for (std::size_t i = 1; i < plan.cells.size(); ++i) {
        const auto& a = plan.cells[i - 1];
        const auto& b = plan.cells[i];
        EXPECT_LE(std::make_tuple(std::string(to_string(a.fe)), a.model, a.target),
                  std::make_tuple(std::string(to_string(b.fe)), b.model, b.target));
    }
    const std::vector<ModelSpec> cls{find_model("logreg")};
    EXPECT_THROW(build_plan(cls, all_fe_techniques(), targets, 1), ConfigError);
    const std::vector<FeTechnique> dup{FeTechnique::Log, FeTechnique::Log};
    EXPECT_THROW(build_plan(models, dup, targets, 1), ConfigError);
}

TEST(SearchSpace, ValidatesDomains) {
    SearchSpace s;
    EXPECT_THROW(s.add("x", Continuous{1, 1}), ConfigError);
    EXPECT_THROW(s.add("x", LogContinuous{0, 1}), ConfigError);
    EXPECT_THROW(s.add("x", Categorical{{}}), ConfigError);
    s.add("x", Continuous{0, 1}).add("n", Integer{1, 10, true}).add("c", Categorical{{"p", "q"}}).add("b", Boolean{});
    EXPECT_THROW(s.add("x", Continuous{0, 2}), ConfigError);
    Rng rng(1);
    for (int i = 0; i < 500; ++i) EXPECT_TRUE(s.contains(s.sample(rng)));
    EXPECT_TRUE(s.contains(s.midpoint()));
    EXPECT_FALSE(s.contains({{"x", 2.0}, {"n", std::int64_t{1}}, {"c", std::string("p")}, {"b", true}}));
    EXPECT_EQ(assignment_from_json(to_json(s.midpoint())), s.midpoint());
}

TEST(Random, DeriveSeedSeparatesStreams) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 10; ++m)
        for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(m, s));
    EXPECT_EQ(seen.size(), 1000u);
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Random, IntegerIsInRangeAndShuffleIsAPermutation) {
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.integer(-3, 3);
        EXPECT_GE(v, -3);
        EXPECT_LE(v, 3);
    }
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    rng.shuffle(v);
    std::set<int> s(v.begin(), v.end());
    EXPECT_EQ(s.size(), 50u);
}

TEST(Synthetic, DeterministicWithIntactTargets) {
    const auto a = generate_synthetic_users(300, 3);
    const auto b = generate_synthetic_users(300, 3);
    EXPECT_TRUE(a.identical(b));
    EXPECT_EQ(a.schema(), catalog::full_schema());
    EXPECT_TRUE(a.column_complete(a.schema().require(catalog::kAnswers)));
    const auto d = a.column(catalog::kDropout);
    for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_TRUE(d(i) == 0.0 || d(i) == 1.0);
    EXPECT_GT(a.missing_count(), 0u);
    SyntheticProfile bad;
    bad.signal_r2 = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
}
