#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cqabench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_rq3() {
    return json::parse(R"({
        "rq": "RQ3",
        "data": {"synthetic": {"rows": 300, "seed": 5}},
        "fe": ["standardise", "none"],
        "models": ["logreg", "Decision Tree"],
        "runs": 3,
        "hpo": {"tpe_trials": 4, "tpe_startup": 2, "ga_population": 3, "ga_generations": 2, "top_k": 1}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, ParsesAndNormalizesModelNames) {
    const auto c = parse_run_config(small_rq3());
    EXPECT_EQ(c.models, (std::vector<std::string>{"Logistic Regression", "Decision Tree"}));
    EXPECT_EQ(c.targets, std::vector<std::string>{catalog::kDropout});
    EXPECT_EQ(plan_for(c).size(), 4u);
    const auto all = parse_run_config(json{{"rq", "RQ1"}});
    EXPECT_EQ(plan_for(all).size(), 90u);
}

TEST(Config, RejectsInvalidInput) {
    auto bad = [](const char* text) { return parse_run_config(json::parse(text)); };
    EXPECT_THROW(bad(R"({"rq": "RQ1", "models": ["logreg"]})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "models": ["unknown"]})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "typo": 1})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ4"})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "runs": 0})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "fe": ["zscore"]})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "targets": ["Dropout"]})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "train_ratio": 1.0})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "hpo": {"trials": 5}})"), ConfigError);
    EXPECT_THROW(bad(R"({"rq": "RQ1", "data": {"path": "x.csv", "synthetic": {}}})"), ConfigError);
    EXPECT_THROW(bad(R"({"models": ["ols"]})"), ConfigError);
    EXPECT_THROW(plan_for(bad(R"({"rq": "hybrid"})")), ConfigError);
}

TEST(Config, HashIgnoresOutputLocationOnly) {
    const auto a = parse_run_config(small_rq3(), "/tmp/a");
    auto j = small_rq3();
    j["out"] = "elsewhere";
    const auto b = parse_run_config(j, "/tmp/b");
    EXPECT_EQ(a.hash_hex(), b.hash_hex());
    EXPECT_EQ(a.hash_hex().size(), 16u);
    j["seed"] = 7;
    EXPECT_NE(parse_run_config(j).hash_hex(), a.hash_hex());
    EXPECT_EQ(parse_run_config(a.to_json()).to_json(), a.to_json());
}

TEST(Config, Fnv1aReferenceValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Prepare, ImputesDropsCompositesAndPrunes) {
    const auto d = prepare_data(parse_run_config(small_rq3()));
    EXPECT_EQ(d.table.missing_count(), 0u);
    EXPECT_FALSE(d.table.schema().contains(catalog::kUserDevelopmentIndex));
    EXPECT_EQ(d.predictors.size() + d.vif_removed.size(), catalog::predictors_for(ResearchQuestion::RQ3).size());
    for (const auto& p : d.predictors) EXPECT_LE(d.vif.at(p), 5.0);
    for (const auto& p : d.vif_removed) EXPECT_GT(d.vif.at(p), 5.0);
}

TEST(Benchmark, DeterministicAcrossWorkerCounts) {
    const auto c = parse_run_config(small_rq3());
    const auto one = run_benchmark(c, {1, true});
    const auto two = run_benchmark(c, {3, true});
    EXPECT_EQ(one.to_json().dump(), two.to_json().dump());
    ASSERT_EQ(one.cells.size(), 4u);
    ASSERT_EQ(one.targets.size(), 1u);
    EXPECT_TRUE(one.targets[0].best.has_value());
    EXPECT_TRUE(one.targets[0].significance.has_value());
    EXPECT_EQ(one.targets[0].agreement.size(), 1u);
    for (const auto& cell : one.cells) {
        EXPECT_FALSE(cell.result.na) << cell.result.error;
        EXPECT_EQ(cell.result.metrics.at("f1").values.size(), 3u);
    }
}

TEST(Benchmark, OutputsRenderFromSavedReport) {
    const auto dir = fs::temp_directory_path() / "cqabench_pipeline_outputs";
    fs::remove_all(dir);
    const auto r = run_benchmark(parse_run_config(small_rq3()));
    write_benchmark_outputs(r, dir);
    for (const char* f : {"report.json", "grid.tsv", "table.txt", "hyperparameters.tsv", "agreement.tsv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto grid = slurp(dir / "grid.tsv");
    const auto table = slurp(dir / "table.txt");
    fs::remove(dir / "grid.tsv");
    fs::remove(dir / "table.txt");
    render_report(dir);
    EXPECT_EQ(slurp(dir / "grid.tsv"), grid);
    EXPECT_EQ(slurp(dir / "table.txt"), table);
    EXPECT_NE(table.find("±"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Textprep, RunsOverATabSeparatedDump) {
    const auto dir = fs::temp_directory_path() / "cqabench_textprep_run";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "posts.tsv") << "1\t<p>Why does this fail?</p><pre><code>SELECT * FROM t -- x</code></pre>\n"
                                        "2\t<p>   </p>\n"
                                        "3\t<p>Loop help</p><pre><code>for i in range(3):\\n    print(i)  # show</code></pre>\n";
    TextprepSettings s;
    s.input = dir / "posts.tsv";
    const auto sum = run_textprep(s, dir / "out");
    EXPECT_EQ(sum.posts, 3u);
    EXPECT_EQ(sum.failed, 1u);
    EXPECT_EQ(sum.snippets_per_language.at("SQL"), 1u);
    EXPECT_EQ(sum.snippets_per_language.at("Python"), 1u);
    for (const char* f : {"records.jsonl", "vocab.txt", "summary.json"}) EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    fs::remove_all(dir);
}
