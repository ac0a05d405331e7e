#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args) {
    const auto log = fs::temp_directory_path() / "cqabench_cli_output.txt";
    const std::string cmd = std::string(CQABENCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("cqabench_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& body) {
        std::ofstream(dir / name) << body;
        return dir / name;
    }

    fs::path dir;
};

const char* kBench = R"({
  "rq": "RQ1",
  "data": {"synthetic": {"rows": 250, "seed": 3}},
  "fe": ["none"],
  "models": ["ols", "knn"],
  "runs": 2,
  "hpo": {"tpe_trials": 3, "tpe_startup": 2, "ga_population": 3, "ga_generations": 2, "top_k": 1},
  "out": "results"
})";

}  // namespace

TEST_F(CliTest, BenchWritesOutputsAndSkipsWhenUpToDate) {
    const auto cfg = write("bench.json", kBench);
    auto r = cli("bench --config " + cfg.string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"report.json", "grid.tsv", "table.txt", "run_meta.json"})
        EXPECT_TRUE(fs::exists(dir / "results" / f)) << f;
    std::ifstream meta_in(dir / "results" / "run_meta.json");
    const auto meta = nlohmann::json::parse(meta_in);
    EXPECT_TRUE(meta["commands"].contains("bench"));
    r = cli("bench --config " + cfg.string());
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("up to date"), std::string::npos) << r.out;
    r = cli("bench --force --config " + cfg.string());
    EXPECT_EQ(r.out.find("up to date"), std::string::npos) << r.out;
    EXPECT_EQ(cli("report --config " + cfg.string()).code, 0);
}

TEST_F(CliTest, ImputeAndFeatures) {
    const auto cfg = write("bench.json", kBench);
    auto r = cli("impute --config " + cfg.string() + " --out " + (dir / "imp").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "imp" / "imputed.csv"));
    r = cli("features --config " + cfg.string() + " --out " + (dir / "feat").string());
    ASSERT_EQ(r.code, 0) << r.out;
    std::ifstream in(dir / "feat" / "features.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(j.contains("vif"));
    EXPECT_TRUE(j.contains("retained"));
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
    const auto cfg = write("bad.json", R"({"rq": "RQ1", "models": ["logreg"]})");
    const auto r = cli("bench --config " + cfg.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("[config]"), std::string::npos) << r.out;
    EXPECT_NE(cli("bench --config " + (dir / "missing.json").string()).code, 0);
    EXPECT_NE(cli("").code, 0);
}

TEST_F(CliTest, HybridEval) {
    write("num.csv", "a,0.9\nb,0.2\n");
    write("txt.csv", "a,0.3\nb,0.1\n");
    write("truth.csv", "a,0\nb,1\n");
    const auto cfg = write("hybrid.json", R"({"rq": "hybrid", "hybrid": {"numeric_scores": "num.csv",
        "textual_scores": "txt.csv", "ground_truth": "truth.csv"}, "out": "h"})");
    const auto r = cli("hybrid-eval --config " + cfg.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "h" / "hybrid.json"));
    EXPECT_TRUE(fs::exists(dir / "h" / "hybrid.txt"));
}

TEST_F(CliTest, TextprepFromDirectory) {
    fs::create_directories(dir / "posts");
    write("posts/11.html", "<p>Query question</p><pre><code>SELECT a FROM b -- c</code></pre>");
    const auto cfg = write("text.json", R"({"rq": "hybrid", "textprep": {"input": "posts"}, "out": "tp"})");
    const auto r = cli("textprep --config " + cfg.string());
    ASSERT_EQ(r.code, 0) << r.out;
    std::ifstream in(dir / "tp" / "records.jsonl");
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    const auto rec = nlohmann::json::parse(line);
    EXPECT_EQ(rec.dump().find("-- c"), std::string::npos);
}
