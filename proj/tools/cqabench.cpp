#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/features.hpp"
#include "cqabench/imputation.hpp"
#include "cqabench/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cqabench;

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::size_t workers = 0;
    std::int64_t seed = -1;
    bool force = false;
};

std::size_t default_workers() {
    if (const char* env = std::getenv("CQABENCH_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "cqabench: ignoring invalid CQABENCH_WORKERS='" << env << "'\n";
    }
    return 1;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) return json::object();
    try {
        return json::parse(in);
    } catch (const json::exception&) {
        return json::object();
    }
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + p.string() + "'");
    out << s;
}

// Runs `body` unless run_meta.json records the same command and config hash
// and `marker` exists.
int guarded(const std::string& command, const CommonArgs& args, const RunConfig& config, const fs::path& out,
            const fs::path& marker, const std::function<void()>& body) {
    const fs::path meta_path = out / "run_meta.json";
    json meta = read_json(meta_path);
    const std::string hash = config.hash_hex();
    if (!args.force && meta.contains("commands") && meta["commands"].contains(command) &&
        meta["commands"][command].value("config_hash", "") == hash && fs::exists(out / marker)) {
        std::cout << command << ": " << out.string() << " is up to date (config " << hash << "); use --force to rerun\n";
        return 0;
    }
    fs::create_directories(out);
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    meta = read_json(meta_path);
    meta["commands"][command] = {{"config_hash", hash},
                                 {"seed", config.seed},
                                 {"workers", args.workers},
                                 {"started", started},
                                 {"finished", utc_now()},
                                 {"duration_seconds", seconds}};
    write_text(meta_path, meta.dump(2) + "\n");
    return 0;
}

RunConfig load(CommonArgs& args, fs::path& out) {
    RunConfig config = load_run_config(args.config);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (args.workers == 0) args.workers = default_workers();
    out = args.out.empty() ? config.resolve(config.out) : fs::path(args.out);
    return config;
}

int cmd_impute(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    return guarded("impute", args, config, out, "imputed.csv", [&] {
        const UserFeatureTable raw = load_data(config);
        const StrategyMap map = config.imputation.is_null() ? default_strategy_map(raw.schema())
                                                            : strategy_map_from_json(config.imputation, raw.schema());
        const ImputationReport r = apply_strategy_map(raw, map);
        save_table(out / "imputed.csv", r.table);
        json missing = json::object();
        for (std::size_t c = 0; c < raw.cols(); ++c)
            missing[raw.schema().column(c).name] = raw.missing_count(c);
        write_text(out / "imputation.json",
                   json{{"rows", raw.rows()}, {"missing_before", missing}, {"warnings", r.warnings},
                        {"em_converged", r.em_converged}}
                           .dump(2) +
                       "\n");
        std::cout << "impute: " << raw.missing_count() << " missing cells filled, " << r.warnings.size()
                  << " warnings\n";
    });
}

int cmd_features(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    return guarded("features", args, config, out, "features.json", [&] {
        const PreparedData d = prepare_data(config);
        save_table(out / "features.csv", d.table);
        json screening = json::object();
        for (const auto& target : config.targets) {
            const Eigen::VectorXd y = d.table.column(target);
            json per = json::object();
            for (const auto& p : d.predictors) {
                try {
                    per[p] = pearson_r(d.table.column(p), y);
                } catch (const FeatureError&) {
                    per[p] = nullptr;
                }
            }
            screening[target] = per;
        }
        json skew = json::object();
        for (const auto& p : d.predictors) skew[p] = skewness(d.table.column(p));
        write_text(out / "features.json", json{{"vif", d.vif.to_json()},
                                               {"removed", d.vif_removed},
                                               {"retained", d.predictors},
                                               {"pearson", screening},
                                               {"skewness", skew}}
                                                  .dump(2) +
                                              "\n");
        std::cout << "features: " << d.vif_removed.size() << " columns removed by VIF, " << d.predictors.size()
                  << " predictors retained\n";
    });
}

int cmd_bench(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    plan_for(config);
    return guarded("bench", args, config, out, "report.json", [&] {
        const BenchmarkReport r = run_benchmark(config, {args.workers, true});
        write_benchmark_outputs(r, out);
        std::size_t na = 0;
        for (const auto& c : r.cells) na += c.result.na ? 1 : 0;
        std::cout << "bench: " << r.cells.size() << " cells (" << na << " N/A) written to " << out.string() << "\n";
    });
}

int cmd_hpo_validate(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    plan_for(config);
    if (!config.hpo.enabled) throw ConfigError("hpo-validate needs hpo.enabled");
    return guarded("hpo-validate", args, config, out, "agreement.tsv", [&] {
        const BenchmarkReport r = run_benchmark(config, {args.workers, false});
        write_text(out / "hpo.json", r.to_json().dump(2) + "\n");
        write_text(out / "hyperparameters.tsv", r.hyperparameters_tsv());
        write_text(out / "agreement.tsv", r.agreement_tsv());
        std::size_t checked = 0, passed = 0;
        for (const auto& t : r.targets)
            for (const auto& o : t.agreement) {
                ++checked;
                passed += o.report.pass ? 1 : 0;
            }
        std::cout << "hpo-validate: " << passed << "/" << checked << " refined cells agree within "
                  << config.hpo.tolerance_percent << "%\n";
    });
}

int cmd_textprep(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    if (!config.textprep) throw ConfigError("config has no textprep section");
    TextprepSettings s = *config.textprep;
    s.input = config.resolve(s.input);
    if (s.rules) s.rules = config.resolve(*s.rules);
    if (s.stopwords) s.stopwords = config.resolve(*s.stopwords);
    return guarded("textprep", args, config, out, "summary.json", [&] {
        const TextprepSummary sum = run_textprep(s, out);
        std::cout << "textprep: " << sum.posts << " posts, " << sum.failed << " failed\n";
        for (const auto& [lang, n] : sum.snippets_per_language) std::cout << "  " << lang << '\t' << n << '\n';
    });
}

int cmd_hybrid(CommonArgs& args) {
    fs::path out;
    const RunConfig config = load(args, out);
    if (!config.hybrid) throw ConfigError("config has no hybrid section");
    HybridSettings s = *config.hybrid;
    s.numeric_scores = config.resolve(s.numeric_scores);
    s.textual_scores = config.resolve(s.textual_scores);
    s.ground_truth = config.resolve(s.ground_truth);
    return guarded("hybrid-eval", args, config, out, "hybrid.json", [&] {
        const HybridReport r = run_hybrid_eval(s, config.positive_label);
        write_text(out / "hybrid.json", r.to_json().dump(2) + "\n");
        write_text(out / "hybrid.txt", r.table());
        std::cout << r.table();
    });
}

int cmd_report(CommonArgs& args) {
    fs::path out;
    load(args, out);
    render_report(out);
    std::cout << "report: re-rendered grid.tsv and table.txt in " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness for community Q&A user models"};
    app.require_subcommand(1);
    std::map<std::string, CommonArgs> args;
    std::map<std::string, std::function<int(CommonArgs&)>> handlers{
        {"impute", cmd_impute},     {"features", cmd_features},   {"bench", cmd_bench},
        {"hpo-validate", cmd_hpo_validate}, {"textprep", cmd_textprep}, {"hybrid-eval", cmd_hybrid},
        {"report", cmd_report},
    };
    const std::map<std::string, std::string> help{
        {"impute", "Fill missing cells with the configured strategy map"},
        {"features", "Impute, drop composites and prune by VIF"},
        {"bench", "Run the full FE x model grid with tuning and repeated evaluation"},
        {"hpo-validate", "Tune each cell, then check the GA against the TPE optimum"},
        {"textprep", "Clean posts, strip comments and pack token sequences"},
        {"hybrid-eval", "Compare numeric and textual dropout predictions"},
        {"report", "Re-render grid.tsv and table.txt from report.json"},
    };
    for (const auto& [name, fn] : handlers) {
        CommonArgs& a = args[name];
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", a.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", a.out, "Output directory");
        sub->add_option("--workers", a.workers, "Concurrent workers (default $CQABENCH_WORKERS or 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", a.seed, "Override the master seed")->check(CLI::NonNegativeNumber);
        sub->add_flag("--force", a.force, "Rerun even if the output directory is up to date");
    }
    CLI11_PARSE(app, argc, argv);

    for (const auto& [name, fn] : handlers) {
        if (!app.got_subcommand(name)) continue;
        try {
            return fn(args[name]);
        } catch (const ConfigError& e) {
            std::cerr << "cqabench: [" << e.stage() << "] " << e.what() << "\n";
            return 2;
        } catch (const Error& e) {
            std::cerr << "cqabench: [" << e.stage() << "] " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "cqabench: [internal] " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
