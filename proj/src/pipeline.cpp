#include "cqabench/pipeline.hpp"

#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace cqabench {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) return {};
    const json& v = j.at(key);
    if (!v.is_array()) throw ConfigError(where + "." + key + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
        if (!s.is_string()) throw ConfigError(where + "." + key + " must be an array of strings");
        out.push_back(s.get<std::string>());
    }
    return out;
}

Task task_of(ResearchQuestion rq) { return rq == ResearchQuestion::RQ3 ? Task::Classification : Task::Regression; }

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base) {
    check_keys(j, {"rq", "data", "imputation", "vif_threshold", "fe", "models", "targets", "runs", "train_ratio", "seed",
                   "alpha", "positive_label", "hpo", "textprep", "hybrid", "out"},
               "config");
    RunConfig c;
    c.base = base;
    const std::string rq = get<std::string>(j, "rq", "", "config");
    if (!rq.empty() && rq != "hybrid") {
        try {
            c.rq = parse_research_question(rq);
        } catch (const Error& e) {
            throw ConfigError(std::string("config.rq: ") + e.what());
        }
    }

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"path", "delimiter", "synthetic"}, "data");
        if (d.contains("path") && d.contains("synthetic")) throw ConfigError("data takes either path or synthetic");
        if (d.contains("path")) c.data.path = get<std::string>(d, "path", "", "data");
        const std::string delim = get<std::string>(d, "delimiter", ",", "data");
        if (delim.size() != 1) throw ConfigError("data.delimiter must be a single character");
        c.data.delimiter = delim[0];
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            check_keys(s, {"rows", "seed", "profile"}, "data.synthetic");
            c.data.synthetic_rows = get_count(s, "rows", c.data.synthetic_rows, "data.synthetic");
            c.data.synthetic_seed = get<std::uint64_t>(s, "seed", c.data.synthetic_seed, "data.synthetic");
            if (s.contains("profile")) c.data.profile = synthetic_profile_from_json(s.at("profile"));
            if (c.data.synthetic_rows < 10) throw ConfigError("data.synthetic.rows must be at least 10");
        }
    }
    c.out = get<std::string>(j, "out", c.out.string(), "config");
    if (j.contains("imputation")) c.imputation = j.at("imputation");
    c.vif_threshold = get<double>(j, "vif_threshold", c.vif_threshold, "config");
    if (!(c.vif_threshold > 1.0)) throw ConfigError("vif_threshold must exceed 1");

    for (const auto& name : string_list(j, "fe", "config")) {
        try {
            c.fe.push_back(parse_fe_technique(name));
        } catch (const Error& e) {
            throw ConfigError(std::string("config.fe: ") + e.what());
        }
    }
    if (c.fe.empty()) c.fe = all_fe_techniques();
    c.models = string_list(j, "models", "config");
    c.targets = string_list(j, "targets", "config");
    c.runs = get_count(j, "runs", c.runs, "config");
    if (c.runs < 1) throw ConfigError("runs must be at least 1");
    c.train_ratio = get<double>(j, "train_ratio", c.train_ratio, "config");
    if (!(c.train_ratio > 0.0 && c.train_ratio < 1.0)) throw ConfigError("train_ratio must lie in (0, 1)");
    c.seed = get<std::uint64_t>(j, "seed", c.seed, "config");
    c.alpha = get<double>(j, "alpha", c.alpha, "config");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    c.positive_label = get<double>(j, "positive_label", c.positive_label, "config");
    if (c.positive_label != 0.0 && c.positive_label != 1.0) throw ConfigError("positive_label must be 0 or 1");

    if (j.contains("hpo")) {
        const json& h = j.at("hpo");
        check_keys(h, {"enabled", "tpe_trials", "tpe_startup", "ga_population", "ga_generations", "top_k",
                       "tolerance_percent"},
                   "hpo");
        c.hpo.enabled = get<bool>(h, "enabled", c.hpo.enabled, "hpo");
        c.hpo.tpe_trials = get_count(h, "tpe_trials", c.hpo.tpe_trials, "hpo");
        c.hpo.tpe_startup = get_count(h, "tpe_startup", c.hpo.tpe_startup, "hpo");
        c.hpo.ga_population = get_count(h, "ga_population", c.hpo.ga_population, "hpo");
        c.hpo.ga_generations = get_count(h, "ga_generations", c.hpo.ga_generations, "hpo");
        c.hpo.top_k = get_count(h, "top_k", c.hpo.top_k, "hpo");
        c.hpo.tolerance_percent = get<double>(h, "tolerance_percent", c.hpo.tolerance_percent, "hpo");
        if (c.hpo.enabled && (c.hpo.tpe_trials < 1 || c.hpo.ga_population < 2 || c.hpo.ga_generations < 1))
            throw ConfigError("hpo needs tpe_trials >= 1, ga_population >= 2, ga_generations >= 1");
        if (!(c.hpo.tolerance_percent >= 0.0)) throw ConfigError("hpo.tolerance_percent must be non-negative");
    }
    if (j.contains("textprep")) {
        const json& t = j.at("textprep");
        check_keys(t, {"input", "rules", "stopwords", "limit"}, "textprep");
        TextprepSettings s;
        s.input = get<std::string>(t, "input", "", "textprep");
        if (s.input.empty()) throw ConfigError("textprep.input is required");
        if (t.contains("rules")) s.rules = get<std::string>(t, "rules", "", "textprep");
        if (t.contains("stopwords")) s.stopwords = get<std::string>(t, "stopwords", "", "textprep");
        s.limit = get_count(t, "limit", s.limit, "textprep");
        if (s.limit < 4) throw ConfigError("textprep.limit must be at least 4");
        c.textprep = s;
    }
    if (j.contains("hybrid")) {
        const json& h = j.at("hybrid");
        check_keys(h, {"numeric_scores", "textual_scores", "ground_truth", "threshold"}, "hybrid");
        HybridSettings s;
        s.numeric_scores = get<std::string>(h, "numeric_scores", "", "hybrid");
        s.textual_scores = get<std::string>(h, "textual_scores", "", "hybrid");
        s.ground_truth = get<std::string>(h, "ground_truth", "", "hybrid");
        s.threshold = get<double>(h, "threshold", s.threshold, "hybrid");
        if (s.numeric_scores.empty() || s.textual_scores.empty() || s.ground_truth.empty())
            throw ConfigError("hybrid needs numeric_scores, textual_scores and ground_truth");
        if (!(s.threshold >= 0.0 && s.threshold <= 1.0)) throw ConfigError("hybrid.threshold must lie in [0, 1]");
        c.hybrid = s;
    }

    if (c.rq) {
        const Task task = task_of(*c.rq);
        if (c.models.empty())
            for (const auto& m : models_for(task)) c.models.push_back(m.name);
        for (auto& m : c.models) {
            const ModelSpec& spec = find_model(m);
            if (!spec.supports(task))
                throw ConfigError("model '" + m + "' does not support " + std::string(to_string(task)) + " (" +
                                  std::string(to_string(*c.rq)) + ")");
            m = spec.name;
        }
        const auto all_targets = catalog::targets_for(*c.rq);
        if (c.targets.empty())
            for (const auto& t : all_targets) c.targets.push_back(t.name);
        for (const auto& t : c.targets)
            if (std::none_of(all_targets.begin(), all_targets.end(), [&](const TargetSpec& s) { return s.name == t; }))
                throw ConfigError("'" + t + "' is not a target of " + std::string(to_string(*c.rq)));
        if (!c.imputation.is_null()) strategy_map_from_json(c.imputation, catalog::schema_for(*c.rq));
    } else if (!c.models.empty() || !c.targets.empty()) {
        throw ConfigError("models and targets need an rq");
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

json RunConfig::to_json() const {
    json j;
    j["rq"] = rq ? std::string(cqabench::to_string(*rq)) : "hybrid";
    json d;
    d["delimiter"] = std::string(1, data.delimiter);
    if (data.path)
        d["path"] = data.path->generic_string();
    else
        d["synthetic"] = {{"rows", data.synthetic_rows},
                          {"seed", data.synthetic_seed},
                          {"profile", cqabench::to_json(data.profile)}};
    j["data"] = d;
    j["imputation"] = imputation;
    j["vif_threshold"] = vif_threshold;
    std::vector<std::string> fe_names;
    for (auto f : fe) fe_names.emplace_back(cqabench::to_string(f));
    j["fe"] = fe_names;
    j["models"] = models;
    j["targets"] = targets;
    j["runs"] = runs;
    j["train_ratio"] = train_ratio;
    j["seed"] = seed;
    j["alpha"] = alpha;
    j["positive_label"] = positive_label;
    j["hpo"] = {{"enabled", hpo.enabled},
                {"tpe_trials", hpo.tpe_trials},
                {"tpe_startup", hpo.tpe_startup},
                {"ga_population", hpo.ga_population},
                {"ga_generations", hpo.ga_generations},
                {"top_k", hpo.top_k},
                {"tolerance_percent", hpo.tolerance_percent}};
    if (textprep) {
        json t = {{"input", textprep->input.generic_string()}, {"limit", textprep->limit}};
        if (textprep->rules) t["rules"] = textprep->rules->generic_string();
        if (textprep->stopwords) t["stopwords"] = textprep->stopwords->generic_string();
        j["textprep"] = t;
    }
    if (hybrid)
        j["hybrid"] = {{"numeric_scores", hybrid->numeric_scores.generic_string()},
                       {"textual_scores", hybrid->textual_scores.generic_string()},
                       {"ground_truth", hybrid->ground_truth.generic_string()},
                       {"threshold", hybrid->threshold}};
    return j;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_json().dump()); }

std::string RunConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

ExperimentPlan plan_for(const RunConfig& config) {
    if (!config.rq) throw ConfigError("this command needs rq set to RQ1, RQ2 or RQ3");
    std::vector<ModelSpec> models;
    for (const auto& m : config.models) models.push_back(find_model(m));
    std::vector<TargetSpec> targets;
    for (const auto& t : catalog::targets_for(*config.rq))
        if (std::find(config.targets.begin(), config.targets.end(), t.name) != config.targets.end())
            targets.push_back(t);
    return build_plan(models, config.fe, targets, config.seed);
}

UserFeatureTable load_data(const RunConfig& config) {
    if (!config.rq) throw ConfigError("loading data needs rq set to RQ1, RQ2 or RQ3");
    const FeatureSchema schema = catalog::schema_for(*config.rq);
    if (config.data.path) return load_table(config.resolve(*config.data.path), schema, {config.data.delimiter});
    const UserFeatureTable full =
        generate_synthetic_users(config.data.synthetic_rows, config.data.synthetic_seed, config.data.profile);
    const auto names = schema.names();
    return full.select_columns(names).with_schema(schema);
}

PreparedData prepare_data(const RunConfig& config) {
    const UserFeatureTable raw = load_data(config);
    const StrategyMap map = config.imputation.is_null() ? default_strategy_map(raw.schema())
                                                        : strategy_map_from_json(config.imputation, raw.schema());
    ImputationReport imputed = apply_strategy_map(raw, map);
    PreparedData out;
    out.imputation_warnings = std::move(imputed.warnings);
    out.em_converged = imputed.em_converged;
    const UserFeatureTable reduced = drop_composites(imputed.table);
    for (std::size_t c = 0; c < reduced.cols(); ++c)
        if (!reduced.column_complete(c))
            throw ImputationError("column '" + reduced.schema().column(c).name + "' still has missing cells");
    const auto predictors = reduced.schema().names_with_role(Role::Predictor);
    PruneResult pruned = prune_by_vif(reduced, predictors, config.vif_threshold);
    out.table = std::move(pruned.table);
    out.predictors = std::move(pruned.retained);
    out.vif = std::move(pruned.report);
    out.vif_removed = std::move(pruned.removed);
    return out;
}

namespace {

constexpr std::uint64_t kTuneStream = 0x7475'6e65;  // "tune"
constexpr std::uint64_t kTpeStream = 0x7470'65;
constexpr std::uint64_t kGaStream = 0x6761;

std::uint64_t cell_seed(std::uint64_t master, const PlanCell& c) {
    return derive_seed(master, fnv1a64(std::string(to_string(c.fe)) + "\x1f" + c.model + "\x1f" + c.target));
}

std::string cell_label(const PlanCell& c) { return std::string(to_string(c.fe)) + " / " + c.model; }

std::string primary_metric(Task task) { return task == Task::Regression ? "r2" : "f1"; }

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
    return out;
}

// Holdout objective shared by the TPE search and the GA refinement of a cell.
struct TuningSplit {
    Eigen::MatrixXd Xtr, Xte;
    Eigen::VectorXd ytr, yte;
};

Objective make_objective(const PreparedData& data, const PlanCell& cell, const RunConfig& config,
                         std::uint64_t seed) {
    const Eigen::MatrixXd X = data.table.matrix(data.predictors);
    const Eigen::VectorXd y = data.table.column(cell.target);
    const bool cls = cell.task == Task::Classification;
    const SplitIndices s =
        split_indices(data.table.rows(), config.train_ratio, derive_seed(seed, kTuneStream), cls ? &y : nullptr);
    TransformResult t = fit_apply_transform(cell.fe, gather_rows(X, s.train), gather_rows(X, s.test));
    auto split = std::make_shared<TuningSplit>(TuningSplit{std::move(t.train), std::move(t.eval), gather(y, s.train),
                                                           gather(y, s.test)});
    const ModelSpec& spec = find_model(cell.model);
    const Task task = cell.task;
    const double positive = config.positive_label;
    return [split, &spec, task, positive, seed](const Assignment& params) {
        const FittedModel m = fit(spec, params, split->Xtr, split->ytr, task, seed);
        const double v = score(split->yte, m.predict(split->Xte).values, task, positive).primary();
        if (!std::isfinite(v)) throw EvaluationError("objective is not finite");
        return v;
    };
}

void run_cell(const PreparedData& data, const RunConfig& config, const BenchOptions& options, CellOutcome& out) {
    const PlanCell& cell = out.cell;
    out.result.fe = std::string(to_string(cell.fe));
    out.result.model = cell.model;
    out.result.target = cell.target;
    try {
        const ModelSpec& spec = find_model(cell.model);
        const std::uint64_t seed = cell_seed(config.seed, cell);
        if (config.hpo.enabled && !spec.search_space.empty()) {
            TpeOptions tpe;
            tpe.n_trials = config.hpo.tpe_trials;
            tpe.startup_trials = std::min(config.hpo.tpe_startup, config.hpo.tpe_trials);
            tpe.seed = derive_seed(seed, kTpeStream);
            tpe.direction = Direction::Maximize;
            out.tpe = tpe_optimize(make_objective(data, cell, config, seed), spec.search_space, tpe);
            out.params = out.tpe->best_params;
        }
        if (!options.evaluate) return;
        EvalSetup setup;
        setup.predictors = data.predictors;
        setup.target = cell.target;
        setup.task = cell.task;
        setup.positive_label = config.positive_label;
        setup.train_ratio = config.train_ratio;
        setup.runs = config.runs;
        setup.master_seed = seed;
        const FeTechnique fe = cell.fe;
        const Assignment params = out.params;
        const Task task = cell.task;
        const RepeatedEvalResult r = repeated_eval(
            data.table, setup,
            [fe](const Eigen::MatrixXd& train, const Eigen::MatrixXd& test) {
                TransformResult t = fit_apply_transform(fe, train, test);
                return std::make_pair(std::move(t.train), std::move(t.eval));
            },
            [&spec, params, task](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t s) {
                return fit(spec, params, X, y, task, s);
            });
        if (r.all_failed()) {
            out.result.na = true;
            out.result.error = r.first_error;
            return;
        }
        out.result.metrics = r.metrics;
        if (r.failed_runs > 0)
            out.result.error = std::to_string(r.failed_runs) + " of " + std::to_string(config.runs) +
                               " runs failed: " + r.first_error;
    } catch (const std::exception& e) {
        out.result.na = true;
        out.result.error = e.what();
        out.result.metrics.clear();
    }
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

BenchmarkReport run_benchmark(const RunConfig& config, const BenchOptions& options) {
    const ExperimentPlan plan = plan_for(config);
    BenchmarkReport report;
    report.config_hash = config.hash_hex();
    report.seed = config.seed;
    report.rq = *config.rq;
    report.data = prepare_data(config);
    report.rows = report.data.table.rows();

    report.cells.resize(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) report.cells[i].cell = plan.cells[i];
    parallel_for(plan.size(), options.workers, [&](std::size_t i) { run_cell(report.data, config, options, report.cells[i]); });

    for (const auto& target : config.targets) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < report.cells.size(); ++i)
            if (report.cells[i].cell.target == target) idx.push_back(i);
        if (idx.empty()) continue;
        TargetSummary sum;
        sum.target = target;
        sum.task = report.cells[idx.front()].cell.task;
        const std::string metric = primary_metric(sum.task);

        if (options.evaluate) {
            std::vector<CellResult> results;
            for (std::size_t i : idx) results.push_back(report.cells[i].result);
            try {
                const CellResult& best = select_best(results, sum.task);
                sum.best = idx[static_cast<std::size_t>(&best - results.data())];
            } catch (const EvaluationError& e) {
                sum.notes.push_back(e.what());
            }
            std::vector<std::vector<double>> groups;
            for (std::size_t i : idx) {
                const auto& r = report.cells[i].result;
                const auto it = r.metrics.find(metric);
                if (r.na || it == r.metrics.end()) continue;
                groups.push_back(it->second.values);
                sum.significance_labels.push_back(cell_label(report.cells[i].cell));
            }
            if (groups.size() >= 2) {
                try {
                    sum.significance = conover_iman(groups, config.alpha);
                } catch (const EvaluationError& e) {
                    sum.notes.push_back(std::string("significance tests skipped: ") + e.what());
                }
            } else {
                sum.notes.push_back("significance tests need at least two evaluated cells");
            }
        }

        if (config.hpo.enabled && config.hpo.top_k > 0) {
            std::vector<RefineCell> candidates;
            std::map<std::string, std::size_t> by_label;
            for (std::size_t i : idx) {
                const CellOutcome& c = report.cells[i];
                if (!c.tpe || c.result.na) continue;
                RefineCell rc;
                rc.label = cell_label(c.cell);
                rc.metric = options.evaluate ? c.result.mean(metric) : c.tpe->best_objective;
                rc.bo_params = c.tpe->best_params;
                rc.space = find_model(c.cell.model).search_space;
                by_label[rc.label] = i;
                candidates.push_back(std::move(rc));
            }
            if (candidates.empty()) {
                sum.notes.push_back("no tuned cells available for GA validation");
            } else {
                GaOptions ga;
                ga.population = config.hpo.ga_population;
                ga.generations = config.hpo.ga_generations;
                ga.seed = derive_seed(config.seed, fnv1a64(target) ^ kGaStream);
                ga.direction = Direction::Maximize;
                ga.workers = options.workers;
                const PreparedData& data = report.data;
                try {
                    RefineResult rr = refine_top_k(
                        candidates, config.hpo.top_k,
                        [&](const RefineCell& rc) {
                            const CellOutcome& c = report.cells[by_label.at(rc.label)];
                            return make_objective(data, c.cell, config, cell_seed(config.seed, c.cell));
                        },
                        ga, Direction::Maximize, config.hpo.tolerance_percent);
                    sum.agreement = std::move(rr.outcomes);
                    for (auto& w : rr.warnings) sum.notes.push_back(std::move(w));
                } catch (const Error& e) {
                    sum.notes.push_back(std::string("GA validation failed: ") + e.what());
                }
            }
        }
        report.targets.push_back(std::move(sum));
    }
    return report;
}

namespace {

json distribution_json(const RunDistribution& d) {
    return {{"mean", d.mean}, {"std", d.std}, {"median", d.median}, {"summary", d.summary()}, {"values", d.values}};
}

const std::vector<std::string>& metric_order() {
    static const std::vector<std::string> order{"r2", "rmse", "accuracy", "precision", "recall", "f1"};
    return order;
}

std::string fixed(double v, int digits = 6) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double number_or_nan(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

std::string grid_from_json(const json& report) {
    std::vector<std::string> metrics;
    for (const auto& m : metric_order())
        for (const auto& c : report.at("cells"))
            if (c.at("metrics").contains(m)) {
                metrics.push_back(m);
                break;
            }
    std::ostringstream os;
    os << "target\tfe\tmodel\tstatus";
    for (const auto& m : metrics) os << '\t' << m << "_mean\t" << m << "_std\t" << m << "_median";
    os << "\terror\n";
    for (const auto& c : report.at("cells")) {
        os << c.at("target").get<std::string>() << '\t' << c.at("fe").get<std::string>() << '\t'
           << c.at("model").get<std::string>() << '\t' << c.at("status").get<std::string>();
        for (const auto& m : metrics) {
            if (!c.at("metrics").contains(m)) {
                os << "\tNA\tNA\tNA";
                continue;
            }
            const json& d = c.at("metrics").at(m);
            os << '\t' << fixed(number_or_nan(d.at("mean"))) << '\t' << fixed(number_or_nan(d.at("std"))) << '\t'
               << fixed(number_or_nan(d.at("median")));
        }
        std::string err = c.value("error", "");
        std::replace(err.begin(), err.end(), '\t', ' ');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << '\t' << err << '\n';
    }
    return os.str();
}

std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++w;
    return w;
}

std::string pad(const std::string& s, std::size_t width) {
    const std::size_t w = display_width(s);
    return s + std::string(width > w ? width - w : 0, ' ');
}

std::string table_from_json(const json& report) {
    std::ostringstream os;
    for (const auto& t : report.at("targets")) {
        const std::string target = t.at("target").get<std::string>();
        const std::string metric = t.at("task").get<std::string>() == "regression" ? "r2" : "f1";
        std::vector<std::string> fes, models;
        std::map<std::pair<std::string, std::string>, std::string> cells;
        for (const auto& c : report.at("cells")) {
            if (c.at("target") != target) continue;
            const std::string fe = c.at("fe").get<std::string>(), model = c.at("model").get<std::string>();
            if (std::find(fes.begin(), fes.end(), fe) == fes.end()) fes.push_back(fe);
            if (std::find(models.begin(), models.end(), model) == models.end()) models.push_back(model);
            cells[{model, fe}] = c.at("metrics").contains(metric)
                                     ? c.at("metrics").at(metric).at("summary").get<std::string>()
                                     : "N/A";
        }
        os << target << " (" << (metric == "r2" ? "R²" : "F1") << ", mean ± std (median))\n";
        std::size_t w0 = 5;
        for (const auto& m : models) w0 = std::max(w0, display_width(m));
        std::vector<std::size_t> widths;
        for (const auto& fe : fes) {
            std::size_t w = display_width(fe);
            for (const auto& m : models) w = std::max(w, display_width(cells[{m, fe}]));
            widths.push_back(w);
        }
        os << pad("Model", w0);
        for (std::size_t k = 0; k < fes.size(); ++k) os << "  " << pad(fes[k], widths[k]);
        os << '\n';
        for (const auto& m : models) {
            os << pad(m, w0);
            for (std::size_t k = 0; k < fes.size(); ++k) os << "  " << pad(cells[{m, fes[k]}], widths[k]);
            os << '\n';
        }
        if (t.contains("best") && !t.at("best").is_null())
            os << "Best: " << t.at("best").at("model").get<std::string>() << " with "
               << t.at("best").at("fe").get<std::string>() << '\n';
        if (t.contains("significance") && !t.at("significance").is_null()) {
            const json& kw = t.at("significance").at("kruskal_wallis");
            std::size_t flagged = 0, total = 0;
            for (const auto& p : t.at("significance").at("posthoc")) {
                ++total;
                if (p.at("significant").get<bool>()) ++flagged;
            }
            os << "Kruskal-Wallis H = " << fixed(number_or_nan(kw.at("H")), 3) << ", p = "
               << fixed(number_or_nan(kw.at("p")), 4) << "; Conover-Iman pairs significant: " << flagged << "/"
               << total << '\n';
        }
        os << '\n';
    }
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("io", "failed writing '" + path.string() + "'");
}

}  // namespace

json BenchmarkReport::to_json() const {
    json cells_json = json::array();
    for (const auto& c : cells) {
        json metrics = json::object();
        for (const auto& [name, d] : c.result.metrics) metrics[name] = distribution_json(d);
        json cj = {{"fe", c.result.fe},
                   {"model", c.result.model},
                   {"target", c.result.target},
                   {"task", std::string(cqabench::to_string(c.cell.task))},
                   {"status", c.result.na ? "na" : "ok"},
                   {"error", c.result.error},
                   {"params", cqabench::to_json(c.params)},
                   {"metrics", metrics}};
        cj["tpe"] = c.tpe ? json{{"best_objective", c.tpe->best_objective}, {"budget", c.tpe->budget_used}} : json();
        cells_json.push_back(std::move(cj));
    }
    json targets_json = json::array();
    for (const auto& t : targets) {
        json tj = {{"target", t.target}, {"task", std::string(cqabench::to_string(t.task))}, {"notes", t.notes}};
        if (t.best) {
            const CellOutcome& b = cells[*t.best];
            const std::string metric = primary_metric(t.task);
            tj["best"] = {{"fe", b.result.fe},
                          {"model", b.result.model},
                          {"params", cqabench::to_json(b.params)},
                          {"metric", metric},
                          {"summary", b.result.metrics.at(metric).summary()}};
        } else {
            tj["best"] = nullptr;
        }
        tj["significance"] = t.significance ? t.significance->to_json(t.significance_labels) : json();
        json agreement = json::array();
        for (const auto& o : t.agreement)
            agreement.push_back({{"cell", o.label},
                                 {"ga_best_objective", o.ga.best_objective},
                                 {"ga_budget", o.ga.budget_used},
                                 {"report", o.report.to_json()}});
        tj["agreement"] = agreement;
        targets_json.push_back(std::move(tj));
    }
    return {{"config_hash", config_hash},
            {"seed", seed},
            {"rq", std::string(cqabench::to_string(rq))},
            {"rows", rows},
            {"data",
             {{"predictors", data.predictors},
              {"imputation_warnings", data.imputation_warnings},
              {"em_converged", data.em_converged},
              {"vif", data.vif.to_json()},
              {"vif_removed", data.vif_removed}}},
            {"cells", cells_json},
            {"targets", targets_json}};
}

std::string BenchmarkReport::grid_tsv() const { return grid_from_json(to_json()); }

std::string BenchmarkReport::table_text() const { return table_from_json(to_json()); }

std::string BenchmarkReport::hyperparameters_tsv() const {
    std::ostringstream os;
    os << "target\tfe\tmodel\tparam\tvalue\n";
    for (const auto& c : cells)
        for (const auto& [name, v] : c.params)
            os << c.result.target << '\t' << c.result.fe << '\t' << c.result.model << '\t' << name << '\t'
               << format_value(v) << '\n';
    return os.str();
}

std::string BenchmarkReport::agreement_tsv() const {
    std::ostringstream os;
    os << "target\tcell\tparam\tbo\tga\tdiff_percent\tdenominator\tpass\n";
    for (const auto& t : targets)
        for (const auto& o : t.agreement)
            for (const auto& p : o.report.per_param)
                os << t.target << '\t' << o.label << '\t' << p.name << '\t' << format_value(p.bo) << '\t'
                   << format_value(p.ga) << '\t' << fixed(p.diff_percent, 3) << '\t' << p.denominator << '\t'
                   << (p.pass ? "yes" : "no") << '\n';
    return os.str();
}

void write_benchmark_outputs(const BenchmarkReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    const json j = report.to_json();
    write_file(dir / "report.json", j.dump(2) + "\n");
    write_file(dir / "grid.tsv", grid_from_json(j));
    write_file(dir / "table.txt", table_from_json(j));
    write_file(dir / "hyperparameters.tsv", report.hyperparameters_tsv());
    write_file(dir / "agreement.tsv", report.agreement_tsv());
}

void render_report(const fs::path& dir) {
    std::ifstream in(dir / "report.json");
    if (!in) throw ConfigError("no report.json in " + dir.string());
    json j;
    try {
        j = json::parse(in);
        write_file(dir / "grid.tsv", grid_from_json(j));
        write_file(dir / "table.txt", table_from_json(j));
    } catch (const json::exception& e) {
        throw ConfigError("malformed report.json: " + std::string(e.what()));
    }
}

json TextprepSummary::to_json() const {
    return {{"posts", posts}, {"failed", failed}, {"snippets_per_language", snippets_per_language}};
}

namespace {

// Backslash escapes let an HTML cell carry newlines and tabs.
std::string unescape_tsv(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (std::size_t i = 0; i < cell.size(); ++i) {
        if (cell[i] != '\\' || i + 1 == cell.size()) {
            out.push_back(cell[i]);
            continue;
        }
        switch (cell[++i]) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            case '\\': out.push_back('\\'); break;
            default: out.push_back('\\'); out.push_back(cell[i]);
        }
    }
    return out;
}

}  // namespace


namespace {

std::vector<std::pair<std::string, std::string>> read_posts(const fs::path& input) {
    std::vector<std::pair<std::string, std::string>> posts;
    if (fs::is_directory(input)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(input))
            if (e.is_regular_file() && e.path().extension() == ".html") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            posts.emplace_back(f.stem().string(), ss.str());
        }
        return posts;
    }
    std::ifstream in(input, std::ios::binary);
    if (!in) throw ConfigError("cannot open textprep input " + input.string());
    std::size_t row = 0;
    for (std::string line; std::getline(in, line);) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(input.string() + ": expected id<TAB>html", row);
        posts.emplace_back(line.substr(0, tab), unescape_tsv(std::string_view(line).substr(tab + 1)));
    }
    return posts;
}

std::set<std::string> read_stopwords(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open stopword list " + path.string());
    std::set<std::string> words;
    for (std::string w; std::getline(in, w);) {
        while (!w.empty() && std::isspace(static_cast<unsigned char>(w.back()))) w.pop_back();
        if (!w.empty()) words.insert(w);
    }
    return words;
}

}  // namespace

TextprepSummary run_textprep(const TextprepSettings& settings, const fs::path& out) {
    TextPipeline pipeline;
    if (settings.rules) pipeline.rules = CommentRuleSet::load(*settings.rules);
    if (settings.stopwords) pipeline.stopwords = read_stopwords(*settings.stopwords);
    pipeline.limit = settings.limit;
    const auto posts = read_posts(settings.input);

    TextprepSummary summary;
    for (Language l : studied_languages()) summary.snippets_per_language[to_string(l)] = 0;
    Vocabulary vocab;
    std::ostringstream records;
    json failures = json::array();
    for (const auto& [id, html] : posts) {
        ++summary.posts;
        try {
            const ProcessedPost p = pipeline.process(html, id);
            json snippets = json::array();
            for (const auto& s : p.snippets) {
                if (s.kept) ++summary.snippets_per_language[to_string(s.language.language)];
                snippets.push_back({{"language", to_string(s.language.language)},
                                    {"confidence", s.language.confidence},
                                    {"source", s.language.source},
                                    {"fallback", s.language.fallback},
                                    {"kept", s.kept}});
            }
            for (const auto& t : p.sequence.tokens) vocab.add(t);
            records << json{{"id", p.post_id},
                            {"clean_text", p.clean_text},
                            {"snippets", snippets},
                            {"tokens", vocab.encode(p.sequence)},
                            {"word_span", {p.sequence.word_span.first, p.sequence.word_span.second}},
                            {"code_span", {p.sequence.code_span.first, p.sequence.code_span.second}},
                            {"truncated", p.sequence.truncated},
                            {"diagnostics", p.diagnostics}}
                           .dump()
                    << '\n';
        } catch (const Error& e) {
            ++summary.failed;
            failures.push_back({{"id", id}, {"stage", e.stage()}, {"error", e.what()}});
        }
    }
    fs::create_directories(out);
    write_file(out / "records.jsonl", records.str());
    vocab.save((out / "vocab.txt").string());
    json s = summary.to_json();
    s["failures"] = failures;
    write_file(out / "summary.json", s.dump(2) + "\n");
    std::ostringstream table;
    table << "Language\tTotal Snippets\n";
    for (Language l : studied_languages()) table << to_string(l) << '\t' << summary.snippets_per_language[to_string(l)] << '\n';
    write_file(out / "summary.tsv", table.str());
    return summary;
}

HybridReport run_hybrid_eval(const HybridSettings& settings, double positive_label) {
    return hybrid_evaluate(read_scores(settings.numeric_scores.string()), read_scores(settings.textual_scores.string()),
                           read_labels(settings.ground_truth.string()), settings.threshold, positive_label);
}

}  // namespace cqabench
