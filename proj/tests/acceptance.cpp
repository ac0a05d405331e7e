// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include "cqabench/catalog.hpp"
#include "cqabench/evaluation.hpp"
#include "cqabench/features.hpp"
#include "cqabench/hpo.hpp"
#include "cqabench/hybrid.hpp"
#include "cqabench/imputation.hpp"
#include "cqabench/models/model.hpp"
#include "cqabench/models/network.hpp"
#include "cqabench/pipeline.hpp"
#include "cqabench/plan.hpp"
#include "cqabench/random.hpp"
#include "cqabench/synthetic.hpp"
#include "cqabench/textprep.hpp"

#include "oracles.hpp"
#include "text_fixtures.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

using namespace cqabench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- 1 --------------------------------------------------------------------

Outcome plan_cardinality() {
    std::size_t sizes[3];
    const ResearchQuestion rqs[] = {ResearchQuestion::RQ1, ResearchQuestion::RQ2, ResearchQuestion::RQ3};
    for (int i = 0; i < 3; ++i) {
        const auto targets = catalog::targets_for(rqs[i]);
        const auto models = models_for(targets.front().task);
        sizes[i] = build_plan(models, all_fe_techniques(), targets, 42).size();
    }
    return {sizes[0] == 90 && sizes[1] == 1800 && sizes[2] == 60,
            std::to_string(sizes[0]) + " / " + std::to_string(sizes[1]) + " / " + std::to_string(sizes[2])};
}

// ---- 2 --------------------------------------------------------------------

Outcome metric_fixture() {
    const auto numeric = score(ConfusionMatrix{95, 18, 28, 244, kNonDropoutLabel});
    const auto textual = score(ConfusionMatrix{105, 37, 18, 225, kNonDropoutLabel});
    const bool ok = std::abs(numeric.accuracy - 0.881) <= 0.001 && std::abs(numeric.f1 - 0.805) <= 0.001 &&
                    std::abs(textual.accuracy - 0.857) <= 0.001 && std::abs(textual.f1 - 0.792) <= 0.001;
    return {ok, "numeric acc " + fmt("%.4f", numeric.accuracy) + " F1 " + fmt("%.4f", numeric.f1) + "; textual acc " +
                    fmt("%.4f", textual.accuracy) + " F1 " + fmt("%.4f", textual.f1)};
}

// ---- 3 --------------------------------------------------------------------

Outcome baseline_exactness() {
    Rng rng(3);
    Eigen::VectorXd y(500);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.lognormal(1.0, 0.8);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(500, 4);
    const double r2 = score(y, fit_dummy(Task::Regression, y).predict(X).values, Task::Regression).r2;

    // Trained on a dropout-heavy split; evaluated on a balanced one.
    Eigen::VectorXd train(9), eval(10);
    train << 1, 1, 1, 1, 1, 0, 0, 0, 0;
    eval << 0, 0, 0, 0, 0, 1, 1, 1, 1, 1;
    const auto pred = fit_dummy(Task::Classification, train).predict(Eigen::MatrixXd::Zero(10, 4)).values;
    const auto m = score(eval, pred, Task::Classification, kNonDropoutLabel);
    return {r2 == 0.0 && m.accuracy == 0.5 && m.f1 == 0.0,
            "train R2 " + fmt("%g", r2) + "; balanced acc " + fmt("%g", m.accuracy) + " F1 " + fmt("%g", m.f1)};
}

// ---- 4 --------------------------------------------------------------------

Outcome vif_oracle() {
    Rng rng(4);
    double worst = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const Eigen::Index n = 30 + static_cast<Eigen::Index>(rng.index(70));
        Eigen::MatrixXd Z(n, 8), M(8, 8);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int j = 0; j < 8; ++j) Z(i, j) = rng.normal();
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) M(a, b) = (a == b ? 1.0 : 0.0) + rng.normal(0.0, 0.6);
        const Eigen::MatrixXd X = Z * M;
        std::vector<std::string> names;
        for (int j = 0; j < 8; ++j) names.push_back("x" + std::to_string(j));
        const auto r = compute_vif(X, names);
        for (int j = 0; j < 8; ++j) {
            const double want = oracle::vif(X, j);
            worst = std::max(worst, std::abs(r.values[static_cast<std::size_t>(j)] - want) / want);
        }
    }
    // Reference VIF values of the twenty base predictors.
    VifReport a1;
    a1.threshold = 5.0;
    const std::pair<const char*, double> rows[] = {
        {"Post Attention to Detail", 29.172}, {"Post Readability", 21.041},
        {"Badges", 10.332},                   {"User Contribution Frequency", 8.216},
        {"Reputation", 7.188},                {"YearlyDurationUsage", 4.350},
        {"User Profile Completion Rate", 3.213}, {"Questions", 3.063},
        {"Comments", 2.512},                  {"Edits", 2.093},
        {"Average AboutMe Polarity", 1.865},  {"ProfileLength", 1.840},
        {"Views", 1.787},                     {"UpVotes", 1.772},
        {"User Popularity Index", 1.730},     {"Comment Polarity", 1.558},
        {"Answer Polarity", 1.452},           {"Question Polarity", 1.357},
        {"Code Length", 1.347},               {"DownVotes", 1.257}};
    for (const auto& [name, v] : rows) {
        a1.names.emplace_back(name);
        a1.values.push_back(v);
    }
    const std::vector<std::string> expected{"Post Attention to Detail", "Post Readability", "Badges",
                                            "User Contribution Frequency", "Reputation"};
    const auto removed = a1.exceeding();
    return {worst <= 1e-8 && removed == expected,
            "max relative error " + fmt("%.2e", worst) + "; table prunes " + std::to_string(removed.size()) +
                " columns" + (removed == expected ? " (the expected five)" : " (unexpected set)")};
}

// ---- 5 --------------------------------------------------------------------

Outcome imputation_oracles() {
    std::size_t mismatched = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Rng rng(1000 + t);
        std::vector<ColumnSpec> specs;
        for (int c = 0; c < 5; ++c) specs.push_back({"c" + std::to_string(c), Role::Predictor, {}});
        Eigen::MatrixXd v(200, 5);
        MissingMask m = MissingMask::Constant(200, 5, false);
        for (int i = 0; i < 200; ++i)
            for (int c = 0; c < 5; ++c) {
                v(i, c) = c == 4 ? std::round(rng.normal() * 3.0) : rng.normal(c, 1.0 + c);
                m(i, c) = c == 0 && rng.bernoulli(0.2);
            }
        const UserFeatureTable table(FeatureSchema(specs), v, m);
        const KnnParams p{5, KnnMetric::Euclidean, t % 2 == 0};
        const Eigen::VectorXd got = impute_knn(table, "c0", p).values().col(0);
        if (got != oracle::knn_fill(table, 0, {1, 2, 3, 4}, 5, p.inverse_distance)) ++mismatched;
    }

    const oracle::Bivariate b;
    const auto table = oracle::bivariate_table(b, 5000, 0.2, 55);
    const std::vector<std::string> cols{"x", "y"};
    const auto em = impute_em(table, cols);
    double worst = 0.0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (!table.missing(i, 1)) continue;
        ++filled;
        worst = std::max(worst, std::abs(em.table.at(i, 1) - b.conditional_y(table.at(i, 0))));
    }
    return {mismatched == 0 && em.converged && worst <= 0.05,
            "KNN mismatching tables " + std::to_string(mismatched) + "/100; EM max |diff| " + fmt("%.4f", worst) +
                " over " + std::to_string(filled) + " cells" + (em.converged ? "" : " (not converged)")};
}

// ---- 6 --------------------------------------------------------------------

Outcome statistical_tests() {
    const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    const std::vector<std::vector<double>> disjoint{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const double h0 = kruskal_wallis(same).h;
    const double h1 = kruskal_wallis(disjoint).h;
    std::vector<std::vector<double>> sep(3), ident(3);
    for (int g = 0; g < 3; ++g)
        for (int i = 1; i <= 30; ++i) {
            sep[static_cast<std::size_t>(g)].push_back(30.0 * g + i);
            ident[static_cast<std::size_t>(g)].push_back(i);
        }
    std::size_t flagged_sep = 0, flagged_ident = 0;
    for (const auto& p : conover_iman(sep, 0.01).posthoc) flagged_sep += p.significant;
    for (const auto& p : conover_iman(ident, 0.01).posthoc) flagged_ident += p.significant;
    return {h0 == 0.0 && std::abs(h1 - 7.2) < 1e-12 && flagged_sep == 3 && flagged_ident == 0,
            "H " + fmt("%g", h0) + " / " + fmt("%.12g", h1) + "; Conover flags " + std::to_string(flagged_sep) +
                "/3 disjoint, " + std::to_string(flagged_ident) + "/3 identical"};
}

// ---- 7 --------------------------------------------------------------------

Outcome hpo_convergence() {
    SearchSpace space;
    for (int i = 0; i < 5; ++i) space.add("x" + std::to_string(i), Continuous{-5, 5});
    const Objective sphere = [](const Assignment& a) {
        double t = 0.0;
        for (const auto& [k, v] : a) t += std::get<double>(v) * std::get<double>(v);
        return t;
    };
    // Objective range on the box is [0, 125]; 1% of it is 1.25.
    const double bound = 0.01 * 125.0;
    TpeOptions tpe;
    tpe.n_trials = 100;
    GaOptions ga;
    ga.population = 20;
    ga.generations = 25;
    const double t = tpe_optimize(sphere, space, tpe).best_objective;
    const double g = ga_optimize(sphere, space, ga).best_objective;

    const auto a1 = agreement_check({{"n_estimators", std::int64_t{1199}}}, {{"n_estimators", std::int64_t{1255}}});
    const auto a2 = agreement_check({{"max_depth", std::int64_t{77}}}, {{"max_depth", std::int64_t{79}}});
    const auto a3 = agreement_check({{"learning_rate", 0.259}}, {{"learning_rate", 0.258}});
    const double d1 = a1.per_param[0].diff_percent, d2 = a2.per_param[0].diff_percent,
                 d3 = a3.per_param[0].diff_percent;
    auto r3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
    const bool rows_ok = r3(d1) == 4.671 && r3(d2) == 2.597 && r3(d3) == 0.386 && a1.pass && a2.pass && a3.pass;
    return {t <= bound && g <= bound && rows_ok,
            "TPE best " + fmt("%.4f", t) + ", GA best " + fmt("%.4f", g) + " (bound " + fmt("%.2f", bound) +
                "); agreement " + fmt("%.3f", d1) + "% " + fmt("%.3f", d2) + "% " + fmt("%.3f", d3) + "%" +
                (rows_ok ? " all pass at 5%" : " mismatch")};
}

// ---- 8 --------------------------------------------------------------------

struct Split {
    Eigen::MatrixXd Xtr, Xte;
    Eigen::VectorXd ytr, yte;
};

Split planted_split(const UserFeatureTable& table, const std::vector<std::string>& predictors,
                    const std::string& target, bool stratify) {
    const Eigen::VectorXd y = table.column(target);
    const auto idx = split_indices(table.rows(), 0.8, 2024, stratify ? &y : nullptr);
    const Eigen::MatrixXd X = table.matrix(predictors);
    Split s;
    s.Xtr.resize(static_cast<Eigen::Index>(idx.train.size()), X.cols());
    s.Xte.resize(static_cast<Eigen::Index>(idx.test.size()), X.cols());
    s.ytr.resize(s.Xtr.rows());
    s.yte.resize(s.Xte.rows());
    for (std::size_t i = 0; i < idx.train.size(); ++i) {
        s.Xtr.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx.train[i]));
        s.ytr(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx.train[i]));
    }
    for (std::size_t i = 0; i < idx.test.size(); ++i) {
        s.Xte.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx.test[i]));
        s.yte(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx.test[i]));
    }
    const auto t = fit_apply_transform(FeTechnique::Standardise, s.Xtr, s.Xte);
    s.Xtr = t.train;
    s.Xte = t.eval;
    return s;
}

// Ensemble size and learning rate picked on a validation slice of the
// training rows; the test rows are only used for the final score.
Assignment tune(const std::string& model, const Split& s, Task task) {
    const auto inner = split_indices(static_cast<std::size_t>(s.Xtr.rows()), 0.75, 7,
                                     task == Task::Classification ? &s.ytr : nullptr);
    auto rows = [](const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
        return out;
    };
    const Eigen::MatrixXd Xa = rows(s.Xtr, inner.train), Xb = rows(s.Xtr, inner.test);
    const Eigen::VectorXd ya = rows(s.ytr, inner.train).col(0), yb = rows(s.ytr, inner.test).col(0);
    std::vector<Assignment> grid;
    if (model == "bagging") {
        for (std::int64_t n : {10, 50, 100}) grid.push_back({{"n_estimators", n}});
    } else {
        for (const auto& [lr, n] : std::vector<std::pair<double, std::int64_t>>{{0.3, 100}, {0.1, 300}, {0.05, 300}})
            for (std::int64_t depth : {3, 6})
                grid.push_back({{"learning_rate", lr}, {"n_estimators", n}, {"max_depth", depth}});
    }
    const ModelSpec& spec = find_model(model);
    Assignment best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& a : grid) {
        const double v = score(yb, fit(spec, a, Xa, ya, task, 1).predict(Xb).values, task, kNonDropoutLabel).primary();
        if (v > best_score) {
            best_score = v;
            best = a;
        }
    }
    return best;
}

Outcome planted_signal() {
    const auto raw = generate_synthetic_users(5000, 8);
    const auto table = apply_strategy_map(raw, default_strategy_map(raw.schema())).table;
    const auto arch = nn_architecture(4);

    const auto reg = planted_split(table, catalog::predictors_for(ResearchQuestion::RQ1), catalog::kAnswers, false);
    auto r2_of = [&](const std::string& name) {
        const auto m = fit(find_model(name), tune(name, reg, Task::Regression), reg.Xtr, reg.ytr, Task::Regression, 1);
        return score(reg.yte, m.predict(reg.Xte).values, Task::Regression).r2;
    };
    const double bag = r2_of("bagging");
    const double xgb = r2_of("xgboost");
    const double frozen =
        score(reg.yte, frozen_network_baseline(arch, Task::Regression, reg.Xtr, reg.ytr).predict(reg.Xte).values,
              Task::Regression)
            .r2;
    const double dummy = score(reg.yte, fit_dummy(Task::Regression, reg.ytr).predict(reg.Xte).values, Task::Regression).r2;

    const auto cls = planted_split(table, catalog::predictors_for(ResearchQuestion::RQ3), catalog::kDropout, true);
    auto f1 = [&](const FittedModel& m) {
        return score(cls.yte, m.predict(cls.Xte).values, Task::Classification, kNonDropoutLabel).f1;
    };
    auto f1_of = [&](const std::string& name) {
        return f1(fit(find_model(name), tune(name, cls, Task::Classification), cls.Xtr, cls.ytr,
                      Task::Classification, 1));
    };
    const double cbag = f1_of("bagging");
    const double cxgb = f1_of("xgboost");
    const double cfrozen = f1(frozen_network_baseline(arch, Task::Classification, cls.Xtr, cls.ytr));
    const double cdummy = f1(fit_dummy(Task::Classification, cls.ytr));
    const double gap = std::min(cbag, cxgb) - std::max(cfrozen, cdummy);

    return {bag >= 0.7 && xgb >= 0.7 && frozen < 0.1 && dummy < 0.1 && gap >= 0.15,
            "R2 bagging " + fmt("%.3f", bag) + " xgb " + fmt("%.3f", xgb) + " frozen " + fmt("%.3f", frozen) +
                " dummy " + fmt("%.3f", dummy) + "; F1 bagging " + fmt("%.3f", cbag) + " xgb " + fmt("%.3f", cxgb) +
                " frozen " + fmt("%.3f", cfrozen) + " dummy " + fmt("%.3f", cdummy) + " (gap " + fmt("%.3f", gap) +
                ")"};
}

// ---- 9 --------------------------------------------------------------------

Outcome text_pipeline() {
    const std::string stripped = strip_punctuation(fixture::kListViewParagraph);
    const std::string cleaned = clean_text(fixture::kListViewParagraph);
    const bool url = stripped == fixture::kListViewStripped && cleaned.find(fixture::kListViewUrl) != std::string::npos;
    const bool ruby =
        strip_comments(fixture::kRubyBefore, Language::Ruby, CommentRuleSet::defaults()) == fixture::kRubyAfter;

    Rng rng(9);
    std::size_t violations = 0, max_len = 0;
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::string> w(rng.index(1200)), c(rng.index(1200));
        if (w.empty() && c.empty()) c.resize(1);
        for (auto& t : w) t = "w" + std::to_string(rng.index(50));
        for (auto& t : c) t = "c" + std::to_string(rng.index(50));
        const auto s = pack_sequence(w, c);
        std::size_t specials = 0;
        for (const auto& t : s.tokens) specials += t == kClsToken || t == kSepToken || t == kEosToken;
        const bool shape = s.tokens.front() == kClsToken && s.tokens[s.word_span.second] == kSepToken &&
                           s.tokens.back() == kEosToken;
        if (s.size() > kMaxSequence || specials != 3 || !shape) ++violations;
        max_len = std::max(max_len, s.size());
    }
    return {url && ruby && violations == 0,
            std::string("URL ") + (url ? "intact" : "altered") + "; Ruby snippet " + (ruby ? "exact" : "differs") +
                "; packing violations " + std::to_string(violations) + "/10000, longest " + std::to_string(max_len)};
}

// ---- 10 -------------------------------------------------------------------

Outcome cochran() {
    const auto a = cochran_n(std::numeric_limits<double>::infinity(), 0.5, 0.05, 1.96);
    const auto b = cochran_n(100, 0.5, 0.05, 1.96);
    return {a == 385 && b == 80, std::to_string(a) + " and " + std::to_string(b)};
}

// ---- 11 -------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto config = parse_run_config(nlohmann::json::parse(R"({
        "rq": "RQ3",
        "data": {"synthetic": {"rows": 800, "seed": 11}},
        "fe": ["standardise", "log", "none"],
        "models": ["logreg", "decision_tree", "knn", "random_forest"],
        "runs": 5,
        "hpo": {"tpe_trials": 8, "tpe_startup": 4, "ga_population": 4, "ga_generations": 3, "top_k": 2}
    })"));
    const fs::path root = fs::temp_directory_path() / "cqabench_acceptance_determinism";
    fs::remove_all(root);
    write_benchmark_outputs(run_benchmark(config, {1, true}), root / "a");
    write_benchmark_outputs(run_benchmark(config, {2, true}), root / "b");
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
        ++files;
        if (slurp(e.path()) != slurp(root / "b" / e.path().filename())) ++differing;
    }
    fs::remove_all(root);
    return {files == 5 && differing == 0,
            std::to_string(files) + " report files, " + std::to_string(differing) + " differ (workers 1 vs 2)"};
}

// ---- 12 -------------------------------------------------------------------

Outcome gradient_check() {
    double worst = 0.0;
    for (int id = 1; id <= 4; ++id)
        for (bool classification : {false, true}) {
            Network net(nn_architecture(id), 6, classification);
            Rng rng(static_cast<std::uint64_t>(100 + id));
            net.initialize(rng);
            Eigen::MatrixXd X(5, 6);
            Eigen::VectorXd y(5);
            for (int i = 0; i < 5; ++i) {
                for (int j = 0; j < 6; ++j) X(i, j) = rng.normal();
                y(i) = classification ? static_cast<double>(i % 2) : rng.normal();
            }
            const Eigen::VectorXd g = net.gradient(X, y);
            Eigen::VectorXd theta = net.parameters();
            // All parameters of the small networks, a sample of the wide one.
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(theta.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<Eigen::Index>(k);
            if (idx.size() > 400) {
                rng.shuffle(idx);
                idx.resize(400);
            }
            const auto m = static_cast<Eigen::Index>(idx.size());
            Eigen::VectorXd fd(m), ga(m);
            const double h = 1e-6;
            for (Eigen::Index s = 0; s < m; ++s) {
                const Eigen::Index k = idx[static_cast<std::size_t>(s)];
                ga(s) = g(k);
                const double t0 = theta(k);
                theta(k) = t0 + h;
                net.set_parameters(theta);
                const double up = net.loss(X, y);
                theta(k) = t0 - h;
                net.set_parameters(theta);
                const double down = net.loss(X, y);
                theta(k) = t0;
                fd(s) = (up - down) / (2.0 * h);
            }
            net.set_parameters(theta);
            const double rel = (ga - fd).norm() / std::max({ga.norm(), fd.norm(), 1e-12});
            worst = std::max(worst, rel);
        }
    return {worst <= 1e-4, "worst relative error " + fmt("%.2e", worst) + " over 4 architectures x 2 tasks (at most 400 sampled parameters each)"};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "plan cardinality", 1, plan_cardinality},
        {2, "metric fixture", 1, metric_fixture},
        {3, "baseline exactness", 1, baseline_exactness},
        {4, "VIF oracle", 30, vif_oracle},
        {5, "imputation oracles", 60, imputation_oracles},
        {6, "statistical tests", 5, statistical_tests},
        {7, "HPO convergence and agreement", 120, hpo_convergence},
        {8, "planted-signal discrimination", 300, planted_signal},
        {9, "text pipeline bit-exactness", 30, text_pipeline},
        {10, "Cochran sample size", 1, cochran},
        {11, "end-to-end determinism", 300, determinism},
        {12, "gradient check", 10, gradient_check},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("[%s] %2d %-32s %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d/12 criteria passed\n", 12 - failures);
    return failures == 0 ? 0 : 1;
}
