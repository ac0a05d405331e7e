#include "cqabench/evaluation.hpp"

#include "cqabench/error.hpp"
#include "cqabench/models/model.hpp"
#include "cqabench/random.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace cqabench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw EvaluationError("y_true has " + std::to_string(a.size()) + " values but y_pred has " +
                              std::to_string(b.size()));
    if (a.size() == 0) throw EvaluationError("cannot score zero predictions");
}

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

ConfusionMatrix ConfusionMatrix::from(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
                                      double positive_label) {
    check_lengths(y_true, y_pred);
    ConfusionMatrix cm;
    cm.positive_label = positive_label;
    for (Eigen::Index i = 0; i < y_true.size(); ++i) {
        const bool actual = y_true(i) == positive_label;
        const bool predicted = y_pred(i) == positive_label;
        if (actual && predicted)
            ++cm.tp;
        else if (!actual && predicted)
            ++cm.fp;
        else if (actual)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

double ConfusionMatrix::accuracy() const {
    if (total() == 0) throw EvaluationError("accuracy of an empty confusion matrix");
    return static_cast<double>(tp + tn) / static_cast<double>(total());
}

double ConfusionMatrix::precision() const { return ratio_or_zero(static_cast<double>(tp), static_cast<double>(tp + fp)); }

double ConfusionMatrix::recall() const { return ratio_or_zero(static_cast<double>(tp), static_cast<double>(tp + fn)); }

double ConfusionMatrix::f1() const {
    return ratio_or_zero(2.0 * static_cast<double>(tp), static_cast<double>(2 * tp + fp + fn));
}

std::map<std::string, double> MetricSet::values() const {
    if (task == Task::Regression) return {{"r2", r2}, {"rmse", rmse}};
    return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
}

MetricSet score(const ConfusionMatrix& cm) {
    MetricSet m;
    m.task = Task::Classification;
    m.r2 = kNaN;
    m.rmse = kNaN;
    m.accuracy = cm.accuracy();
    m.precision = cm.precision();
    m.recall = cm.recall();
    m.f1 = cm.f1();
    return m;
}

MetricSet score(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred, Task task, double positive_label) {
    check_lengths(y_true, y_pred);
    if (task == Task::Classification) return score(ConfusionMatrix::from(y_true, y_pred, positive_label));
    MetricSet m;
    m.task = Task::Regression;
    m.accuracy = m.precision = m.recall = m.f1 = kNaN;
    const double mean = y_true.mean();
    const double ss_tot = (y_true.array() - mean).square().sum();
    const double ss_res = (y_true - y_pred).squaredNorm();
    if (!(ss_tot > 0.0)) throw EvaluationError("R² is undefined for a constant y_true");
    m.r2 = 1.0 - ss_res / ss_tot;
    m.rmse = std::sqrt(ss_res / static_cast<double>(y_true.size()));
    return m;
}

SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed, const Eigen::VectorXd* strata) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw EvaluationError("train ratio must lie strictly between 0 and 1");
    if (n < 2) throw EvaluationError("splitting needs at least two rows");
    if (strata && static_cast<std::size_t>(strata->size()) != n)
        throw EvaluationError("stratification labels do not match the row count");
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil((1.0 - ratio) * static_cast<double>(n) - 1e-9)), 1, n - 1);
    Rng rng(seed);
    SplitIndices out;
    std::vector<char> is_test(n, 0);
    if (!strata) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
    } else {
        std::map<double, std::vector<std::size_t>> classes;
        for (std::size_t i = 0; i < n; ++i) classes[(*strata)(static_cast<Eigen::Index>(i))].push_back(i);
        std::vector<std::size_t> share;
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        std::size_t k = 0;
        for (const auto& [label, rows] : classes) {
            const double exact = static_cast<double>(n_test) * static_cast<double>(rows.size()) / static_cast<double>(n);
            const auto f = static_cast<std::size_t>(std::floor(exact));
            share.push_back(f);
            assigned += f;
            remainders.push_back({exact - static_cast<double>(f), k++});
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < n_test; ++i, ++assigned) ++share[remainders[i % remainders.size()].second];
        k = 0;
        for (auto& [label, rows] : classes) {
            rng.shuffle(rows);
            for (std::size_t i = 0; i < std::min(share[k], rows.size()); ++i) is_test[rows[i]] = 1;
            ++k;
        }
    }
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).push_back(i);
    return out;
}

std::pair<UserFeatureTable, UserFeatureTable> split_train_test(const UserFeatureTable& table, double ratio,
                                                               std::uint64_t seed,
                                                               std::optional<std::string> stratify_column) {
    SplitIndices s;
    if (stratify_column) {
        const Eigen::VectorXd labels = table.column(*stratify_column);
        s = split_indices(table.rows(), ratio, seed, &labels);
    } else {
        s = split_indices(table.rows(), ratio, seed);
    }
    return {table.select_rows(s.train), table.select_rows(s.test)};
}

RunDistribution RunDistribution::from(std::vector<double> values) {
    if (values.empty()) throw EvaluationError("cannot summarize an empty run distribution");
    RunDistribution d;
    d.values = std::move(values);
    const auto n = static_cast<double>(d.values.size());
    d.mean = std::accumulate(d.values.begin(), d.values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : d.values) ss += (v - d.mean) * (v - d.mean);
    d.std = std::sqrt(ss / n);
    std::vector<double> sorted = d.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    d.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    return d;
}

std::string format_metric(double v) {
    if (std::isnan(v)) return "N/A";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    std::string s = os.str();
    while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    if (s == "-0.0") s = "0.0";
    return s;
}

std::string RunDistribution::summary() const {
    return format_metric(mean) + " ± " + format_metric(std) + " (" + format_metric(median) + ")";
}

std::string summarize(std::span<const double> values) {
    return RunDistribution::from(std::vector<double>(values.begin(), values.end())).summary();
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
    return out;
}

}  // namespace

RepeatedEvalResult repeated_eval(const UserFeatureTable& table, const EvalSetup& setup, const Preprocessor& prep,
                                 const Fitter& fitter) {
    if (setup.runs < 1) throw ConfigError("repeated evaluation needs at least one run");
    const Eigen::MatrixXd X = table.matrix(setup.predictors);
    const Eigen::VectorXd y = table.column(setup.target);
    const bool cls = setup.task == Task::Classification;

    std::vector<std::optional<MetricSet>> results(setup.runs);
    std::vector<std::string> errors(setup.runs);
    auto run = [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(setup.master_seed, i);
        try {
            const auto s = split_indices(table.rows(), setup.train_ratio, seed, cls ? &y : nullptr);
            const auto [Xtr, Xte] = prep(gather_rows(X, s.train), gather_rows(X, s.test));
            const Eigen::VectorXd ytr = gather(y, s.train);
            const Eigen::VectorXd yte = gather(y, s.test);
            const FittedModel model = fitter(Xtr, ytr, seed);
            const Prediction p = model.predict(Xte);
            results[i] = score(yte, p.values, setup.task, setup.positive_label);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(setup.workers, setup.runs));
    if (workers == 1) {
        for (std::size_t i = 0; i < setup.runs; ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < setup.runs; i += workers) run(i);
            });
        for (auto& t : pool) t.join();
    }

    RepeatedEvalResult out;
    std::map<std::string, std::vector<double>> collected;
    for (std::size_t i = 0; i < setup.runs; ++i) {
        if (!results[i]) {
            if (out.failed_runs++ == 0) out.first_error = errors[i];
            continue;
        }
        for (const auto& [name, v] : results[i]->values()) collected[name].push_back(v);
    }
    for (auto& [name, values] : collected) out.metrics[name] = RunDistribution::from(std::move(values));
    return out;
}

namespace {

// Average ranks (1-based) over the pooled groups and the tie term
// sum(t^3 - t).
std::vector<std::vector<double>> pooled_ranks(std::span<const std::vector<double>> groups, double& tie_term) {
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> all;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t i = 0; i < groups[g].size(); ++i) all.push_back({groups[g][i], {g, i}});
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<double>> ranks(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) ranks[g].resize(groups[g].size());
    tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[all[k].second.first][all[k].second.second] = r;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

void check_groups(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) throw EvaluationError("Kruskal-Wallis needs at least two groups");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw EvaluationError("group " + std::to_string(g) + " is empty");
        for (double v : groups[g])
            if (!std::isfinite(v)) throw EvaluationError("group " + std::to_string(g) + " contains a non-finite value");
    }
}

}  // namespace

KruskalWallis kruskal_wallis(std::span<const std::vector<double>> groups) {
    check_groups(groups);
    double ties = 0.0;
    const auto ranks = pooled_ranks(groups, ties);
    double N = 0.0, sum = 0.0;
    for (const auto& r : ranks) {
        const auto n = static_cast<double>(r.size());
        const double R = std::accumulate(r.begin(), r.end(), 0.0);
        sum += R * R / n;
        N += n;
    }
    KruskalWallis kw;
    kw.df = groups.size() - 1;
    const double correction = 1.0 - ties / (N * N * N - N);
    if (!(correction > 0.0)) return kw;  // every value tied
    kw.h = std::max(0.0, (12.0 / (N * (N + 1.0)) * sum - 3.0 * (N + 1.0)) / correction);
    boost::math::chi_squared dist(static_cast<double>(kw.df));
    kw.p = boost::math::cdf(boost::math::complement(dist, kw.h));
    return kw;
}

double bonferroni(double p, std::size_t comparisons) { return std::min(1.0, p * static_cast<double>(comparisons)); }

SignificanceReport conover_iman(std::span<const std::vector<double>> groups, double alpha) {
    SignificanceReport rep;
    rep.alpha = alpha;
    rep.kw = kruskal_wallis(groups);
    double ties = 0.0;
    const auto ranks = pooled_ranks(groups, ties);
    const std::size_t k = groups.size();
    double N = 0.0, sum_sq = 0.0;
    std::vector<double> mean_rank(k);
    for (std::size_t g = 0; g < k; ++g) {
        N += static_cast<double>(ranks[g].size());
        double s = 0.0;
        for (double r : ranks[g]) {
            s += r;
            sum_sq += r * r;
        }
        mean_rank[g] = s / static_cast<double>(ranks[g].size());
    }
    const double S2 = (sum_sq - N * (N + 1.0) * (N + 1.0) / 4.0) / (N - 1.0);
    const double df = N - static_cast<double>(k);
    const std::size_t m = k * (k - 1) / 2;
    const double scale = df > 0.0 ? S2 * (N - 1.0 - rep.kw.h) / df : 0.0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            PairwiseResult r;
            r.a = a;
            r.b = b;
            const double se2 =
                scale * (1.0 / static_cast<double>(ranks[a].size()) + 1.0 / static_cast<double>(ranks[b].size()));
            const double diff = mean_rank[a] - mean_rank[b];
            if (se2 > 0.0) {
                r.statistic = diff / std::sqrt(se2);
                boost::math::students_t t(df);
                r.p_raw = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(r.statistic))));
            } else if (diff != 0.0 && df > 0.0) {
                r.statistic = std::copysign(std::numeric_limits<double>::infinity(), diff);
                r.p_raw = 0.0;
            }
            r.p_adjusted = bonferroni(r.p_raw, m);
            r.significant = r.p_adjusted < alpha;
            rep.posthoc.push_back(r);
        }
    return rep;
}

nlohmann::json SignificanceReport::to_json(std::span<const std::string> labels) const {
    auto label = [&](std::size_t i) { return i < labels.size() ? labels[i] : std::to_string(i); };
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : posthoc)
        pairs.push_back({{"a", label(p.a)},
                         {"b", label(p.b)},
                         {"statistic", std::isfinite(p.statistic) ? nlohmann::json(p.statistic) : nlohmann::json(p.statistic > 0 ? "inf" : "-inf")},
                         {"p_raw", p.p_raw},
                         {"p_adjusted", p.p_adjusted},
                         {"significant", p.significant}});
    return {{"kruskal_wallis", {{"H", kw.h}, {"p", kw.p}, {"df", kw.df}}},
            {"alpha", alpha},
            {"correction", correction},
            {"posthoc", pairs}};
}

KsResult ks_normality(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 5) throw EvaluationError("KS normality test needs at least five values");
    std::vector<double> x(sample.begin(), sample.end());
    for (double v : x)
        if (!std::isfinite(v)) throw EvaluationError("KS sample contains a non-finite value");
    std::sort(x.begin(), x.end());
    const double nn = static_cast<double>(n);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / nn;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (nn - 1.0));
    if (!(sd > 0.0)) throw EvaluationError("KS normality test is undefined for a constant sample");
    const boost::math::normal dist(mean, sd);
    KsResult r;
    for (std::size_t i = 0; i < n; ++i) {
        const double F = boost::math::cdf(dist, x[i]);
        r.statistic = std::max({r.statistic, static_cast<double>(i + 1) / nn - F, F - static_cast<double>(i) / nn});
    }
    const double sq = std::sqrt(nn);
    const double lambda = (sq + 0.12 + 0.11 / sq) * r.statistic;
    if (lambda < 1e-3) {
        r.p = 1.0;
    } else {
        double p = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
            p += term;
            if (std::abs(term) < 1e-16) break;
        }
        r.p = std::clamp(p, 0.0, 1.0);
    }
    return r;
}

double CellResult::mean(const std::string& metric) const {
    const auto it = metrics.find(metric);
    return it == metrics.end() ? kNaN : it->second.mean;
}

const CellResult& select_best(std::span<const CellResult> cells, Task task) {
    const CellResult* best = nullptr;
    auto key = [&](const CellResult& c) {
        if (task == Task::Regression) return std::make_tuple(-c.mean("r2"), c.mean("rmse"));
        return std::make_tuple(-c.mean("f1"), -c.mean("accuracy"));
    };
    for (const auto& c : cells) {
        if (c.na || std::isnan(std::get<0>(key(c)))) continue;
        if (!best) {
            best = &c;
            continue;
        }
        const auto kc = key(c), kb = key(*best);
        if (kc < kb || (kc == kb && std::tie(c.fe, c.model) < std::tie(best->fe, best->model))) best = &c;
    }
    if (!best) throw EvaluationError("every cell is N/A; no best combination exists");
    return *best;
}

}  // namespace cqabench
