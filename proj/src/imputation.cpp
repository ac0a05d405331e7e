#include "cqabench/imputation.hpp"

#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace cqabench {

std::string_view to_string(ImputationKind kind) {
    switch (kind) {
        case ImputationKind::Zero: return "zero";
        case ImputationKind::Knn: return "knn";
        case ImputationKind::Em: return "em";
    }
    return "?";
}

ImputationKind parse_imputation_kind(std::string_view text) {
    for (auto k : {ImputationKind::Zero, ImputationKind::Knn, ImputationKind::Em})
        if (to_string(k) == text) return k;
    throw ConfigError("unknown imputation strategy '" + std::string(text) + "'");
}

void ImputationStrategy::validate() const {
    if (knn.k < 1) throw ConfigError("KNN imputation needs k >= 1");
    if (!(em.tolerance > 0.0)) throw ConfigError("EM tolerance must be positive");
    if (em.max_iterations < 1) throw ConfigError("EM needs at least one iteration");
}

StrategyMap& StrategyMap::assign(std::string column, ImputationStrategy strategy) {
    strategy.validate();
    for (const auto& [name, s] : entries_)
        if (name == column) throw ConfigError("column '" + column + "' is assigned two imputation strategies");
    entries_.emplace_back(std::move(column), strategy);
    return *this;
}

std::vector<std::string> StrategyMap::columns_with(ImputationKind kind) const {
    std::vector<std::string> out;
    for (const auto& [name, s] : entries_)
        if (s.kind == kind) out.push_back(name);
    return out;
}

namespace {

std::vector<std::string> table3_zero() {
    std::vector<std::string> v = {"ProfileLength", "UpVotes",   "DownVotes",   "Views",
                                  "Reputation",    "Questions", catalog::kAnswers, "Code Length"};
    for (const auto& c : catalog::violation_density_columns()) v.push_back(c);
    return v;
}

const std::vector<std::string> kTable3Knn = {"Comments",       "Edits", "Badges", "Post Readability",
                                             "Post Attention to Detail", "User Contribution Frequency"};
const std::vector<std::string> kTable3Em = {"AboutMe Polarity", "Comment Polarity", "Question Polarity",
                                            "Answer Polarity", "User Popularity Index"};

std::vector<std::string> expand(const nlohmann::json& list, const FeatureSchema& schema) {
    std::vector<std::string> out;
    for (const auto& item : list) {
        const auto pattern = item.get<std::string>();
        if (!pattern.empty() && pattern.back() == '*') {
            const auto prefix = pattern.substr(0, pattern.size() - 1);
            bool any = false;
            for (const auto& name : schema.names())
                if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name), any = true;
            if (!any) throw ConfigError("imputation pattern '" + pattern + "' matches no column");
        } else {
            if (!schema.contains(pattern)) throw ConfigError("imputation map names unknown column '" + pattern + "'");
            out.push_back(pattern);
        }
    }
    return out;
}

}  // namespace

StrategyMap default_strategy_map(const FeatureSchema& schema) {
    StrategyMap map;
    ImputationStrategy zero{ImputationKind::Zero, {}, {}};
    ImputationStrategy knn{ImputationKind::Knn, {}, {}};
    ImputationStrategy em{ImputationKind::Em, {}, {}};
    for (const auto& c : table3_zero())
        if (schema.contains(c)) map.assign(c, zero);
    for (const auto& c : kTable3Knn)
        if (schema.contains(c)) map.assign(c, knn);
    for (const auto& c : kTable3Em)
        if (schema.contains(c)) map.assign(c, em);
    return map;
}

StrategyMap strategy_map_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    if (!j.is_object()) throw ConfigError("imputation map must be an object");
    ImputationStrategy base;
    base.knn.k = j.value("knn_k", base.knn.k);
    const auto metric = j.value("knn_metric", std::string("euclidean"));
    if (metric == "euclidean")
        base.knn.metric = KnnMetric::Euclidean;
    else if (metric == "manhattan")
        base.knn.metric = KnnMetric::Manhattan;
    else
        throw ConfigError("unknown KNN imputation metric '" + metric + "'");
    const auto weighting = j.value("knn_weighting", std::string("distance"));
    if (weighting != "distance" && weighting != "uniform")
        throw ConfigError("unknown KNN weighting '" + weighting + "'");
    base.knn.inverse_distance = weighting == "distance";
    base.em.tolerance = j.value("em_tolerance", base.em.tolerance);
    base.em.max_iterations = j.value("em_max_iterations", base.em.max_iterations);
    base.em.seed = j.value("em_seed", base.em.seed);

    static const std::set<std::string> known = {"zero", "knn", "em", "knn_k", "knn_metric", "knn_weighting",
                                                "em_tolerance", "em_max_iterations", "em_seed"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("unknown imputation setting '" + key + "'");

    StrategyMap map;
    for (auto kind : {ImputationKind::Zero, ImputationKind::Knn, ImputationKind::Em}) {
        const std::string key(to_string(kind));
        if (!j.contains(key)) continue;
        ImputationStrategy s = base;
        s.kind = kind;
        for (auto& c : expand(j.at(key), schema)) map.assign(std::move(c), s);
    }
    return map;
}

UserFeatureTable impute_zero(const UserFeatureTable& table, std::string_view column) {
    const std::size_t c = table.schema().require(column);
    if (table.column_complete(c)) return table;
    Eigen::VectorXd v = table.values().col(static_cast<Eigen::Index>(c));
    for (std::size_t r = 0; r < table.rows(); ++r)
        if (table.missing(r, c)) v(static_cast<Eigen::Index>(r)) = 0.0;
    return table.with_column(c, v, Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(v.size(), false));
}

std::vector<std::string> default_neighbour_columns(const UserFeatureTable& table, std::string_view exclude) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const auto& spec = table.schema().column(c);
        if (spec.role != Role::Predictor || spec.name == exclude) continue;
        if (table.column_complete(c)) out.push_back(spec.name);
    }
    return out;
}

UserFeatureTable impute_knn(const UserFeatureTable& table, std::string_view column, const KnnParams& params,
                            std::span<const std::string> neighbour_columns) {
    if (params.k < 1) throw ConfigError("KNN imputation needs k >= 1");
    const std::size_t c = table.schema().require(column);
    if (table.column_complete(c)) return table;
    const std::string name(column);

    std::vector<Eigen::Index> donors, queries;
    for (std::size_t r = 0; r < table.rows(); ++r)
        (table.missing(r, c) ? queries : donors).push_back(static_cast<Eigen::Index>(r));
    if (donors.empty()) throw ImputationError("column '" + name + "' is entirely missing; KNN cannot impute it");
    if (donors.size() < params.k)
        throw ImputationError("column '" + name + "' has " + std::to_string(donors.size()) +
                              " observed rows, fewer than k = " + std::to_string(params.k));

    std::vector<Eigen::Index> space;
    for (const auto& n : neighbour_columns) {
        const std::size_t j = table.schema().require(n);
        if (j == c) continue;
        if (!table.column_complete(j))
            throw ImputationError("neighbour column '" + n + "' still has missing values");
        space.push_back(static_cast<Eigen::Index>(j));
    }
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows());
    Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(space.size()));
    Eigen::Index kept = 0;
    for (auto j : space) {
        const Eigen::VectorXd v = table.values().col(j);
        double mean = 0.0, var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) mean += v(r);
        mean /= static_cast<double>(n);
        for (Eigen::Index r = 0; r < n; ++r) var += (v(r) - mean) * (v(r) - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (!(sd > 0.0)) continue;
        Z.col(kept++) = (v.array() - mean) / sd;
    }
    if (kept == 0) throw ImputationError("no non-constant neighbour columns available to impute '" + name + "'");
    Z.conservativeResize(n, kept);

    const Eigen::VectorXd y = table.values().col(static_cast<Eigen::Index>(c));
    Eigen::VectorXd out = y;
    std::vector<std::pair<double, Eigen::Index>> d(donors.size());
    const auto k = static_cast<std::ptrdiff_t>(params.k);
    for (auto q : queries) {
        for (std::size_t i = 0; i < donors.size(); ++i) {
            // Sequential sums keep distances identical across SIMD widths.
            double acc = 0.0;
            for (Eigen::Index j = 0; j < kept; ++j) {
                const double diff = Z(q, j) - Z(donors[i], j);
                acc += params.metric == KnnMetric::Euclidean ? diff * diff : std::abs(diff);
            }
            const double dist = params.metric == KnnMetric::Euclidean ? std::sqrt(acc) : acc;
            d[i] = {dist, donors[i]};
        }
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        double value;
        if (!params.inverse_distance) {
            double s = 0.0;
            for (std::ptrdiff_t i = 0; i < k; ++i) s += y(d[static_cast<std::size_t>(i)].second);
            value = s / static_cast<double>(k);
        } else if (d[0].first == 0.0) {
            double s = 0.0;
            std::size_t m = 0;
            for (std::ptrdiff_t i = 0; i < k && d[static_cast<std::size_t>(i)].first == 0.0; ++i, ++m)
                s += y(d[static_cast<std::size_t>(i)].second);
            value = s / static_cast<double>(m);
        } else {
            double num = 0.0, den = 0.0;
            for (std::ptrdiff_t i = 0; i < k; ++i) {
                const auto& [dist, row] = d[static_cast<std::size_t>(i)];
                num += y(row) / dist;
                den += 1.0 / dist;
            }
            value = num / den;
        }
        out(q) = value;
    }
    return table.with_column(c, out, Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false));
}

UserFeatureTable impute_knn(const UserFeatureTable& table, std::string_view column, const KnnParams& params) {
    const auto space = default_neighbour_columns(table, column);
    return impute_knn(table, column, params, space);
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct Pattern {
    std::vector<Eigen::Index> observed;
    std::vector<Eigen::Index> missing;
    std::vector<Eigen::Index> rows;
};

Eigen::MatrixXd sub(const Eigen::MatrixXd& S, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = S(r[i], c[j]);
    return out;
}

class GaussianEm {
public:
    GaussianEm(const Eigen::MatrixXd& Y, const MissingMask& M) : Y_(Y), n_(Y.rows()), p_(Y.cols()) {
        std::map<std::vector<bool>, std::size_t> index;
        for (Eigen::Index r = 0; r < n_; ++r) {
            std::vector<bool> key(static_cast<std::size_t>(p_));
            for (Eigen::Index j = 0; j < p_; ++j) key[static_cast<std::size_t>(j)] = M(r, j);
            auto [it, inserted] = index.emplace(key, patterns_.size());
            if (inserted) {
                Pattern pat;
                for (Eigen::Index j = 0; j < p_; ++j) (M(r, j) ? pat.missing : pat.observed).push_back(j);
                patterns_.push_back(std::move(pat));
            }
            patterns_[it->second].rows.push_back(r);
        }
    }

    // Adds a ridge until the covariance is positive definite.
    void regularize(Eigen::MatrixXd& S, std::vector<std::string>& warnings) const {
        for (int attempt = 0; attempt < 20; ++attempt) {
            Eigen::LLT<Eigen::MatrixXd> llt(S);
            if (llt.info() == Eigen::Success) return;
            const double scale = std::max(S.diagonal().mean(), 1e-300);
            S.diagonal().array() += 1e-8 * scale * std::pow(10.0, attempt);
            if (attempt == 0) warnings.push_back("EM covariance was singular; added a diagonal ridge");
        }
        throw ImputationError("EM covariance could not be regularized");
    }

    double log_likelihood(const Eigen::VectorXd& mu, const Eigen::MatrixXd& S) const {
        double ll = 0.0;
        for (const auto& pat : patterns_) {
            if (pat.observed.empty()) continue;
            const Eigen::MatrixXd Soo = sub(S, pat.observed, pat.observed);
            Eigen::LLT<Eigen::MatrixXd> llt(Soo);
            const auto L = llt.matrixL();
            double logdet = 0.0;
            for (Eigen::Index i = 0; i < Soo.rows(); ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
            const auto o = static_cast<double>(pat.observed.size());
            for (auto r : pat.rows) {
                Eigen::VectorXd d(static_cast<Eigen::Index>(pat.observed.size()));
                for (std::size_t i = 0; i < pat.observed.size(); ++i)
                    d(static_cast<Eigen::Index>(i)) = Y_(r, pat.observed[i]) - mu(pat.observed[i]);
                const Eigen::VectorXd z = L.solve(d);
                ll += -0.5 * (o * kLog2Pi + logdet + z.squaredNorm());
            }
        }
        return ll;
    }

    // Conditional expectations of missing cells (written into X) and the
    // summed conditional covariance of all rows.
    Eigen::MatrixXd expectation(const Eigen::VectorXd& mu, const Eigen::MatrixXd& S, Eigen::MatrixXd& X) const {
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p_, p_);
        for (const auto& pat : patterns_) {
            if (pat.missing.empty()) continue;
            const auto& m = pat.missing;
            const auto& o = pat.observed;
            Eigen::MatrixXd Cmm = sub(S, m, m);
            Eigen::MatrixXd B;  // |m| x |o| regression coefficients
            if (!o.empty()) {
                const Eigen::MatrixXd Soo = sub(S, o, o);
                const Eigen::MatrixXd Smo = sub(S, m, o);
                Eigen::LLT<Eigen::MatrixXd> llt(Soo);
                B = llt.solve(Smo.transpose()).transpose();
                Cmm -= B * Smo.transpose();
            }
            for (auto r : pat.rows) {
                for (std::size_t a = 0; a < m.size(); ++a) {
                    double v = mu(m[a]);
                    for (std::size_t b = 0; b < o.size(); ++b)
                        v += B(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * (Y_(r, o[b]) - mu(o[b]));
                    X(r, m[a]) = v;
                }
            }
            const auto count = static_cast<double>(pat.rows.size());
            for (std::size_t a = 0; a < m.size(); ++a)
                for (std::size_t b = 0; b < m.size(); ++b)
                    C(m[a], m[b]) += count * Cmm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
        return C;
    }

    const std::vector<Pattern>& patterns() const noexcept { return patterns_; }

private:
    const Eigen::MatrixXd& Y_;
    Eigen::Index n_;
    Eigen::Index p_;
    std::vector<Pattern> patterns_;
};

void moments(const Eigen::MatrixXd& X, Eigen::VectorXd& mu, Eigen::MatrixXd& S) {
    const auto n = static_cast<double>(X.rows());
    mu = X.colwise().mean().transpose();
    const Eigen::MatrixXd C = X.rowwise() - mu.transpose();
    S = C.transpose() * C / n;
}

}  // namespace

EmResult impute_em(const UserFeatureTable& table, std::span<const std::string> columns, const EmParams& params) {
    if (columns.empty()) throw ImputationError("EM imputation needs a non-empty column set");
    if (!(params.tolerance > 0.0) || params.max_iterations < 1) throw ConfigError("invalid EM parameters");
    EmResult result;
    result.table = table;
    const auto n = static_cast<Eigen::Index>(table.rows());
    const auto p = static_cast<Eigen::Index>(columns.size());
    if (n < 2) throw ImputationError("EM imputation needs at least two rows");

    std::vector<std::size_t> idx;
    for (const auto& c : columns) {
        const auto j = table.schema().require(c);
        if (std::find(idx.begin(), idx.end(), j) != idx.end())
            throw ImputationError("EM column '" + c + "' listed twice");
        idx.push_back(j);
    }
    Eigen::MatrixXd Y(n, p);
    MissingMask M(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto c = idx[static_cast<std::size_t>(j)];
        std::size_t observed = 0;
        for (Eigen::Index r = 0; r < n; ++r) {
            M(r, j) = table.missing(static_cast<std::size_t>(r), c);
            Y(r, j) = M(r, j) ? 0.0 : table.values()(r, static_cast<Eigen::Index>(c));
            observed += !M(r, j);
        }
        if (observed == 0)
            throw ImputationError("EM column '" + columns[static_cast<std::size_t>(j)] + "' is entirely missing");
    }

    // Random initial fill: each missing cell takes a random observed value
    // from its own column.
    Rng rng(params.seed);
    Eigen::MatrixXd X = Y;
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<double> pool;
        for (Eigen::Index r = 0; r < n; ++r)
            if (!M(r, j)) pool.push_back(Y(r, j));
        for (Eigen::Index r = 0; r < n; ++r)
            if (M(r, j)) X(r, j) = pool[rng.index(pool.size())];
    }

    GaussianEm em(Y, M);
    Eigen::VectorXd mu;
    Eigen::MatrixXd S;
    moments(X, mu, S);
    em.regularize(S, result.warnings);
    double prev = em.log_likelihood(mu, S);
    result.log_likelihood.push_back(prev);
    const bool any_missing = M.any();
    for (std::size_t it = 1; it <= params.max_iterations; ++it) {
        X = Y;
        const Eigen::MatrixXd C = em.expectation(mu, S, X);
        moments(X, mu, S);
        S += C / static_cast<double>(n);
        em.regularize(S, result.warnings);
        const double ll = em.log_likelihood(mu, S);
        result.log_likelihood.push_back(ll);
        result.iterations = it;
        if (!std::isfinite(ll)) throw ImputationError("EM log-likelihood became non-finite");
        if (std::abs(ll - prev) / static_cast<double>(n) < params.tolerance) {
            result.converged = true;
            break;
        }
        prev = ll;
    }
    if (!any_missing) result.converged = true;
    if (!result.converged)
        result.warnings.push_back("EM stopped at the iteration cap of " + std::to_string(params.max_iterations) +
                                  " without converging");

    X = Y;
    em.expectation(mu, S, X);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto c = idx[static_cast<std::size_t>(j)];
        if (table.column_complete(c)) continue;
        result.table = result.table.with_column(c, X.col(j), Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false));
    }
    result.mean = mu;
    result.covariance = S;
    return result;
}

ImputationReport apply_strategy_map(const UserFeatureTable& table, const StrategyMap& map) {
    for (const auto& [name, s] : map.assignments()) {
        if (!table.schema().contains(name)) throw ConfigError("imputation map names unknown column '" + name + "'");
        s.validate();
    }
    ImputationReport report;
    report.table = table;
    for (const auto& [name, s] : map.assignments())
        if (s.kind == ImputationKind::Zero) report.table = impute_zero(report.table, name);

    const auto knn = map.columns_with(ImputationKind::Knn);
    if (!knn.empty()) {
        std::vector<std::string> space;
        for (const auto& c : default_neighbour_columns(report.table))
            if (std::find(knn.begin(), knn.end(), c) == knn.end()) space.push_back(c);
        const UserFeatureTable before = report.table;
        for (const auto& [name, s] : map.assignments()) {
            if (s.kind != ImputationKind::Knn) continue;
            try {
                const auto done = impute_knn(before, name, s.knn, space);
                const auto c = done.schema().require(name);
                report.table = report.table.with_column(
                    c, done.values().col(static_cast<Eigen::Index>(c)),
                    Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(static_cast<Eigen::Index>(done.rows()), false));
            } catch (const ImputationError& e) {
                throw ImputationError("KNN stage, column '" + name + "': " + e.what());
            }
        }
    }

    // One EM fit per distinct parameter set, in first-seen order.
    std::vector<std::pair<EmParams, std::vector<std::string>>> groups;
    for (const auto& [name, s] : map.assignments()) {
        if (s.kind != ImputationKind::Em) continue;
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            return g.first.tolerance == s.em.tolerance && g.first.max_iterations == s.em.max_iterations &&
                   g.first.seed == s.em.seed;
        });
        if (it == groups.end())
            groups.push_back({s.em, {name}});
        else
            it->second.push_back(name);
    }
    for (const auto& [params, cols] : groups) {
        auto r = impute_em(report.table, cols, params);
        report.table = std::move(r.table);
        report.em_converged = report.em_converged && r.converged;
        for (auto& w : r.warnings) report.warnings.push_back(std::move(w));
    }
    return report;
}

}  // namespace cqabench
