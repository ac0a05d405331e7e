#include "estimators.hpp"

#include "cqabench/error.hpp"
#include "cqabench/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cqabench::detail {

namespace {

std::size_t fraction_count(double frac, std::size_t n, std::size_t floor_at) {
    return std::max(floor_at, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9)));
}

double oob_metric(const Eigen::VectorXd& y, const Eigen::VectorXd& sum, const Eigen::VectorXd& count, Task task) {
    double ss_res = 0.0, ss_tot = 0.0, correct = 0.0, m = 0.0, seen = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (count(i) > 0) m += y(i), seen += 1.0;
    if (seen == 0.0) return std::nan("");
    m /= seen;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (count(i) == 0) continue;
        const double pred = sum(i) / count(i);
        ss_res += (y(i) - pred) * (y(i) - pred);
        ss_tot += (y(i) - m) * (y(i) - m);
        correct += ((pred >= 0.5) == (y(i) > 0.5)) ? 1.0 : 0.0;
    }
    if (task == Task::Classification) return correct / seen;
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::nan("");
}

// Average of regression trees; for classification the leaves hold class-1
// fractions, so the average is a probability.
class ForestEstimator final : public Estimator {
public:
    ForestEstimator(std::vector<Tree> trees, double oob) : trees_(std::move(trees)), oob_(oob) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
        for (const auto& t : trees_) out += t.predict(X);
        return out / static_cast<double>(trees_.size());
    }

    nlohmann::json save() const override {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : trees_) trees.push_back(t.save());
        nlohmann::json j = {{"kind", "forest"}, {"trees", trees}};
        if (std::isfinite(oob_)) j["oob_score"] = oob_;
        return j;
    }

private:
    std::vector<Tree> trees_;
    double oob_;
};

TreeParams tree_params(const FitContext& ctx, std::size_t n, std::size_t p, double total_weight) {
    TreeParams tp;
    tp.max_depth = static_cast<int>(ctx.integer("max_depth"));
    tp.min_samples_split = fraction_count(ctx.real("min_samples_split"), n, 2);
    tp.min_samples_leaf = fraction_count(ctx.real("min_samples_leaf"), n, 1);
    tp.max_features = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(ctx.real("max_features") * static_cast<double>(p) + 1e-9)));
    if (ctx.params.contains("min_weight_fraction_leaf"))
        tp.min_child_weight = ctx.real("min_weight_fraction_leaf") * total_weight;
    return tp;
}

}  // namespace

EstimatorPtr fit_decision_tree(const FitContext& ctx) {
    const auto n = static_cast<std::size_t>(ctx.X.rows());
    const auto p = static_cast<std::size_t>(ctx.X.cols());
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(ctx.X.rows());
    Tree t;
    t.fit(ctx.X, ctx.y, w, tree_params(ctx, n, p, static_cast<double>(n)), ctx.rng);
    std::vector<Tree> trees{std::move(t)};
    return std::make_unique<ForestEstimator>(std::move(trees), std::nan(""));
}

EstimatorPtr fit_random_forest(const FitContext& ctx) {
    const auto n = static_cast<std::size_t>(ctx.X.rows());
    const auto p = static_cast<std::size_t>(ctx.X.cols());
    const auto n_trees = ctx.integer("n_estimators");
    const std::size_t draws = fraction_count(ctx.real("max_samples"), n, 1);
    const bool oob = ctx.flag("oob_score");
    const Presorted order = presort(ctx.X);
    std::vector<Tree> trees;
    Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(ctx.X.rows()), oob_count = oob_sum;
    for (std::int64_t m = 0; m < n_trees; ++m) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(ctx.X.rows());
        for (std::size_t d = 0; d < draws; ++d) w(static_cast<Eigen::Index>(ctx.rng.index(n))) += 1.0;
        Tree t;
        t.fit(ctx.X, order, ctx.y.cwiseProduct(w), w, tree_params(ctx, draws, p, static_cast<double>(draws)), ctx.rng);
        if (oob)
            for (Eigen::Index i = 0; i < ctx.X.rows(); ++i)
                if (w(i) == 0.0) oob_sum(i) += t.predict_row(ctx.X, i), oob_count(i) += 1.0;
        trees.push_back(std::move(t));
    }
    const double score = oob ? oob_metric(ctx.y, oob_sum, oob_count, ctx.task) : std::nan("");
    return std::make_unique<ForestEstimator>(std::move(trees), score);
}

EstimatorPtr fit_bagging(const FitContext& ctx) {
    const auto n = static_cast<std::size_t>(ctx.X.rows());
    const auto p = static_cast<std::size_t>(ctx.X.cols());
    const auto n_est = ctx.integer("n_estimators");
    const std::size_t rows = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(ctx.real("max_samples") * static_cast<double>(n) + 1e-9)));
    const std::size_t feats = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(ctx.real("max_features") * static_cast<double>(p) + 1e-9)));
    const bool bootstrap = ctx.flag("bootstrap");
    const bool bootstrap_features = ctx.flag("bootstrap_features");
    const bool oob = ctx.flag("oob_score") && bootstrap;
    const TreeParams tp;  // fully grown trees

    std::vector<std::size_t> pool_rows(n), pool_cols(p);
    std::vector<Tree> trees;
    Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(ctx.X.rows()), oob_count = oob_sum;
    const Presorted full_order = feats == p && !bootstrap_features ? presort(ctx.X) : Presorted{};
    for (std::int64_t m = 0; m < n_est; ++m) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(ctx.X.rows());
        if (bootstrap) {
            for (std::size_t d = 0; d < rows; ++d) w(static_cast<Eigen::Index>(ctx.rng.index(n))) += 1.0;
        } else {
            std::iota(pool_rows.begin(), pool_rows.end(), 0);
            for (std::size_t k = 0; k < std::min(rows, n); ++k) {
                std::swap(pool_rows[k], pool_rows[k + ctx.rng.index(n - k)]);
                w(static_cast<Eigen::Index>(pool_rows[k])) = 1.0;
            }
        }
        std::vector<std::size_t> cols;
        if (bootstrap_features) {
            std::vector<char> used(p, 0);
            for (std::size_t d = 0; d < feats; ++d) used[ctx.rng.index(p)] = 1;
            for (std::size_t c = 0; c < p; ++c)
                if (used[c]) cols.push_back(c);
        } else {
            std::iota(pool_cols.begin(), pool_cols.end(), 0);
            for (std::size_t k = 0; k < feats; ++k) std::swap(pool_cols[k], pool_cols[k + ctx.rng.index(p - k)]);
            cols.assign(pool_cols.begin(), pool_cols.begin() + static_cast<std::ptrdiff_t>(feats));
            std::sort(cols.begin(), cols.end());
        }

        Tree t;
        if (!full_order.empty()) {
            t.fit(ctx.X, full_order, ctx.y.cwiseProduct(w), w, tp, ctx.rng);
        } else {
            Eigen::MatrixXd sub(ctx.X.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c)
                sub.col(static_cast<Eigen::Index>(c)) = ctx.X.col(static_cast<Eigen::Index>(cols[c]));
            t.fit(sub, ctx.y.cwiseProduct(w), w, tp, ctx.rng);
            t.remap_features(cols);
        }
        if (oob)
            for (Eigen::Index i = 0; i < ctx.X.rows(); ++i)
                if (w(i) == 0.0) oob_sum(i) += t.predict_row(ctx.X, i), oob_count(i) += 1.0;
        trees.push_back(std::move(t));
    }
    const double score = oob ? oob_metric(ctx.y, oob_sum, oob_count, ctx.task) : std::nan("");
    return std::make_unique<ForestEstimator>(std::move(trees), score);
}

EstimatorPtr load_forest(const nlohmann::json& j) {
    std::vector<Tree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(Tree::load(t));
    if (trees.empty()) throw ModelError("serialized forest has no trees");
    return std::make_unique<ForestEstimator>(std::move(trees), j.value("oob_score", std::nan("")));
}

namespace {

class AdaBoostEstimator final : public Estimator {
public:
    AdaBoostEstimator(std::vector<Tree> trees, std::vector<double> weights, bool classify)
        : trees_(std::move(trees)), weights_(std::move(weights)), classify_(classify) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        const auto m = trees_.size();
        Eigen::MatrixXd preds(X.rows(), static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < m; ++k) preds.col(static_cast<Eigen::Index>(k)) = trees_[k].predict(X);
        const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
        Eigen::VectorXd out(X.rows());
        if (classify_) {
            for (Eigen::Index r = 0; r < X.rows(); ++r) {
                double f = 0.0;
                for (std::size_t k = 0; k < m; ++k)
                    f += weights_[k] * (preds(r, static_cast<Eigen::Index>(k)) >= 0.5 ? 1.0 : -1.0);
                out(r) = total > 0.0 ? 0.5 * (f / total + 1.0) : 0.5;
            }
            return out;
        }
        std::vector<std::size_t> idx(m);
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                const double pa = preds(r, static_cast<Eigen::Index>(a)), pb = preds(r, static_cast<Eigen::Index>(b));
                return pa < pb || (pa == pb && a < b);
            });
            double acc = 0.0;
            std::size_t pick = idx.back();
            for (auto k : idx) {
                acc += weights_[k];
                if (acc >= 0.5 * total) {
                    pick = k;
                    break;
                }
            }
            out(r) = preds(r, static_cast<Eigen::Index>(pick));
        }
        return out;
    }

    nlohmann::json save() const override {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : trees_) trees.push_back(t.save());
        return {{"kind", "adaboost"}, {"trees", trees}, {"weights", weights_}, {"classify", classify_}};
    }

private:
    std::vector<Tree> trees_;
    std::vector<double> weights_;
    bool classify_;
};

}  // namespace

// R2 (linear loss, weighted resampling) for regression, SAMME with stumps for
// classification.
EstimatorPtr fit_adaboost(const FitContext& ctx) {
    const auto n = ctx.X.rows();
    const auto n_est = ctx.integer("n_estimators");
    const double lr = ctx.real("learning_rate");
    const bool classify = ctx.task == Task::Classification;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const Presorted order = presort(ctx.X);
    TreeParams tp;
    tp.max_depth = classify ? 1 : 3;

    std::vector<Tree> trees;
    std::vector<double> weights;
    for (std::int64_t m = 0; m < n_est; ++m) {
        Tree t;
        Eigen::VectorXd pred;
        if (classify) {
            t.fit(ctx.X, order, ctx.y.cwiseProduct(w), w, tp, ctx.rng);
            pred = t.predict(ctx.X);
            double err = 0.0;
            Eigen::VectorXd wrong(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                wrong(i) = ((pred(i) >= 0.5) != (ctx.y(i) > 0.5)) ? 1.0 : 0.0;
                err += w(i) * wrong(i);
            }
            err /= w.sum();
            if (err <= 0.0) {
                trees.push_back(std::move(t));
                weights.push_back(1.0);
                break;
            }
            if (err >= 0.5) {
                if (trees.empty()) {
                    trees.push_back(std::move(t));
                    weights.push_back(1.0);
                }
                break;
            }
            const double alpha = lr * std::log((1.0 - err) / err);
            for (Eigen::Index i = 0; i < n; ++i)
                if (wrong(i) > 0) w(i) *= std::exp(alpha);
            w /= w.sum();
            trees.push_back(std::move(t));
            weights.push_back(alpha);
            continue;
        }

        // Weighted bootstrap sample, expressed as per-row counts.
        Eigen::VectorXd cdf(n);
        std::partial_sum(w.data(), w.data() + n, cdf.data());
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
        for (Eigen::Index d = 0; d < n; ++d) {
            const double u = ctx.rng.uniform() * cdf(n - 1);
            const auto it = std::upper_bound(cdf.data(), cdf.data() + n, u);
            counts(std::min<Eigen::Index>(it - cdf.data(), n - 1)) += 1.0;
        }
        t.fit(ctx.X, order, ctx.y.cwiseProduct(counts), counts, tp, ctx.rng);
        pred = t.predict(ctx.X);
        const Eigen::VectorXd err = (pred - ctx.y).cwiseAbs();
        const double max_err = err.maxCoeff();
        if (max_err <= 0.0) {
            trees.push_back(std::move(t));
            weights.push_back(1.0);
            break;
        }
        const Eigen::VectorXd loss = err / max_err;
        const double est_err = w.dot(loss) / w.sum();
        if (est_err <= 0.0) {
            trees.push_back(std::move(t));
            weights.push_back(1.0);
            break;
        }
        if (est_err >= 0.5) {
            if (trees.empty()) {
                trees.push_back(std::move(t));
                weights.push_back(1.0);
            }
            break;
        }
        const double beta = est_err / (1.0 - est_err);
        const double est_weight = lr * std::log(1.0 / beta);
        for (Eigen::Index i = 0; i < n; ++i) w(i) *= std::pow(beta, (1.0 - loss(i)) * lr);
        w /= w.sum();
        trees.push_back(std::move(t));
        weights.push_back(est_weight);
    }
    return std::make_unique<AdaBoostEstimator>(std::move(trees), std::move(weights), classify);
}

EstimatorPtr load_adaboost(const nlohmann::json& j) {
    std::vector<Tree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(Tree::load(t));
    auto weights = j.at("weights").get<std::vector<double>>();
    if (trees.empty() || weights.size() != trees.size()) throw ModelError("malformed serialized AdaBoost model");
    return std::make_unique<AdaBoostEstimator>(std::move(trees), std::move(weights), j.at("classify").get<bool>());
}

namespace {

class BoostingEstimator final : public Estimator {
public:
    BoostingEstimator(double base, bool logistic, std::vector<Tree> trees, Eigen::VectorXd linear, double bias)
        : base_(base), logistic_(logistic), trees_(std::move(trees)), linear_(std::move(linear)), bias_(bias) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd m = Eigen::VectorXd::Constant(X.rows(), base_ + bias_);
        if (linear_.size() > 0) m += X * linear_;
        for (const auto& t : trees_) m += t.predict(X);
        if (logistic_)
            for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = sigmoid(m(i));
        return m;
    }

    nlohmann::json save() const override {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : trees_) trees.push_back(t.save());
        return {{"kind", "boosting"},
                {"base", base_},
                {"bias", bias_},
                {"link", logistic_ ? "logistic" : "identity"},
                {"trees", trees},
                {"linear", vector_to_json(linear_)}};
    }

private:
    double base_;
    bool logistic_;
    std::vector<Tree> trees_;
    Eigen::VectorXd linear_;
    double bias_;
};

double coordinate_delta(double sum_grad, double sum_hess, double w, double alpha, double lambda) {
    if (sum_hess < 1e-5) return 0.0;
    const double sum_grad_l2 = sum_grad + lambda * w;
    const double sum_hess_l2 = sum_hess + lambda;
    const double tmp = w - sum_grad_l2 / sum_hess_l2;
    if (tmp >= 0.0) return std::max(-(sum_grad_l2 + alpha) / sum_hess_l2, -w);
    return std::min(-(sum_grad_l2 - alpha) / sum_hess_l2, -w);
}

}  // namespace

// Second-order gradient boosting with L1/L2-regularised leaves (gbtree) or
// coordinate-descent linear boosting (gblinear).
EstimatorPtr fit_xgboost(const FitContext& ctx) {
    const bool classify = ctx.task == Task::Classification;
    const std::string& booster = ctx.choice("booster");
    const auto rounds = ctx.integer("n_estimators");
    const double eta = ctx.real("learning_rate");
    const double alpha = ctx.real("reg_alpha");
    const double lambda = ctx.real("reg_lambda");
    const double subsample = ctx.real("subsample");
    const Eigen::Index n = ctx.X.rows(), p = ctx.X.cols();

    double base;
    if (classify) {
        const double m = std::clamp(ctx.y.mean(), 1e-6, 1.0 - 1e-6);
        base = std::log(m / (1.0 - m));
    } else {
        base = ctx.y.mean();
    }
    Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, base);
    Eigen::VectorXd g(n), h(n);
    auto gradients = [&] {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (classify) {
                const double pr = sigmoid(margin(i));
                g(i) = pr - ctx.y(i);
                h(i) = std::max(pr * (1.0 - pr), 1e-16);
            } else {
                g(i) = margin(i) - ctx.y(i);
                h(i) = 1.0;
            }
        }
    };

    std::vector<Tree> trees;
    Eigen::VectorXd linear;
    double bias = 0.0;
    if (booster == "gbtree") {
        const Presorted order = presort(ctx.X);
        TreeParams tp;
        tp.max_depth = static_cast<int>(ctx.integer("max_depth"));
        tp.min_child_weight = 1.0;
        tp.lambda = lambda;
        tp.alpha = alpha;
        for (std::int64_t r = 0; r < rounds; ++r) {
            gradients();
            Eigen::VectorXd a = -g, b = h;
            if (subsample < 1.0)
                for (Eigen::Index i = 0; i < n; ++i)
                    if (!ctx.rng.bernoulli(subsample)) b(i) = 0.0;
            if ((b.array() > 0.0).count() == 0) continue;
            Tree t;
            t.fit(ctx.X, order, a, b, tp, ctx.rng);
            t.scale_values(eta);
            margin += t.predict(ctx.X);
            if (!margin.allFinite()) throw NonConvergenceError("gradient boosting diverged");
            trees.push_back(std::move(t));
        }
    } else if (booster == "gblinear") {
        linear = Eigen::VectorXd::Zero(p);
        const double wsum = static_cast<double>(n);
        for (std::int64_t r = 0; r < rounds; ++r) {
            gradients();
            const double db = -g.sum() / h.sum() * eta;
            bias += db;
            g += h * db;
            margin.array() += db;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double sg = g.dot(ctx.X.col(j));
                const double sh = h.dot(ctx.X.col(j).cwiseAbs2());
                const double dw = eta * coordinate_delta(sg, sh, linear(j), alpha * wsum, lambda * wsum);
                if (dw == 0.0) continue;
                linear(j) += dw;
                g += h.cwiseProduct(ctx.X.col(j)) * dw;
                margin += ctx.X.col(j) * dw;
            }
            if (!linear.allFinite()) throw NonConvergenceError("linear boosting diverged");
        }
    } else {
        throw ConfigError("unknown booster '" + booster + "'");
    }
    return std::make_unique<BoostingEstimator>(base, classify, std::move(trees), std::move(linear), bias);
}

EstimatorPtr load_boosting(const nlohmann::json& j) {
    std::vector<Tree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(Tree::load(t));
    return std::make_unique<BoostingEstimator>(j.at("base").get<double>(), j.at("link").get<std::string>() == "logistic",
                                               std::move(trees), vector_from_json(j.at("linear")),
                                               j.at("bias").get<double>());
}

}  // namespace cqabench::detail
