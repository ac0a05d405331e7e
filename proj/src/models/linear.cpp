#include "estimators.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cqabench::detail {

namespace {

class LinearEstimator final : public Estimator {
public:
    LinearEstimator(Eigen::VectorXd coef, double intercept, bool logistic)
        : coef_(std::move(coef)), intercept_(intercept), logistic_(logistic) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd z = (X * coef_).array() + intercept_;
        if (logistic_)
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
        return z;
    }

    nlohmann::json save() const override {
        return {{"kind", "linear"},
                {"coef", vector_to_json(coef_)},
                {"intercept", intercept_},
                {"link", logistic_ ? "logistic" : "identity"}};
    }

private:
    Eigen::VectorXd coef_;
    double intercept_;
    bool logistic_;
};

EstimatorPtr make_linear(Eigen::VectorXd coef, double intercept, bool logistic) {
    require_finite(coef, "linear coefficients");
    if (!std::isfinite(intercept)) throw NonConvergenceError("linear model produced a non-finite intercept");
    return std::make_unique<LinearEstimator>(std::move(coef), intercept, logistic);
}

struct Centered {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::RowVectorXd x_mean;
    double y_mean;
};

Centered center(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Centered c;
    c.x_mean = X.colwise().mean();
    c.y_mean = y.mean();
    c.X = X.rowwise() - c.x_mean;
    c.y = y.array() - c.y_mean;
    return c;
}

double intercept_for(const Centered& c, const Eigen::VectorXd& coef) { return c.y_mean - c.x_mean.dot(coef); }

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Coordinate descent for 1/(2n)|y - Xw|^2 + a*l1*|w|_1 + a*(1-l1)/2*|w|^2 on
// centred data.
Eigen::VectorXd elastic_net_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha, double l1_ratio,
                               std::int64_t max_iter, double tol) {
    const auto n = static_cast<double>(X.rows());
    const Eigen::Index p = X.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    Eigen::VectorXd norms = X.colwise().squaredNorm().transpose();
    const double l1 = alpha * l1_ratio * n;
    const double l2 = alpha * (1.0 - l1_ratio) * n;
    for (std::int64_t it = 0; it < max_iter; ++it) {
        double max_change = 0.0, max_w = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (norms(j) == 0.0) continue;
            const double old = w(j);
            const double rho = X.col(j).dot(r) + norms(j) * old;
            w(j) = soft_threshold(rho, l1) / (norms(j) + l2);
            const double d = w(j) - old;
            if (d != 0.0) r.noalias() -= d * X.col(j);
            max_change = std::max(max_change, std::abs(d));
            max_w = std::max(max_w, std::abs(w(j)));
        }
        if (max_w == 0.0 || max_change / max_w < tol) break;
    }
    return w;
}

}  // namespace

EstimatorPtr fit_ols(const FitContext& ctx) {
    const bool intercept = ctx.flag("fit_intercept");
    if (!intercept) {
        Eigen::VectorXd w = ctx.X.completeOrthogonalDecomposition().solve(ctx.y);
        return make_linear(std::move(w), 0.0, false);
    }
    const Centered c = center(ctx.X, ctx.y);
    Eigen::VectorXd w = c.X.completeOrthogonalDecomposition().solve(c.y);
    const double b = intercept_for(c, w);
    return make_linear(std::move(w), b, false);
}

EstimatorPtr fit_elastic_net(const FitContext& ctx) {
    const Centered c = center(ctx.X, ctx.y);
    Eigen::VectorXd w =
        elastic_net_cd(c.X, c.y, ctx.real("alpha"), ctx.real("l1_ratio"), ctx.integer("max_iter"), 1e-6);
    const double b = intercept_for(c, w);
    return make_linear(std::move(w), b, false);
}

// LARS homotopy with the lasso modification, stopped where the equicorrelation
// level reaches n * alpha. Matches 1/(2n)|y - Xw|^2 + alpha*|w|_1.
EstimatorPtr fit_lasso_lars(const FitContext& ctx) {
    const Centered cen = center(ctx.X, ctx.y);
    const Eigen::MatrixXd& X = cen.X;
    const Eigen::Index p = X.cols();
    const double n = static_cast<double>(X.rows());
    const double target = n * ctx.real("alpha");
    const std::int64_t max_iter = ctx.integer("max_iter");

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    std::vector<Eigen::Index> active;
    std::vector<char> in_active(static_cast<std::size_t>(p), 0);
    Eigen::Index just_dropped = -1;
    const Eigen::MatrixXd gram = X.transpose() * X;
    const Eigen::VectorXd xty = X.transpose() * cen.y;

    for (std::int64_t step = 0; step < max_iter; ++step) {
        const Eigen::VectorXd corr = xty - gram * w;
        double C = 0.0;
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (in_active[static_cast<std::size_t>(j)] || j == just_dropped) continue;
            if (std::abs(corr(j)) > C) {
                C = std::abs(corr(j));
                best = j;
            }
        }
        for (auto j : active) C = std::max(C, std::abs(corr(j)));
        if (C <= target || C < 1e-12) break;
        if (best >= 0 && (active.empty() || std::abs(corr(best)) >= C * (1.0 - 1e-10))) {
            active.push_back(best);
            in_active[static_cast<std::size_t>(best)] = 1;
        }
        just_dropped = -1;
        if (active.empty()) break;

        const auto k = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd GA(k, k);
        Eigen::VectorXd s(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            s(a) = corr(active[static_cast<std::size_t>(a)]) >= 0.0 ? 1.0 : -1.0;
            for (Eigen::Index b = 0; b < k; ++b)
                GA(a, b) = gram(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
        }
        GA.diagonal().array() += 1e-12 * std::max(1.0, GA.diagonal().mean());
        const Eigen::VectorXd d = GA.ldlt().solve(s);
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(p);
        for (Eigen::Index a = 0; a < k; ++a) dir(active[static_cast<std::size_t>(a)]) = d(a);
        const Eigen::VectorXd agram = gram * dir;

        double gamma = C - target;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (in_active[static_cast<std::size_t>(j)]) continue;
            for (double g : {(C - corr(j)) / (1.0 - agram(j)), (C + corr(j)) / (1.0 + agram(j))})
                if (g > 1e-14 && g < gamma) gamma = g;
        }
        Eigen::Index drop = -1;
        for (Eigen::Index a = 0; a < k; ++a) {
            const auto j = active[static_cast<std::size_t>(a)];
            if (dir(j) == 0.0) continue;
            const double g = -w(j) / dir(j);
            if (g > 1e-14 && g < gamma) {
                gamma = g;
                drop = j;
            }
        }
        w += gamma * dir;
        if (drop >= 0) {
            w(drop) = 0.0;
            in_active[static_cast<std::size_t>(drop)] = 0;
            active.erase(std::find(active.begin(), active.end(), drop));
            just_dropped = drop;
        }
    }
    const double b = intercept_for(cen, w);
    return make_linear(std::move(w), b, false);
}

EstimatorPtr fit_sgd(const FitContext& ctx) {
    const double alpha = ctx.real("alpha");
    const double l1_ratio = ctx.real("l1_ratio");
    const std::int64_t epochs = ctx.integer("max_iter");
    const double eta0 = ctx.real("eta0");
    const bool classify = ctx.task == Task::Classification;
    const Eigen::Index n = ctx.X.rows();
    const Eigen::Index p = ctx.X.cols();

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    double b = 0.0;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    double best_loss = std::numeric_limits<double>::infinity();
    int no_improve = 0;
    double t = 1.0;
    for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
        ctx.rng.shuffle(order);
        double loss = 0.0;
        for (auto i : order) {
            const double eta = eta0 / std::pow(t, 0.25);
            const double z = ctx.X.row(i).dot(w) + b;
            double g;
            if (classify) {
                const double pr = sigmoid(z);
                g = pr - ctx.y(i);
                loss += z > 0 ? std::log1p(std::exp(-z)) + (1.0 - ctx.y(i)) * z
                              : std::log1p(std::exp(z)) - ctx.y(i) * z;
            } else {
                g = z - ctx.y(i);
                loss += 0.5 * g * g;
            }
            w *= 1.0 - eta * alpha * (1.0 - l1_ratio);
            w.noalias() -= eta * g * ctx.X.row(i).transpose();
            b -= eta * g;
            if (l1_ratio > 0.0) {
                const double thr = eta * alpha * l1_ratio;
                for (Eigen::Index j = 0; j < p; ++j) w(j) = soft_threshold(w(j), thr);
            }
            t += 1.0;
        }
        if (!std::isfinite(loss) || !w.allFinite() || !std::isfinite(b))
            throw NonConvergenceError("stochastic gradient descent diverged");
        loss /= static_cast<double>(n);
        if (loss > best_loss - 1e-3) {
            if (++no_improve >= 5) break;
        } else {
            no_improve = 0;
        }
        best_loss = std::min(best_loss, loss);
    }
    return make_linear(std::move(w), b, classify);
}

EstimatorPtr fit_bayesian_ridge(const FitContext& ctx) {
    const Centered c = center(ctx.X, ctx.y);
    const double n = static_cast<double>(c.X.rows());
    const double a1 = ctx.real("alpha_1"), a2 = ctx.real("alpha_2");
    const double l1 = ctx.real("lambda_1"), l2 = ctx.real("lambda_2");
    const std::int64_t max_iter = ctx.integer("max_iter");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd S = svd.singularValues();
    const Eigen::VectorXd eig = S.array().square();
    const Eigen::VectorXd uty = svd.matrixU().transpose() * c.y;
    double var_y = c.y.squaredNorm() / n;
    double alpha = 1.0 / (var_y + std::numeric_limits<double>::epsilon());
    double lambda = 1.0;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(c.X.cols());
    for (std::int64_t it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd shrink = (S.array() / (eig.array() + lambda / alpha)).matrix();
        Eigen::VectorXd next = svd.matrixV() * shrink.cwiseProduct(uty);
        const double rss = (c.y - c.X * next).squaredNorm();
        const double gamma = (alpha * eig.array() / (lambda + alpha * eig.array())).sum();
        lambda = (gamma + 2.0 * l1) / (next.squaredNorm() + 2.0 * l2);
        alpha = (n - gamma + 2.0 * a1) / (rss + 2.0 * a2);
        const double change = (coef - next).cwiseAbs().sum();
        coef = std::move(next);
        if (it > 0 && change < 1e-3) break;
    }
    const Eigen::VectorXd shrink = (S.array() / (eig.array() + lambda / alpha)).matrix();
    coef = svd.matrixV() * shrink.cwiseProduct(uty);
    const double b = intercept_for(c, coef);
    return make_linear(std::move(coef), b, false);
}

EstimatorPtr fit_ard(const FitContext& ctx) {
    const Centered c = center(ctx.X, ctx.y);
    const Eigen::Index p = c.X.cols();
    const double n = static_cast<double>(c.X.rows());
    const double a1 = ctx.real("alpha_1"), a2 = ctx.real("alpha_2");
    const double l1 = ctx.real("lambda_1"), l2 = ctx.real("lambda_2");
    const double threshold = ctx.real("threshold_lambda");
    const std::int64_t max_iter = ctx.integer("max_iter");

    const Eigen::MatrixXd gram = c.X.transpose() * c.X;
    const Eigen::VectorXd xty = c.X.transpose() * c.y;
    double alpha = 1.0 / (c.y.squaredNorm() / n + std::numeric_limits<double>::epsilon());
    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(p);
    std::vector<char> keep(static_cast<std::size_t>(p), 1);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);

    auto solve = [&](Eigen::VectorXd& out, Eigen::VectorXd& sigma_diag) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < p; ++j)
            if (keep[static_cast<std::size_t>(j)]) idx.push_back(j);
        out = Eigen::VectorXd::Zero(p);
        sigma_diag = Eigen::VectorXd::Zero(p);
        if (idx.empty()) return;
        const auto k = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd A(k, k);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            rhs(a) = alpha * xty(idx[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < k; ++b)
                A(a, b) = alpha * gram(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            A(a, a) += lambda(idx[static_cast<std::size_t>(a)]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        const Eigen::MatrixXd sigma = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
        const Eigen::VectorXd sol = sigma * rhs;
        for (Eigen::Index a = 0; a < k; ++a) {
            out(idx[static_cast<std::size_t>(a)]) = sol(a);
            sigma_diag(idx[static_cast<std::size_t>(a)]) = sigma(a, a);
        }
    };

    Eigen::VectorXd sigma_diag;
    for (std::int64_t it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next;
        solve(next, sigma_diag);
        const double rss = (c.y - c.X * next).squaredNorm();
        double gamma_sum = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!keep[static_cast<std::size_t>(j)]) continue;
            const double g = 1.0 - lambda(j) * sigma_diag(j);
            gamma_sum += g;
            lambda(j) = (g + 2.0 * l1) / (next(j) * next(j) + 2.0 * l2);
        }
        alpha = (n - gamma_sum + 2.0 * a1) / (rss + 2.0 * a2);
        for (Eigen::Index j = 0; j < p; ++j)
            if (lambda(j) >= threshold) {
                keep[static_cast<std::size_t>(j)] = 0;
                next(j) = 0.0;
            }
        const double change = (coef - next).cwiseAbs().sum();
        coef = std::move(next);
        if (it > 0 && change < 1e-3) break;
    }
    solve(coef, sigma_diag);
    const double b = intercept_for(c, coef);
    return make_linear(std::move(coef), b, false);
}

// Minimises sum(sigma + H_eps(r/sigma) * sigma) + alpha*|w|^2 by alternating a
// weighted ridge solve for (w, b) with the stationarity equation for sigma.
EstimatorPtr fit_huber(const FitContext& ctx) {
    const double eps = ctx.real("epsilon");
    const double alpha = ctx.real("alpha");
    const std::int64_t max_iter = ctx.integer("max_iter");
    const Eigen::MatrixXd& X = ctx.X;
    const Eigen::VectorXd& y = ctx.y;
    const Eigen::Index n = X.rows(), p = X.cols();

    Eigen::MatrixXd Xa(n, p + 1);
    Xa.leftCols(p) = X;
    Xa.col(p).setOnes();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    {
        Eigen::VectorXd med = y;
        std::nth_element(med.data(), med.data() + n / 2, med.data() + n);
        beta(p) = med(n / 2);
    }
    Eigen::VectorXd r = y - Xa * beta;
    double sigma = std::max(r.cwiseAbs().mean(), 1e-12);

    auto solve_sigma = [&](const Eigen::VectorXd& res) {
        // sum(min((r/s)^2, eps^2)) = n, decreasing in s.
        const double nn = static_cast<double>(n);
        auto f = [&](double s) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += std::min(res(i) * res(i) / (s * s), eps * eps);
            return acc - nn;
        };
        double hi = std::max(res.cwiseAbs().maxCoeff(), 1e-12) * 2.0 + 1e-12;
        double lo = hi * 1e-12;
        if (f(lo) <= 0.0) return lo;
        for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-12; ++it) {
            const double mid = std::sqrt(lo * hi);
            (f(mid) > 0.0 ? lo : hi) = mid;
        }
        return std::sqrt(lo * hi);
    };

    for (std::int64_t it = 0; it < max_iter; ++it) {
        Eigen::VectorXd omega(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = std::abs(r(i)) / sigma;
            omega(i) = z <= eps ? 1.0 : eps / z;
        }
        Eigen::MatrixXd A = Xa.transpose() * omega.asDiagonal() * Xa;
        for (Eigen::Index j = 0; j < p; ++j) A(j, j) += sigma * alpha;
        A.diagonal().array() += 1e-12 * std::max(1.0, A.diagonal().cwiseAbs().mean());
        const Eigen::VectorXd rhs = Xa.transpose() * omega.cwiseProduct(y);
        const Eigen::VectorXd next = A.ldlt().solve(rhs);
        if (!next.allFinite()) throw NonConvergenceError("Huber regression produced non-finite coefficients");
        r = y - Xa * next;
        const double next_sigma = solve_sigma(r);
        const double change = (next - beta).cwiseAbs().maxCoeff() / std::max(1.0, next.cwiseAbs().maxCoeff());
        beta = next;
        const double sigma_change = std::abs(next_sigma - sigma) / std::max(sigma, 1e-300);
        sigma = next_sigma;
        if (change < 1e-8 && sigma_change < 1e-8) break;
    }
    return make_linear(beta.head(p), beta(p), false);
}

// Spatial median of least-squares fits on (p+1)-row subsets.
EstimatorPtr fit_theil_sen(const FitContext& ctx) {
    const Eigen::MatrixXd& X = ctx.X;
    const Eigen::Index n = X.rows(), p = X.cols();
    const Eigen::Index m = p + 1;
    if (n < m) throw ModelError("Theil-Sen needs more rows than columns");
    const auto max_sub = ctx.integer("max_subpopulation");
    const auto max_iter = ctx.integer("max_iter");

    // Number of subsets, capped so the binomial never overflows.
    double combos = 1.0;
    for (Eigen::Index k = 0; k < m && combos <= static_cast<double>(max_sub); ++k)
        combos *= static_cast<double>(n - k) / static_cast<double>(k + 1);
    std::vector<std::vector<Eigen::Index>> subsets;
    if (combos <= static_cast<double>(max_sub)) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            subsets.push_back(idx);
            Eigen::Index k = m - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - m + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (Eigen::Index j = k + 1; j < m; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    } else {
        std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
        std::iota(pool.begin(), pool.end(), 0);
        for (std::int64_t s = 0; s < max_sub; ++s) {
            for (Eigen::Index k = 0; k < m; ++k) {
                const auto j = static_cast<std::size_t>(k) + ctx.rng.index(static_cast<std::size_t>(n - k));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            }
            subsets.emplace_back(pool.begin(), pool.begin() + m);
        }
    }

    Eigen::MatrixXd sols(m, static_cast<Eigen::Index>(subsets.size()));
    Eigen::MatrixXd A(m, m);
    Eigen::VectorXd rhs(m);
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto r = subsets[s][static_cast<std::size_t>(k)];
            A(k, 0) = 1.0;
            A.row(k).tail(p) = X.row(r);
            rhs(k) = ctx.y(r);
        }
        sols.col(static_cast<Eigen::Index>(s)) = A.completeOrthogonalDecomposition().solve(rhs);
    }

    // Modified Weiszfeld iteration (handles iterates that hit a data point).
    Eigen::VectorXd med = sols.rowwise().mean();
    for (std::int64_t it = 0; it < max_iter; ++it) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(m);
        double den = 0.0;
        int coincide = 0;
        for (Eigen::Index s = 0; s < sols.cols(); ++s) {
            const double d = (sols.col(s) - med).norm();
            if (d < 1e-12) {
                ++coincide;
                continue;
            }
            num += sols.col(s) / d;
            den += 1.0 / d;
        }
        if (den == 0.0) break;
        Eigen::VectorXd next = num / den;
        if (coincide > 0) {
            const Eigen::VectorXd R = (num - den * med);
            const double rn = R.norm();
            const double eta = coincide / std::max(rn, 1e-300);
            const double keep = std::max(0.0, 1.0 - eta);
            next = keep * next + std::min(1.0, eta) * med;
        }
        const double change = (next - med).norm();
        med = next;
        if (change < 1e-6 * std::max(1.0, med.norm())) break;
    }
    return make_linear(med.tail(p), med(0), false);
}

EstimatorPtr fit_logistic(const FitContext& ctx) {
    const double C = ctx.real("C");
    const std::int64_t max_iter = ctx.integer("max_iter");
    const Eigen::MatrixXd& X = ctx.X;
    const Eigen::Index n = X.rows(), p = X.cols();
    Eigen::MatrixXd Xa(n, p + 1);
    Xa.leftCols(p) = X;
    Xa.col(p).setOnes();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);

    auto objective = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd z = Xa * b;
        double loss = 0.5 * b.head(p).squaredNorm();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double zi = z(i);
            const double l = zi > 0 ? std::log1p(std::exp(-zi)) + (1.0 - ctx.y(i)) * zi
                                    : std::log1p(std::exp(zi)) - ctx.y(i) * zi;
            loss += C * l;
        }
        return loss;
    };

    double f = objective(beta);
    for (std::int64_t it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd z = Xa * beta;
        Eigen::VectorXd pr(n), wts(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            pr(i) = sigmoid(z(i));
            wts(i) = C * std::max(pr(i) * (1.0 - pr(i)), 1e-12);
        }
        Eigen::VectorXd grad = C * Xa.transpose() * (pr - ctx.y);
        grad.head(p) += beta.head(p);
        if (grad.cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, C * static_cast<double>(n))) break;
        Eigen::MatrixXd H = Xa.transpose() * wts.asDiagonal() * Xa;
        H.diagonal().head(p).array() += 1.0;
        H.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = H.ldlt().solve(grad);
        double t = 1.0;
        Eigen::VectorXd next = beta - step;
        double fn = objective(next);
        const double slope = grad.dot(step);
        while (!(fn <= f - 1e-4 * t * slope) && t > 1e-10) {
            t *= 0.5;
            next = beta - t * step;
            fn = objective(next);
        }
        if (!(fn <= f)) break;
        const double improvement = f - fn;
        beta = next;
        f = fn;
        if (improvement < 1e-12 * std::max(1.0, std::abs(f))) break;
    }
    return make_linear(beta.head(p), beta(p), true);
}

EstimatorPtr fit_ridge_classifier(const FitContext& ctx) {
    const double alpha = ctx.real("alpha");
    const Eigen::VectorXd t = (2.0 * ctx.y.array() - 1.0).matrix();
    const Centered c = center(ctx.X, t);
    Eigen::MatrixXd A = c.X.transpose() * c.X;
    A.diagonal().array() += alpha;
    Eigen::VectorXd w = A.ldlt().solve(c.X.transpose() * c.y);
    const double b = intercept_for(c, w);
    return make_linear(std::move(w), b, true);
}

// Dual coordinate descent with the intercept folded in as a constant
// feature: squared hinge loss for classification, epsilon-insensitive loss
// for regression.
EstimatorPtr fit_linear_svm(const FitContext& ctx) {
    const double C = ctx.real("C");
    const std::int64_t epochs = ctx.integer("max_iter");
    const Eigen::MatrixXd& X = ctx.X;
    const Eigen::Index n = X.rows(), p = X.cols();
    Eigen::MatrixXd Xa(n, p + 1);
    Xa.leftCols(p) = X;
    Xa.col(p).setOnes();
    const Eigen::VectorXd sq = Xa.rowwise().squaredNorm();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const double tol = 1e-4;

    if (ctx.task == Task::Classification) {
        const double D = 0.5 / C;
        for (std::int64_t e = 0; e < epochs; ++e) {
            ctx.rng.shuffle(order);
            double pg_max = -std::numeric_limits<double>::infinity();
            double pg_min = std::numeric_limits<double>::infinity();
            for (auto i : order) {
                const double yi = ctx.y(i) > 0.5 ? 1.0 : -1.0;
                const double G = yi * Xa.row(i).dot(w) - 1.0 + D * a(i);
                const double pg = a(i) == 0.0 ? std::min(G, 0.0) : G;
                pg_max = std::max(pg_max, pg);
                pg_min = std::min(pg_min, pg);
                if (pg != 0.0) {
                    const double old = a(i);
                    a(i) = std::max(a(i) - G / (sq(i) + D), 0.0);
                    w.noalias() += (a(i) - old) * yi * Xa.row(i).transpose();
                }
            }
            if (!w.allFinite()) throw NonConvergenceError("linear SVM diverged");
            if (pg_max - pg_min < tol) break;
        }
        return make_linear(w.head(p), w(p), true);
    }

    const double eps = ctx.real("epsilon");
    for (std::int64_t e = 0; e < epochs; ++e) {
        ctx.rng.shuffle(order);
        double max_step = 0.0, max_a = 0.0;
        for (auto i : order) {
            if (sq(i) == 0.0) continue;
            const double g = Xa.row(i).dot(w) - ctx.y(i);
            const double v = a(i) - g / sq(i);
            const double next = std::clamp(soft_threshold(v, eps / sq(i)), -C, C);
            const double d = next - a(i);
            if (d != 0.0) {
                a(i) = next;
                w.noalias() += d * Xa.row(i).transpose();
            }
            max_step = std::max(max_step, std::abs(d));
            max_a = std::max(max_a, std::abs(next));
        }
        if (!w.allFinite()) throw NonConvergenceError("linear SVM diverged");
        if (max_step <= tol * std::max(1.0, max_a)) break;
    }
    return make_linear(w.head(p), w(p), false);
}

EstimatorPtr load_linear(const nlohmann::json& j) {
    return std::make_unique<LinearEstimator>(vector_from_json(j.at("coef")), j.at("intercept").get<double>(),
                                             j.at("link").get<std::string>() == "logistic");
}

}  // namespace cqabench::detail
