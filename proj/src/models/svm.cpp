#include "estimators.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

namespace cqabench::detail {

namespace {

enum class KernelKind { Rbf, Poly, Linear, Sigmoid };

KernelKind parse_kernel(const std::string& s) {
    if (s == "rbf") return KernelKind::Rbf;
    if (s == "poly") return KernelKind::Poly;
    if (s == "linear") return KernelKind::Linear;
    if (s == "sigmoid") return KernelKind::Sigmoid;
    throw ConfigError("unknown kernel '" + s + "'");
}

const char* kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Poly: return "poly";
        case KernelKind::Linear: return "linear";
        case KernelKind::Sigmoid: return "sigmoid";
    }
    return "rbf";
}

struct Kernel {
    KernelKind kind = KernelKind::Rbf;
    double gamma = 1.0;
    double coef0 = 0.0;
    int degree = 3;

    double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a, double na,
                      const Eigen::Ref<const Eigen::RowVectorXd>& b, double nb) const {
        const double dot = a.dot(b);
        switch (kind) {
            case KernelKind::Rbf: return std::exp(-gamma * std::max(na + nb - 2.0 * dot, 0.0));
            case KernelKind::Poly: return std::pow(gamma * dot + coef0, degree);
            case KernelKind::Linear: return dot;
            case KernelKind::Sigmoid: return std::tanh(gamma * dot + coef0);
        }
        return 0.0;
    }
};

// Kernel rows over the n training points, cached with LRU eviction.
class KernelRows {
public:
    KernelRows(const Eigen::MatrixXd& X, const Kernel& k, std::size_t budget_bytes)
        : X_(X), k_(k), norms_(X.rowwise().squaredNorm()) {
        const std::size_t row_bytes = static_cast<std::size_t>(X.rows()) * sizeof(double) + 64;
        capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
    }

    const Eigen::VectorXd& row(Eigen::Index i) {
        auto it = index_.find(i);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        if (index_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        Eigen::VectorXd r(X_.rows());
        for (Eigen::Index j = 0; j < X_.rows(); ++j) r(j) = k_(X_.row(i), norms_(i), X_.row(j), norms_(j));
        lru_.emplace_front(i, std::move(r));
        index_[i] = lru_.begin();
        return lru_.front().second;
    }

    double diag(Eigen::Index i) const { return k_(X_.row(i), norms_(i), X_.row(i), norms_(i)); }

private:
    const Eigen::MatrixXd& X_;
    Kernel k_;
    Eigen::VectorXd norms_;
    std::size_t capacity_;
    std::list<std::pair<Eigen::Index, Eigen::VectorXd>> lru_;
    std::unordered_map<Eigen::Index, std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator> index_;
};

// SMO with second-order working-set selection for
//   min 1/2 a'Qa + p'a  s.t. y'a = const, 0 <= a <= C,
// Q_ij = y_i y_j K(i mod n, j mod n). `nu` selects the two-constraint variant.
struct SmoResult {
    Eigen::VectorXd alpha;
    double rho = 0.0;
    bool converged = true;
};

SmoResult smo(KernelRows& K, Eigen::Index n, const Eigen::VectorXd& p, const Eigen::VectorXd& y, Eigen::VectorXd alpha,
              double C, bool nu, std::int64_t max_steps) {
    const Eigen::Index l = p.size();
    constexpr double kTau = 1e-12;
    constexpr double kEps = 1e-3;
    auto kidx = [n](Eigen::Index i) { return i % n; };
    Eigen::VectorXd QD(l);
    for (Eigen::Index i = 0; i < l; ++i) QD(i) = K.diag(kidx(i));

    auto Qrow = [&](Eigen::Index i, Eigen::VectorXd& out) {
        const Eigen::VectorXd& r = K.row(kidx(i));
        out.resize(l);
        for (Eigen::Index j = 0; j < l; ++j) out(j) = y(i) * y(j) * r(kidx(j));
    };

    auto upper = [&](Eigen::Index i) { return alpha(i) >= C; };
    auto lower = [&](Eigen::Index i) { return alpha(i) <= 0.0; };

    Eigen::VectorXd G = p;
    Eigen::VectorXd Qi, Qj;
    for (Eigen::Index i = 0; i < l; ++i) {
        if (alpha(i) == 0.0) continue;
        Qrow(i, Qi);
        G += alpha(i) * Qi;
    }

    SmoResult res;
    std::int64_t step = 0;
    for (;; ++step) {
        if (step >= max_steps) {
            res.converged = false;
            break;
        }
        Eigen::Index out_i = -1, out_j = -1;
        if (!nu) {
            double gmax = -std::numeric_limits<double>::infinity();
            Eigen::Index gi = -1;
            for (Eigen::Index t = 0; t < l; ++t) {
                if (y(t) > 0) {
                    if (!upper(t) && -G(t) >= gmax) gmax = -G(t), gi = t;
                } else if (!lower(t) && G(t) >= gmax) {
                    gmax = G(t), gi = t;
                }
            }
            if (gi < 0) break;
            Qrow(gi, Qi);
            double gmax2 = -std::numeric_limits<double>::infinity();
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index gj = -1;
            for (Eigen::Index j = 0; j < l; ++j) {
                if (y(j) > 0) {
                    if (lower(j)) continue;
                    const double diff = gmax + G(j);
                    gmax2 = std::max(gmax2, G(j));
                    if (diff > 0) {
                        double quad = QD(gi) + QD(j) - 2.0 * y(gi) * Qi(j);
                        if (quad <= 0) quad = kTau;
                        const double obj = -diff * diff / quad;
                        if (obj <= best) best = obj, gj = j;
                    }
                } else {
                    if (upper(j)) continue;
                    const double diff = gmax - G(j);
                    gmax2 = std::max(gmax2, -G(j));
                    if (diff > 0) {
                        double quad = QD(gi) + QD(j) + 2.0 * y(gi) * Qi(j);
                        if (quad <= 0) quad = kTau;
                        const double obj = -diff * diff / quad;
                        if (obj <= best) best = obj, gj = j;
                    }
                }
            }
            if (gmax + gmax2 < kEps || gj < 0) break;
            out_i = gi;
            out_j = gj;
        } else {
            double gmaxp = -std::numeric_limits<double>::infinity(), gmaxn = gmaxp;
            Eigen::Index ip = -1, in = -1;
            for (Eigen::Index t = 0; t < l; ++t) {
                if (y(t) > 0) {
                    if (!upper(t) && -G(t) >= gmaxp) gmaxp = -G(t), ip = t;
                } else if (!lower(t) && G(t) >= gmaxn) {
                    gmaxn = G(t), in = t;
                }
            }
            Eigen::VectorXd Qip, Qin;
            if (ip >= 0) Qrow(ip, Qip);
            if (in >= 0) Qrow(in, Qin);
            double gmaxp2 = -std::numeric_limits<double>::infinity(), gmaxn2 = gmaxp2;
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index gj = -1;
            for (Eigen::Index j = 0; j < l; ++j) {
                if (y(j) > 0) {
                    if (lower(j)) continue;
                    const double diff = gmaxp + G(j);
                    gmaxp2 = std::max(gmaxp2, G(j));
                    if (diff > 0 && ip >= 0) {
                        double quad = QD(ip) + QD(j) - 2.0 * Qip(j);
                        if (quad <= 0) quad = kTau;
                        const double obj = -diff * diff / quad;
                        if (obj <= best) best = obj, gj = j;
                    }
                } else {
                    if (upper(j)) continue;
                    const double diff = gmaxn - G(j);
                    gmaxn2 = std::max(gmaxn2, -G(j));
                    if (diff > 0 && in >= 0) {
                        double quad = QD(in) + QD(j) - 2.0 * Qin(j);
                        if (quad <= 0) quad = kTau;
                        const double obj = -diff * diff / quad;
                        if (obj <= best) best = obj, gj = j;
                    }
                }
            }
            if (std::max(gmaxp + gmaxp2, gmaxn + gmaxn2) < kEps || gj < 0) break;
            out_i = y(gj) > 0 ? ip : in;
            out_j = gj;
        }

        const Eigen::Index i = out_i, j = out_j;
        Qrow(i, Qi);
        Qrow(j, Qj);
        const double old_i = alpha(i), old_j = alpha(j);
        double& ai = alpha(i);
        double& aj = alpha(j);
        if (y(i) != y(j)) {
            double quad = QD(i) + QD(j) + 2.0 * Qi(j);
            if (quad <= 0) quad = kTau;
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) aj = 0, ai = diff;
            } else if (ai < 0) {
                ai = 0, aj = -diff;
            }
            if (diff > 0) {
                if (ai > C) ai = C, aj = C - diff;
            } else if (aj > C) {
                aj = C, ai = C + diff;
            }
        } else {
            double quad = QD(i) + QD(j) - 2.0 * Qi(j);
            if (quad <= 0) quad = kTau;
            const double delta = (G(i) - G(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) ai = C, aj = sum - C;
            } else if (aj < 0) {
                aj = 0, ai = sum;
            }
            if (sum > C) {
                if (aj > C) aj = C, ai = sum - C;
            } else if (ai < 0) {
                ai = 0, aj = sum;
            }
        }
        const double di = ai - old_i, dj = aj - old_j;
        G.noalias() += di * Qi + dj * Qj;
        if (!std::isfinite(ai) || !std::isfinite(aj)) break;
    }

    if (!alpha.allFinite() || !G.allFinite())
        throw NonConvergenceError("support-vector solver was unable to determine finite dual coefficients");

    if (!nu) {
        double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
        int nr_free = 0;
        for (Eigen::Index i = 0; i < l; ++i) {
            const double yG = y(i) * G(i);
            if (upper(i)) {
                if (y(i) < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
            } else if (lower(i)) {
                if (y(i) > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
            } else {
                ++nr_free;
                sum_free += yG;
            }
        }
        res.rho = nr_free > 0 ? sum_free / nr_free : 0.5 * (ub + lb);
    } else {
        double ub1 = std::numeric_limits<double>::infinity(), ub2 = ub1, lb1 = -ub1, lb2 = -ub1;
        double s1 = 0.0, s2 = 0.0;
        int f1 = 0, f2 = 0;
        for (Eigen::Index i = 0; i < l; ++i) {
            if (y(i) > 0) {
                if (upper(i)) lb1 = std::max(lb1, G(i));
                else if (lower(i)) ub1 = std::min(ub1, G(i));
                else ++f1, s1 += G(i);
            } else {
                if (upper(i)) lb2 = std::max(lb2, G(i));
                else if (lower(i)) ub2 = std::min(ub2, G(i));
                else ++f2, s2 += G(i);
            }
        }
        const double r1 = f1 > 0 ? s1 / f1 : 0.5 * (ub1 + lb1);
        const double r2 = f2 > 0 ? s2 / f2 : 0.5 * (ub2 + lb2);
        res.rho = 0.5 * (r1 - r2);
    }
    if (!std::isfinite(res.rho))
        throw NonConvergenceError("support-vector solver was unable to determine a finite intercept");
    res.alpha = std::move(alpha);
    return res;
}

class KernelEstimator final : public Estimator {
public:
    KernelEstimator(Kernel k, Eigen::MatrixXd sv, Eigen::VectorXd coef, double rho, bool logistic, bool converged)
        : k_(k), sv_(std::move(sv)), coef_(std::move(coef)), rho_(rho), logistic_(logistic), converged_(converged) {
        sv_norms_ = sv_.rowwise().squaredNorm();
    }

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out(X.rows());
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const double nr = X.row(r).squaredNorm();
            double f = -rho_;
            for (Eigen::Index s = 0; s < sv_.rows(); ++s) f += coef_(s) * k_(sv_.row(s), sv_norms_(s), X.row(r), nr);
            out(r) = logistic_ ? sigmoid(f) : f;
        }
        return out;
    }

    nlohmann::json save() const override {
        return {{"kind", "kernel"},
                {"kernel", kernel_name(k_.kind)},
                {"gamma", k_.gamma},
                {"coef0", k_.coef0},
                {"degree", k_.degree},
                {"support_vectors", matrix_to_json(sv_)},
                {"dual_coef", vector_to_json(coef_)},
                {"rho", rho_},
                {"link", logistic_ ? "logistic" : "identity"},
                {"converged", converged_}};
    }

private:
    Kernel k_;
    Eigen::MatrixXd sv_;
    Eigen::VectorXd coef_;
    double rho_;
    bool logistic_;
    bool converged_;
    Eigen::VectorXd sv_norms_;
};

// Squared feature-scale spread beyond 1/eps loses every kernel entry to
// rounding; the dual cannot be resolved in double precision.
void check_scaling(const Eigen::MatrixXd& X) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double m = X.col(c).mean();
        const double sd = std::sqrt((X.col(c).array() - m).square().mean());
        if (!std::isfinite(sd)) throw NonConvergenceError("support-vector input contains non-finite values");
        if (sd <= 0.0) continue;
        lo = std::min(lo, sd);
        hi = std::max(hi, sd);
    }
    if (hi > 0.0 && (hi / lo) * (hi / lo) > 1.0 / std::numeric_limits<double>::epsilon())
        throw NonConvergenceError(
            "support-vector solver was unable to determine finite dual coefficients: feature scales span too many "
            "orders of magnitude");
}

Kernel make_kernel(const FitContext& ctx) {
    Kernel k;
    k.kind = parse_kernel(ctx.choice("kernel"));
    k.coef0 = ctx.real("coef0");
    k.degree = static_cast<int>(ctx.integer("degree"));
    const double n = static_cast<double>(ctx.X.size());
    const double mean = ctx.X.mean();
    const double var = n > 0 ? (ctx.X.array() - mean).square().sum() / n : 0.0;
    k.gamma = var > 0.0 ? 1.0 / (static_cast<double>(ctx.X.cols()) * var) : 1.0;
    return k;
}

constexpr std::size_t kCacheBytes = 192u << 20;

EstimatorPtr finish(const Kernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& coef, double rho, bool logistic,
                    bool converged) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < coef.size(); ++i)
        if (coef(i) != 0.0) keep.push_back(i);
    Eigen::MatrixXd sv(static_cast<Eigen::Index>(keep.size()), X.cols());
    Eigen::VectorXd c(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t s = 0; s < keep.size(); ++s) {
        sv.row(static_cast<Eigen::Index>(s)) = X.row(keep[s]);
        c(static_cast<Eigen::Index>(s)) = coef(keep[s]);
    }
    return std::make_unique<KernelEstimator>(k, std::move(sv), std::move(c), rho, logistic, converged);
}

std::int64_t step_cap(const FitContext& ctx, Eigen::Index l) {
    // max_iter counts passes over the dual variables.
    return std::max<std::int64_t>(1, ctx.integer("max_iter")) * std::max<std::int64_t>(1, l);
}

}  // namespace

EstimatorPtr fit_epsilon_svr(const FitContext& ctx) {
    check_scaling(ctx.X);
    const Kernel k = make_kernel(ctx);
    const Eigen::Index n = ctx.X.rows();
    const double C = ctx.real("C"), eps = ctx.real("epsilon");
    Eigen::VectorXd p(2 * n), y(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i) = eps - ctx.y(i);
        y(i) = 1.0;
        p(i + n) = eps + ctx.y(i);
        y(i + n) = -1.0;
    }
    KernelRows K(ctx.X, k, kCacheBytes);
    const SmoResult r = smo(K, n, p, y, Eigen::VectorXd::Zero(2 * n), C, false, step_cap(ctx, 2 * n));
    const Eigen::VectorXd coef = r.alpha.head(n) - r.alpha.tail(n);
    return finish(k, ctx.X, coef, r.rho, false, r.converged);
}

EstimatorPtr fit_nu_svr(const FitContext& ctx) {
    check_scaling(ctx.X);
    const Kernel k = make_kernel(ctx);
    const Eigen::Index n = ctx.X.rows();
    const double C = ctx.real("C"), nu = ctx.real("nu");
    Eigen::VectorXd p(2 * n), y(2 * n), alpha(2 * n);
    double sum = C * nu * static_cast<double>(n) / 2.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        alpha(i) = alpha(i + n) = std::min(sum, C);
        sum -= alpha(i);
        p(i) = -ctx.y(i);
        y(i) = 1.0;
        p(i + n) = ctx.y(i);
        y(i + n) = -1.0;
    }
    KernelRows K(ctx.X, k, kCacheBytes);
    const SmoResult r = smo(K, n, p, y, alpha, C, true, step_cap(ctx, 2 * n));
    const Eigen::VectorXd coef = r.alpha.head(n) - r.alpha.tail(n);
    return finish(k, ctx.X, coef, r.rho, false, r.converged);
}

EstimatorPtr fit_c_svc(const FitContext& ctx) {
    check_scaling(ctx.X);
    const Kernel k = make_kernel(ctx);
    const Eigen::Index n = ctx.X.rows();
    const double C = ctx.real("C");
    Eigen::VectorXd p = Eigen::VectorXd::Constant(n, -1.0);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = ctx.y(i) > 0.5 ? 1.0 : -1.0;
    KernelRows K(ctx.X, k, kCacheBytes);
    const SmoResult r = smo(K, n, p, y, Eigen::VectorXd::Zero(n), C, false, step_cap(ctx, n));
    const Eigen::VectorXd coef = r.alpha.cwiseProduct(y);
    return finish(k, ctx.X, coef, r.rho, true, r.converged);
}

EstimatorPtr load_kernel(const nlohmann::json& j) {
    Kernel k;
    k.kind = parse_kernel(j.at("kernel").get<std::string>());
    k.gamma = j.at("gamma").get<double>();
    k.coef0 = j.at("coef0").get<double>();
    k.degree = j.at("degree").get<int>();
    return std::make_unique<KernelEstimator>(k, matrix_from_json(j.at("support_vectors")),
                                             vector_from_json(j.at("dual_coef")), j.at("rho").get<double>(),
                                             j.at("link").get<std::string>() == "logistic",
                                             j.value("converged", true));
}

}  // namespace cqabench::detail
