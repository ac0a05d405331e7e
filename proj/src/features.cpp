#include "cqabench/features.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cqabench {

std::string_view to_string(FeTechnique fe) {
    switch (fe) {
        case FeTechnique::Standardise: return "standardise";
        case FeTechnique::Normalise: return "normalise";
        case FeTechnique::Log: return "log";
        case FeTechnique::Power: return "power";
        case FeTechnique::None: return "none";
    }
    return "?";
}

FeTechnique parse_fe_technique(std::string_view text) {
    for (auto fe : all_fe_techniques())
        if (to_string(fe) == text) return fe;
    throw ConfigError("unknown feature-engineering technique '" + std::string(text) + "'");
}

const std::vector<FeTechnique>& all_fe_techniques() {
    static const std::vector<FeTechnique> all = {FeTechnique::Standardise, FeTechnique::Normalise, FeTechnique::Log,
                                                 FeTechnique::Power, FeTechnique::None};
    return all;
}

double power_map(double x, double min, double lambda) {
    const double y = std::max(1.0 + x - min, std::numeric_limits<double>::min());
    if (lambda == 0.0) return std::log(y);
    return (std::pow(y, lambda) - 1.0) / lambda;
}

double skewness(const Eigen::VectorXd& x) {
    if (x.size() == 0) return 0.0;
    const double m = x.mean();
    const Eigen::ArrayXd d = x.array() - m;
    const double m2 = d.square().mean();
    if (!(m2 > 0.0)) return 0.0;
    return d.cube().mean() / std::pow(m2, 1.5);
}

namespace {

double population_sd(const Eigen::VectorXd& x, double mean) {
    return std::sqrt((x.array() - mean).square().mean());
}

}  // namespace

FittedTransform fit_transform(FeTechnique kind, const Eigen::MatrixXd& train) {
    if (train.rows() == 0) throw FeatureError("cannot fit a transform on zero training rows");
    if (!train.allFinite()) throw FeatureError("training matrix contains missing or non-finite values");
    FittedTransform t;
    t.kind = kind;
    const Eigen::Index p = train.cols();
    t.first = Eigen::VectorXd::Zero(p);
    t.second = Eigen::VectorXd::Ones(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd c = train.col(j);
        switch (kind) {
            case FeTechnique::Standardise: {
                t.first(j) = c.mean();
                t.second(j) = population_sd(c, t.first(j));
                if (!(t.second(j) > 0.0))
                    t.warnings.push_back("column " + std::to_string(j) + " has zero variance; standardised to 0");
                break;
            }
            case FeTechnique::Normalise:
                t.first(j) = c.minCoeff();
                t.second(j) = c.maxCoeff();
                if (!(t.second(j) > t.first(j)))
                    t.warnings.push_back("column " + std::to_string(j) + " is constant; normalised to 0");
                break;
            case FeTechnique::Log: t.first(j) = std::min(0.0, c.minCoeff()); break;
            case FeTechnique::Power: {
                t.first(j) = c.minCoeff();
                double best = std::numeric_limits<double>::infinity();
                for (double lambda : kPowerGrid) {
                    const Eigen::VectorXd m = c.unaryExpr([&](double v) { return power_map(v, t.first(j), lambda); });
                    const double s = std::abs(skewness(m));
                    if (s < best) {
                        best = s;
                        t.second(j) = lambda;
                    }
                }
                break;
            }
            case FeTechnique::None: break;
        }
    }
    return t;
}

Eigen::MatrixXd FittedTransform::apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != first.size())
        throw FeatureError("transform fitted on " + std::to_string(first.size()) + " columns, got " +
                           std::to_string(X.cols()));
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double a = first(j);
        const double b = second(j);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double x = X(i, j);
            double v = x;
            switch (kind) {
                case FeTechnique::Standardise: v = b > 0.0 ? (x - a) / b : 0.0; break;
                case FeTechnique::Normalise: v = b > a ? (x - a) / (b - a) : 0.0; break;
                case FeTechnique::Log: v = std::log1p(std::max(x - a, -1.0 + std::numeric_limits<double>::epsilon())); break;
                case FeTechnique::Power: v = power_map(x, a, b); break;
                case FeTechnique::None: break;
            }
            out(i, j) = v;
        }
    }
    return out;
}

nlohmann::json FittedTransform::to_json(std::span<const std::string> names) const {
    nlohmann::json cols = nlohmann::json::array();
    for (Eigen::Index j = 0; j < first.size(); ++j) {
        nlohmann::json c;
        if (static_cast<std::size_t>(j) < names.size()) c["column"] = names[static_cast<std::size_t>(j)];
        switch (kind) {
            case FeTechnique::Standardise: c["mean"] = first(j), c["std"] = second(j); break;
            case FeTechnique::Normalise: c["min"] = first(j), c["max"] = second(j); break;
            case FeTechnique::Log: c["shift"] = first(j); break;
            case FeTechnique::Power: c["min"] = first(j), c["exponent"] = second(j); break;
            case FeTechnique::None: break;
        }
        cols.push_back(std::move(c));
    }
    return {{"technique", std::string(to_string(kind))}, {"columns", cols}, {"warnings", warnings}};
}

TransformResult fit_apply_transform(FeTechnique kind, const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval) {
    if (eval.cols() != train.cols()) throw FeatureError("evaluation columns do not match training columns");
    TransformResult r;
    r.params = fit_transform(kind, train);
    r.train = r.params.apply(train);
    r.eval = r.params.apply(eval);
    return r;
}

double pearson_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw FeatureError("pearson_r needs equal-length inputs");
    if (x.size() < 2) throw FeatureError("pearson_r needs at least two values");
    const Eigen::ArrayXd dx = x.array() - x.mean();
    const Eigen::ArrayXd dy = y.array() - y.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (!(sxx > 0.0) || !(syy > 0.0)) throw FeatureError("correlation is undefined for a constant input");
    return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

double VifReport::at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values[i];
    throw FeatureError("no VIF entry for '" + std::string(name) + "'");
}

std::vector<std::string> VifReport::exceeding() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (values[i] > threshold) out.push_back(names[i]);
    return out;
}

nlohmann::json VifReport::to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        nlohmann::json e = {{"column", names[i]}};
        if (std::isfinite(values[i]))
            e["vif"] = values[i];
        else
            e["vif"] = "inf";
        entries.push_back(std::move(e));
    }
    return {{"threshold", threshold}, {"entries", entries}};
}

VifReport compute_vif(const Eigen::MatrixXd& X, std::vector<std::string> names, double threshold) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (static_cast<std::size_t>(p) != names.size()) throw FeatureError("VIF column names do not match the matrix");
    if (p < 2) throw FeatureError("VIF needs at least two columns");
    if (n <= p) throw FeatureError("VIF needs more rows than columns");
    if (!X.allFinite()) throw FeatureError("VIF input contains missing or non-finite values");

    Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
    VifReport report;
    report.names = std::move(names);
    report.threshold = threshold;
    report.values.resize(static_cast<std::size_t>(p));
    Eigen::MatrixXd others(n, p - 1);
    for (Eigen::Index i = 0; i < p; ++i) {
        const Eigen::VectorXd target = C.col(i);
        const double ss_tot = target.squaredNorm();
        if (!(ss_tot > 0.0)) {
            report.values[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
            continue;
        }
        if (i > 0) others.leftCols(i) = C.leftCols(i);
        if (i < p - 1) others.rightCols(p - 1 - i) = C.rightCols(p - 1 - i);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(others);
        const Eigen::VectorXd beta = cod.solve(target);
        const double ss_res = (target - others * beta).squaredNorm();
        const double ratio = ss_res / ss_tot;
        report.values[static_cast<std::size_t>(i)] =
            ratio <= 1e-13 ? std::numeric_limits<double>::infinity() : 1.0 / std::min(ratio, 1.0);
    }
    return report;
}

PruneResult prune_by_vif(const UserFeatureTable& table, std::span<const std::string> predictors, double threshold) {
    for (const auto& name : predictors)
        if (table.schema().column(table.schema().require(name)).role == Role::Target)
            throw FeatureError("target '" + name + "' must be excluded from the VIF assessment");
    PruneResult r;
    r.report = compute_vif(table.matrix(predictors), std::vector<std::string>(predictors.begin(), predictors.end()),
                           threshold);
    r.removed = r.report.exceeding();
    if (r.removed.size() == predictors.size())
        throw FeatureError("every predictor exceeds the VIF threshold " + std::to_string(threshold));
    for (const auto& name : predictors)
        if (std::find(r.removed.begin(), r.removed.end(), name) == r.removed.end()) r.retained.push_back(name);
    r.table = table.drop_columns(r.removed);
    return r;
}

UserFeatureTable drop_composites(const UserFeatureTable& table) {
    const auto composites = table.schema().names_with_role(Role::ExcludedComposite);
    return table.drop_columns(composites);
}

UserFeatureTable drop_composites(const UserFeatureTable& table, std::span<const std::string> rules) {
    for (const auto& name : rules)
        if (!table.schema().contains(name)) throw FeatureError("composite rule names unknown column '" + name + "'");
    return table.drop_columns(rules);
}

}  // namespace cqabench
