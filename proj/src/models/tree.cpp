#include "cqabench/models/tree.hpp"

#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <numeric>

namespace cqabench::detail {

Presorted presort(const Eigen::MatrixXd& X) {
    Presorted out(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& o = out[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(X.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](std::int32_t l, std::int32_t r) { return X(l, f) < X(r, f); });
    }
    return out;
}

namespace {

double soft(double a, double alpha) {
    if (alpha <= 0.0) return a;
    if (a > alpha) return a - alpha;
    if (a < -alpha) return a + alpha;
    return 0.0;
}

struct Work {
    std::int32_t node;
    std::size_t begin;
    std::size_t end;
    int depth;
    double A;
    double B;
};

}  // namespace

void Tree::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& a, const Eigen::VectorXd& b, const TreeParams& params,
               Rng& rng) {
    fit(X, presort(X), a, b, params, rng);
}

void Tree::fit(const Eigen::MatrixXd& X, const Presorted& order, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
               const TreeParams& params, Rng& rng) {
    const auto p = static_cast<std::size_t>(X.cols());
    if (order.size() != p) throw ModelError("presorted order does not match the design matrix");
    nodes_.clear();

    std::vector<std::vector<std::int32_t>> ord(p);
    for (std::size_t f = 0; f < p; ++f) {
        ord[f].reserve(order[f].size());
        for (auto r : order[f])
            if (b(r) > 0.0) ord[f].push_back(r);
    }
    std::vector<std::int32_t> active;
    if (p > 0)
        active = ord[0];
    else
        for (Eigen::Index r = 0; r < b.size(); ++r)
            if (b(r) > 0.0) active.push_back(static_cast<std::int32_t>(r));
    if (active.empty()) throw ModelError("tree has no rows with positive weight");

    double A = 0.0, B = 0.0;
    for (auto r : active) {
        A += a(r);
        B += b(r);
    }
    auto score = [&](double s, double w) {
        const double d = w + params.lambda;
        if (d <= 0.0) return 0.0;
        const double t = soft(s, params.alpha);
        return t * t / d;
    };
    auto leaf = [&](double s, double w) {
        const double d = w + params.lambda;
        return d > 0.0 ? soft(s, params.alpha) / d : 0.0;
    };

    nodes_.push_back({});
    std::vector<Work> stack{{0, 0, active.size(), 0, A, B}};
    std::vector<char> goes_left(static_cast<std::size_t>(X.rows()), 0);
    std::vector<std::int32_t> scratch(active.size());
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), 0);

    while (!stack.empty()) {
        const Work w = stack.back();
        stack.pop_back();
        nodes_[static_cast<std::size_t>(w.node)].value = leaf(w.A, w.B);
        const std::size_t n = w.end - w.begin;
        if ((params.max_depth >= 0 && w.depth >= params.max_depth) || n < params.min_samples_split ||
            n < 2 * params.min_samples_leaf || p == 0)
            continue;

        std::size_t n_candidates = p;
        if (params.max_features > 0 && params.max_features < p) {
            n_candidates = params.max_features;
            for (std::size_t i = 0; i < n_candidates; ++i) {
                const std::size_t j = i + rng.index(p - i);
                std::swap(features[i], features[j]);
            }
        }

        const double parent = score(w.A, w.B);
        double best_gain = params.min_gain;
        std::size_t best_f = p;
        double best_thr = 0.0;
        for (std::size_t k = 0; k < n_candidates; ++k) {
            const std::size_t f = features[k];
            const auto& o = ord[f];
            const auto fe = static_cast<Eigen::Index>(f);
            double AL = 0.0, BL = 0.0;
            for (std::size_t i = w.begin; i + 1 < w.end; ++i) {
                AL += a(o[i]);
                BL += b(o[i]);
                const double x0 = X(o[i], fe);
                const double x1 = X(o[i + 1], fe);
                if (!(x0 < x1)) continue;
                const std::size_t nl = i - w.begin + 1;
                if (nl < params.min_samples_leaf || n - nl < params.min_samples_leaf) continue;
                const double BR = w.B - BL;
                if (BL < params.min_child_weight || BR < params.min_child_weight) continue;
                const double gain = score(AL, BL) + score(w.A - AL, BR) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    double thr = 0.5 * (x0 + x1);
                    if (!(thr < x1)) thr = x0;
                    best_thr = thr;
                }
            }
        }
        if (best_f == p) continue;

        const auto bf = static_cast<Eigen::Index>(best_f);
        double AL = 0.0, BL = 0.0;
        std::size_t nl = 0;
        for (std::size_t i = w.begin; i < w.end; ++i) {
            const auto r = ord[best_f][i];
            const bool left = X(r, bf) <= best_thr;
            goes_left[static_cast<std::size_t>(r)] = left;
            if (left) {
                AL += a(r);
                BL += b(r);
                ++nl;
            }
        }
        for (std::size_t f = 0; f < p; ++f) {
            auto& o = ord[f];
            std::size_t li = 0, ri = nl;
            for (std::size_t i = w.begin; i < w.end; ++i) {
                const auto r = o[i];
                if (goes_left[static_cast<std::size_t>(r)])
                    scratch[li++] = r;
                else
                    scratch[ri++] = r;
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(n), o.begin() + static_cast<std::ptrdiff_t>(w.begin));
        }

        const auto left = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({});
        nodes_.push_back({});
        auto& node = nodes_[static_cast<std::size_t>(w.node)];
        node.feature = static_cast<std::int32_t>(best_f);
        node.threshold = best_thr;
        node.left = left;
        node.right = left + 1;
        stack.push_back({left + 1, w.begin + nl, w.end, w.depth + 1, w.A - AL, w.B - BL});
        stack.push_back({left, w.begin, w.begin + nl, w.depth + 1, AL, BL});
    }
}

double Tree::predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(X(row, n.feature) <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

Eigen::VectorXd Tree::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X, r);
    return out;
}

void Tree::scale_values(double factor) {
    for (auto& n : nodes_) n.value *= factor;
}

void Tree::remap_features(const std::vector<std::size_t>& columns) {
    for (auto& n : nodes_)
        if (n.feature >= 0) n.feature = static_cast<std::int32_t>(columns.at(static_cast<std::size_t>(n.feature)));
}

int Tree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

nlohmann::json Tree::save() const {
    std::vector<std::int32_t> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : nodes_) {
        feature.push_back(n.feature);
        left.push_back(n.left);
        right.push_back(n.right);
        threshold.push_back(n.threshold);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

Tree Tree::load(const nlohmann::json& j) {
    Tree t;
    const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<std::int32_t>>();
    const auto right = j.at("right").get<std::vector<std::int32_t>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0)
        throw ModelError("malformed serialized tree");
    for (std::size_t i = 0; i < n; ++i) {
        if (feature[i] >= 0 && (left[i] <= static_cast<std::int32_t>(i) || right[i] <= static_cast<std::int32_t>(i) ||
                                static_cast<std::size_t>(std::max(left[i], right[i])) >= n))
            throw ModelError("malformed serialized tree");
        t.nodes_.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
    }
    return t;
}

}  // namespace cqabench::detail
