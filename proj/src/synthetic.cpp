#include "cqabench/synthetic.hpp"

#include "cqabench/catalog.hpp"
#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace cqabench {

void SyntheticProfile::validate() const {
    if (!(signal_r2 > 0.0 && signal_r2 <= 1.0)) throw ConfigError("signal_r2 must be in (0, 1]");
    for (double r : {zero_missing, knn_missing, em_missing})
        if (!(r >= 0.0 && r < 1.0)) throw ConfigError("missingness rates must be in [0, 1)");
    if (!(non_dropout_fraction > 0.0 && non_dropout_fraction < 1.0))
        throw ConfigError("non_dropout_fraction must be in (0, 1)");
}

SyntheticProfile synthetic_profile_from_json(const nlohmann::json& j) {
    SyntheticProfile p;
    p.signal_r2 = j.value("signal_r2", p.signal_r2);
    p.zero_missing = j.value("zero_missing", p.zero_missing);
    p.knn_missing = j.value("knn_missing", p.knn_missing);
    p.em_missing = j.value("em_missing", p.em_missing);
    p.non_dropout_fraction = j.value("non_dropout_fraction", p.non_dropout_fraction);
    p.validate();
    return p;
}

nlohmann::json to_json(const SyntheticProfile& p) {
    return {{"signal_r2", p.signal_r2},
            {"zero_missing", p.zero_missing},
            {"knn_missing", p.knn_missing},
            {"em_missing", p.em_missing},
            {"non_dropout_fraction", p.non_dropout_fraction}};
}

namespace {

struct CountColumn {
    const char* name;
    double mu;
    double sigma;
    // Loading on the shared activity factor.
    double rho;
};

constexpr std::array<CountColumn, 9> kCounts = {{
    {"Questions", 1.0, 1.0, 0.6},
    {"Comments", 1.5, 1.1, 0.6},
    {"Edits", 0.8, 1.2, 0.5},
    {"Views", 4.0, 1.5, 0.6},
    {"UpVotes", 1.5, 1.3, 0.6},
    {"DownVotes", 0.3, 1.0, 0.4},
    {"ProfileLength", 3.0, 1.2, 0.3},
    {"Code Length", 4.0, 1.3, 0.4},
    {"YearlyDurationUsage", 1.0, 0.6, 0.3},
}};

const std::vector<std::string>& zero_group() {
    static const std::vector<std::string> g = [] {
        std::vector<std::string> v = {"ProfileLength", "UpVotes", "DownVotes", "Views",
                                      "Reputation",    "Questions", "Code Length"};
        for (const auto& c : catalog::violation_density_columns()) v.push_back(c);
        return v;
    }();
    return g;
}

const std::vector<std::string>& knn_group() {
    static const std::vector<std::string> g = {"Comments", "Edits", "Badges", "Post Readability",
                                               "Post Attention to Detail", "User Contribution Frequency"};
    return g;
}

const std::vector<std::string>& em_group() {
    static const std::vector<std::string> g = {"AboutMe Polarity", "Comment Polarity", "Answer Polarity",
                                               "Question Polarity", "User Popularity Index"};
    return g;
}

Eigen::VectorXd zscore_log1p(const Eigen::VectorXd& x) {
    Eigen::VectorXd l = x.array().log1p().matrix();
    const double n = static_cast<double>(l.size());
    const double mean = l.mean();
    double var = (l.array() - mean).square().sum() / n;
    if (!(var > 0.0)) var = 1.0;
    return ((l.array() - mean) / std::sqrt(var)).matrix();
}

double variance(const Eigen::VectorXd& x) {
    if (x.size() == 0) return 0.0;
    const double mean = x.mean();
    return (x.array() - mean).square().sum() / static_cast<double>(x.size());
}

}  // namespace

UserFeatureTable generate_synthetic_users(std::size_t n, std::uint64_t seed, const SyntheticProfile& profile) {
    profile.validate();
    const FeatureSchema schema = catalog::full_schema();
    const auto rows = static_cast<Eigen::Index>(n);
    const auto ncols = static_cast<Eigen::Index>(schema.size());
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(rows, ncols);
    MissingMask mask = MissingMask::Constant(rows, ncols, false);
    if (n == 0) return UserFeatureTable(schema, values, mask);

    Rng rng(seed);
    auto col = [&](const std::string& name) { return values.col(static_cast<Eigen::Index>(schema.require(name))); };

    std::vector<double> activity(n), standing(n);
    for (std::size_t i = 0; i < n; ++i) {
        activity[i] = rng.normal();
        standing[i] = 0.5 * activity[i] + std::sqrt(0.75) * rng.normal();
    }

    for (const auto& c : kCounts) {
        auto v = col(c.name);
        const double idio = std::sqrt(1.0 - c.rho * c.rho);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = c.rho * activity[i] + idio * rng.normal();
            v(static_cast<Eigen::Index>(i)) = std::floor(std::exp(c.mu + c.sigma * z));
        }
    }

    // Reputation, Badges and contribution frequency share one standing factor
    // so they are mutually collinear.
    {
        auto rep = col("Reputation");
        auto badges = col("Badges");
        auto ucf = col("User Contribution Frequency");
        auto upi = col("User Popularity Index");
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double s = standing[i];
            rep(r) = std::floor(std::exp(4.0 + 1.5 * (0.97 * s + 0.243 * rng.normal())));
            badges(r) = std::floor(std::exp(1.5 + 1.0 * (0.97 * s + 0.243 * rng.normal())));
            ucf(r) = std::exp(-1.0 + 0.8 * (0.95 * s + 0.312 * rng.normal()));
            upi(r) = std::exp(0.5 * (0.6 * s + 0.8 * rng.normal()));
        }
    }

    {
        auto readability = col("Post Readability");
        auto attention = col("Post Attention to Detail");
        auto completion = col("User Profile Completion Rate");
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            readability(r) = 100.0 * rng.beta(5.0, 3.0);
            attention(r) = readability(r) / 100.0 + 0.02 * rng.normal();
            completion(r) = rng.beta(2.0, 3.0);
        }
        for (const char* name : {"AboutMe Polarity", "Comment Polarity", "Answer Polarity", "Question Polarity"}) {
            auto pol = col(name);
            for (std::size_t i = 0; i < n; ++i) pol(static_cast<Eigen::Index>(i)) = 2.0 * rng.beta(2.0, 2.0) - 1.0;
        }
    }

    // Structural zeros first, so the planted signal sees the zero-filled value.
    auto inject = [&](const std::vector<std::string>& group, double rate, bool zero) {
        for (const auto& name : group) {
            const auto c = static_cast<Eigen::Index>(schema.require(name));
            for (Eigen::Index r = 0; r < rows; ++r) {
                if (rng.bernoulli(rate)) {
                    mask(r, c) = true;
                    if (zero) values(r, c) = 0.0;
                }
            }
        }
    };
    std::vector<std::string> zero_counts;
    for (const auto& name : zero_group())
        if (name.find("Violation Density") == std::string::npos) zero_counts.push_back(name);
    inject(zero_counts, profile.zero_missing, true);

    const Eigen::VectorXd zq = zscore_log1p(col("Questions"));
    const Eigen::VectorXd zcl = zscore_log1p(col("Code Length"));
    const Eigen::VectorXd zv = zscore_log1p(col("Views"));
    const Eigen::VectorXd zy = zscore_log1p(col("YearlyDurationUsage"));
    const Eigen::VectorXd zpl = zscore_log1p(col("ProfileLength"));
    const Eigen::VectorXd zup = zscore_log1p(col("UpVotes"));
    const Eigen::VectorXd zdv = zscore_log1p(col("DownVotes"));

    auto add_noise = [&](const Eigen::VectorXd& g) {
        const double sd = std::sqrt(variance(g) * (1.0 - profile.signal_r2) / profile.signal_r2);
        Eigen::VectorXd out = g;
        for (Eigen::Index r = 0; r < rows; ++r) out(r) += sd * rng.normal();
        return out;
    };

    {
        const Eigen::VectorXd g =
            (0.3 * zq.array() + 0.25 * zcl.array() + 0.15 * zv.array() + 0.12 * zq.array() * zy.array()).exp().matrix();
        const Eigen::VectorXd y = add_noise(g);
        auto answers = col(catalog::kAnswers);
        for (Eigen::Index r = 0; r < rows; ++r) answers(r) = std::max(0.0, 10.0 * y(r));
    }

    {
        const std::array<const Eigen::VectorXd*, 7> basis = {&zq, &zcl, &zv, &zy, &zpl, &zup, &zdv};
        const auto cols = catalog::violation_density_columns();
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto& a = *basis[k % basis.size()];
            const auto& b = *basis[(k * 3 + 1) % basis.size()];
            const Eigen::VectorXd g = (0.35 * a.array() + 0.2 * b.array()).exp().matrix();
            const Eigen::VectorXd y = add_noise(g);
            auto v = col(cols[k]);
            for (Eigen::Index r = 0; r < rows; ++r) v(r) = std::max(0.0, 0.1 * y(r));
        }
        inject(cols, profile.zero_missing, true);
    }

    {
        std::vector<double> latent(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            double u = rng.uniform();
            u = std::clamp(u, 1e-12, 1.0 - 1e-12);
            latent[i] = 1.4 * zq(r) + 0.9 * zy(r) + 0.7 * zv(r) + 0.5 * std::log(u / (1.0 - u));
        }
        std::vector<double> sorted = latent;
        const auto cut_index =
            static_cast<std::size_t>(std::floor((1.0 - profile.non_dropout_fraction) * static_cast<double>(n)));
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(std::min(cut_index, n - 1)),
                         sorted.end());
        const double cut = sorted[std::min(cut_index, n - 1)];
        auto dropout = col(catalog::kDropout);
        for (std::size_t i = 0; i < n; ++i) dropout(static_cast<Eigen::Index>(i)) = latent[i] >= cut ? 0.0 : 1.0;
    }

    {
        auto udi = col(catalog::kUserDevelopmentIndex);
        auto umi = col(catalog::kUserManagementIndex);
        udi = col("Questions") + col(catalog::kAnswers);
        umi = col("UpVotes") + col("DownVotes");
    }

    inject(knn_group(), profile.knn_missing, false);
    inject(em_group(), profile.em_missing, false);

    return UserFeatureTable(schema, values, mask);
}

}  // namespace cqabench
