#include "cqabench/error.hpp"
#include "cqabench/hybrid.hpp"
#include "cqabench/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace cqabench;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd random_labels(Rng& rng, Eigen::Index n, double p) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.bernoulli(p) ? 1.0 : 0.0;
    return v;
}

fs::path write_file(const std::string& name, const std::string& body) {
    const auto p = fs::temp_directory_path() / ("cqabench_hybrid_" + name);
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST(Hybrid, ReferenceConfusionMatrices) {
    // 385 users, non-dropout (label 0) is the positive class.
    ConfusionMatrix numeric{95, 18, 28, 244, kNonDropoutLabel};
    ConfusionMatrix textual{105, 37, 18, 225, kNonDropoutLabel};
    EXPECT_NEAR(numeric.accuracy(), 0.881, 0.001);
    EXPECT_NEAR(numeric.f1(), 0.805, 0.001);
    EXPECT_NEAR(textual.accuracy(), 0.857, 0.001);
    EXPECT_NEAR(textual.f1(), 0.792, 0.001);
    EXPECT_EQ(numeric.total(), 385u);
}

TEST(Hybrid, DisagreementCountMatchesAgreement) {
    Rng rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(200));
        const auto truth = random_labels(rng, n, 0.4);
        const auto a = random_labels(rng, n, 0.5);
        const auto b = random_labels(rng, n, 0.5);
        const auto c = compare_predictors({}, a, b, truth);
        EXPECT_EQ(static_cast<double>(c.disagreements.size()), std::round(static_cast<double>(n) * (1.0 - c.agreement)));
        const auto ea = evaluate_predictor(a, truth), eb = evaluate_predictor(b, truth);
        EXPECT_EQ(c.delta_tp, static_cast<long>(ea.matrix.tp) - static_cast<long>(eb.matrix.tp));
        EXPECT_EQ(c.delta_tn, static_cast<long>(ea.matrix.tn) - static_cast<long>(eb.matrix.tn));
        for (const auto& d : c.disagreements) {
            EXPECT_NE(d.numeric, d.textual);
            EXPECT_EQ(d.correct == "numeric" ? d.numeric : d.textual, d.truth);
        }
    }
}

TEST(Hybrid, OrEnsembleRecoversComplementaryCohorts) {
    // Each predictor finds the positives of one half of the cohort only.
    const Eigen::Index n = 200;
    Eigen::VectorXd truth(n), a(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        truth(i) = i % 3 == 0 ? kNonDropoutLabel : kDropoutLabel;
        const bool pos = truth(i) == kNonDropoutLabel;
        a(i) = pos && i < n / 2 ? kNonDropoutLabel : kDropoutLabel;
        b(i) = pos && i >= n / 2 ? kNonDropoutLabel : kDropoutLabel;
    }
    const auto ea = evaluate_predictor(a, truth).metrics.f1;
    const auto eb = evaluate_predictor(b, truth).metrics.f1;
    const auto both = evaluate_predictor(or_ensemble(a, b), truth).metrics;
    EXPECT_EQ(both.f1, 1.0);
    EXPECT_GT(both.f1, std::max(ea, eb) + 0.3);
}

TEST(Hybrid, ShuffledLabelsGiveChanceLevelTextClassifier) {
    Rng rng(4);
    std::vector<BimodalSequence> seqs;
    Eigen::VectorXd y(400);
    for (int i = 0; i < 400; ++i) {
        y(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const std::string cue = y(i) == 0.0 ? "thanks" : "error";
        std::vector<std::string> words{cue};
        for (int w = 0; w < 6; ++w) words.push_back("w" + std::to_string(rng.index(40)));
        seqs.push_back(pack_sequence(words, {"x", "=", "1"}));
    }
    const std::vector<BimodalSequence> train(seqs.begin(), seqs.begin() + 300), test(seqs.begin() + 300, seqs.end());
    const Eigen::VectorXd ytr = y.head(300), yte = y.tail(100);
    const auto real = LinearTextClassifier::fit(train, ytr, 1);
    EXPECT_EQ(evaluate_predictor(real.predict(test), yte).metrics.accuracy, 1.0);
    Eigen::VectorXd shuffled = ytr;
    std::vector<double> tmp(shuffled.data(), shuffled.data() + shuffled.size());
    rng.shuffle(tmp);
    for (int i = 0; i < 300; ++i) shuffled(i) = tmp[static_cast<std::size_t>(i)];
    const auto null = LinearTextClassifier::fit(train, shuffled, 1);
    EXPECT_LT(std::abs(evaluate_predictor(null.predict(test), yte).metrics.accuracy - 0.5), 0.2);
    EXPECT_THROW(LinearTextClassifier::fit(train, Eigen::VectorXd::Ones(300), 1), ModelError);
}

TEST(Hybrid, GroundTruthSampling) {
    const auto s = sample_ground_truth(10000, 3);
    EXPECT_EQ(s.size(), cochran_n(10000));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
    EXPECT_LT(s.back(), 10000u);
    EXPECT_EQ(sample_ground_truth(10000, 3), s);
    EXPECT_THROW(sample_ground_truth(1, 3), ConfigError);
}

TEST(Hybrid, FilesAndEndToEnd) {
    const auto num = write_file("num.csv", "user,prob\na,0.9\nb,0.2\nc,0.7\n");
    const auto txt = write_file("txt.csv", "a,0.4\nb,0.1\nc,0.8\n");
    const auto lab = write_file("truth.csv", "user,label\na,0\nb,1\nc,0\n");
    const auto report = hybrid_evaluate(read_scores(num.string()), read_scores(txt.string()),
                                        read_labels(lab.string()));
    EXPECT_EQ(report.numeric.metrics.accuracy, 1.0);
    EXPECT_NEAR(report.textual.metrics.accuracy, 2.0 / 3.0, 1e-12);
    ASSERT_EQ(report.comparison.disagreements.size(), 1u);
    EXPECT_EQ(report.comparison.disagreements[0].user_id, "a");
    EXPECT_EQ(report.counts.positive, 2u);
    EXPECT_NE(report.table().find("Accuracy"), std::string::npos);
    const auto bad = write_file("bad.csv", "a,1.5\n");
    EXPECT_THROW(read_scores(bad.string()), ParseError);
    const auto dup = write_file("dup.csv", "a,0.5\na,0.5\n");
    EXPECT_THROW(read_scores(dup.string()), ParseError);
    auto missing = read_scores(num.string());
    missing.erase("c");
    EXPECT_THROW(hybrid_evaluate(missing, read_scores(txt.string()), read_labels(lab.string())), EvaluationError);
    for (const auto& p : {num, txt, lab, bad, dup}) fs::remove(p);
}
