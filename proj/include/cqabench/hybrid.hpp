#pragma once

#include "cqabench/evaluation.hpp"
#include "cqabench/textprep.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cqabench {

// Dropout labels as stored in the RQ3 target column.
inline constexpr double kDropoutLabel = 1.0;
inline constexpr double kNonDropoutLabel = 0.0;

struct PredictorEvaluation {
    ConfusionMatrix matrix;
    MetricSet metrics;
};

// Throws EvaluationError on a length mismatch.
PredictorEvaluation evaluate_predictor(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels,
                                       double positive_label = kNonDropoutLabel);

struct DisagreementRecord {
    std::string user_id;
    double numeric = 0.0;
    double textual = 0.0;
    double truth = 0.0;
    // "numeric" or "textual".
    std::string correct;
};

struct PredictorComparison {
    double agreement = 1.0;
    // numeric minus textual.
    long delta_tp = 0;
    long delta_tn = 0;
    std::vector<DisagreementRecord> disagreements;
};

// `ids` may be empty, in which case row numbers are used.
PredictorComparison compare_predictors(const std::vector<std::string>& ids, const Eigen::VectorXd& numeric,
                                       const Eigen::VectorXd& textual, const Eigen::VectorXd& labels,
                                       double positive_label = kNonDropoutLabel);

// Positive wherever either input predicts the positive class.
Eigen::VectorXd or_ensemble(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double positive_label = kNonDropoutLabel);

struct ClassCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
};

ClassCounts class_counts(const Eigen::VectorXd& labels, double positive_label = kNonDropoutLabel);

struct ExternalClassifierParams {
    int epochs = 8;
    double learning_rate = 1e-5;
    int batch_size = 8;
    std::size_t max_tokens = kMaxSequence;
    std::string output = "sigmoid";
};

struct TextClassifierConfig {
    enum class Kind { External, BuiltinLinear } kind = Kind::BuiltinLinear;
    // Descriptive only; the external model runs outside this library.
    ExternalClassifierParams external;

    nlohmann::json to_json() const;
};

struct LinearTextOptions {
    double l2 = 1e-3;
    double learning_rate = 0.1;
    std::size_t epochs = 30;
};

// Logistic model on log(1 + count) of "w:" (word span) and "c:" (code span)
// tokens. Scores are P(label == positive_label).
class LinearTextClassifier {
public:
    // Throws ModelError unless both classes are present and sizes agree.
    static LinearTextClassifier fit(const std::vector<BimodalSequence>& sequences, const Eigen::VectorXd& labels,
                                    std::uint64_t seed, double positive_label = kNonDropoutLabel,
                                    const LinearTextOptions& options = {});

    double score(const BimodalSequence& seq) const;
    Eigen::VectorXd score(const std::vector<BimodalSequence>& seqs) const;
    // positive_label where score >= threshold, the other label elsewhere.
    Eigen::VectorXd predict(const std::vector<BimodalSequence>& seqs, double threshold = 0.5) const;

    const std::vector<double>& weights() const noexcept { return weights_; }
    double bias() const noexcept { return bias_; }
    double positive_label() const noexcept { return positive_; }

private:
    std::vector<std::pair<std::size_t, double>> features(const BimodalSequence& seq) const;

    std::map<std::string, std::size_t> index_;
    std::vector<double> weights_;
    double bias_ = 0.0;
    double positive_ = kNonDropoutLabel;
};

// Cochran size for the pool, then a seeded uniform draw without
// replacement. Indices are returned sorted. Throws ConfigError unless the
// pool is larger than the sample.
std::vector<std::size_t> sample_ground_truth(std::size_t pool_size, std::uint64_t seed, double margin = 0.05,
                                             double z = 1.96);

// "id,prob" lines (optional header); probabilities are for the positive
// class and must lie in [0, 1]. Throws ParseError on bad lines or repeated ids.
std::map<std::string, double> read_scores(const std::string& path);
void write_scores(const std::string& path, const std::map<std::string, double>& scores);

// "id,label" lines (optional header); labels must be 0 or 1.
std::map<std::string, double> read_labels(const std::string& path);

struct HybridReport {
    double threshold = 0.5;
    double positive_label = kNonDropoutLabel;
    ClassCounts counts;
    PredictorEvaluation numeric;
    PredictorEvaluation textual;
    PredictorComparison comparison;

    nlohmann::json to_json() const;
    // Two confusion matrices side by side plus the metric rows.
    std::string table() const;
};

// Throws EvaluationError listing any id missing from a score file or absent
// from the ground truth.
HybridReport hybrid_evaluate(const std::map<std::string, double>& numeric_scores,
                             const std::map<std::string, double>& textual_scores,
                             const std::map<std::string, double>& truth, double threshold = 0.5,
                             double positive_label = kNonDropoutLabel);

}  // namespace cqabench
