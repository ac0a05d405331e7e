#include "cqabench/hybrid.hpp"

#include "cqabench/error.hpp"
#include "cqabench/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace cqabench {

namespace {

void check_aligned(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b)
        throw EvaluationError(std::string(what) + ": lengths differ (" + std::to_string(a) + " vs " + std::to_string(b) +
                              ")");
}

double other_label(double positive) { return positive == kNonDropoutLabel ? kDropoutLabel : kNonDropoutLabel; }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

PredictorEvaluation evaluate_predictor(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels,
                                       double positive_label) {
    check_aligned(predictions.size(), labels.size(), "evaluate_predictor");
    PredictorEvaluation out;
    out.matrix = ConfusionMatrix::from(labels, predictions, positive_label);
    out.metrics = score(out.matrix);
    return out;
}

PredictorComparison compare_predictors(const std::vector<std::string>& ids, const Eigen::VectorXd& numeric,
                                       const Eigen::VectorXd& textual, const Eigen::VectorXd& labels,
                                       double positive_label) {
    check_aligned(numeric.size(), textual.size(), "compare_predictors");
    check_aligned(numeric.size(), labels.size(), "compare_predictors");
    if (!ids.empty()) check_aligned(static_cast<Eigen::Index>(ids.size()), labels.size(), "compare_predictors ids");
    if (labels.size() == 0) throw EvaluationError("compare_predictors: empty input");
    PredictorComparison out;
    std::size_t same = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (numeric(i) == textual(i)) {
            ++same;
            continue;
        }
        DisagreementRecord r;
        r.user_id = ids.empty() ? std::to_string(i) : ids[static_cast<std::size_t>(i)];
        r.numeric = numeric(i);
        r.textual = textual(i);
        r.truth = labels(i);
        r.correct = numeric(i) == labels(i) ? "numeric" : "textual";
        out.disagreements.push_back(std::move(r));
    }
    out.agreement = static_cast<double>(same) / static_cast<double>(labels.size());
    const ConfusionMatrix a = ConfusionMatrix::from(labels, numeric, positive_label);
    const ConfusionMatrix b = ConfusionMatrix::from(labels, textual, positive_label);
    out.delta_tp = static_cast<long>(a.tp) - static_cast<long>(b.tp);
    out.delta_tn = static_cast<long>(a.tn) - static_cast<long>(b.tn);
    return out;
}

Eigen::VectorXd or_ensemble(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double positive_label) {
    check_aligned(a.size(), b.size(), "or_ensemble");
    Eigen::VectorXd out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out(i) = (a(i) == positive_label || b(i) == positive_label) ? positive_label : other_label(positive_label);
    return out;
}

ClassCounts class_counts(const Eigen::VectorXd& labels, double positive_label) {
    ClassCounts c;
    for (Eigen::Index i = 0; i < labels.size(); ++i) (labels(i) == positive_label ? c.positive : c.negative)++;
    return c;
}

nlohmann::json TextClassifierConfig::to_json() const {
    return {{"kind", kind == Kind::External ? "external-fine-tuned" : "builtin-linear"},
            {"external",
             {{"epochs", external.epochs},
              {"learning_rate", external.learning_rate},
              {"batch_size", external.batch_size},
              {"max_tokens", external.max_tokens},
              {"output", external.output}}}};
}

namespace {

std::map<std::string, double> token_counts(const BimodalSequence& seq) {
    std::map<std::string, double> counts;
    for (std::size_t i = seq.word_span.first; i < seq.word_span.second; ++i) counts["w:" + seq.tokens[i]] += 1.0;
    for (std::size_t i = seq.code_span.first; i < seq.code_span.second; ++i) counts["c:" + seq.tokens[i]] += 1.0;
    return counts;
}

}  // namespace

std::vector<std::pair<std::size_t, double>> LinearTextClassifier::features(const BimodalSequence& seq) const {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [token, count] : token_counts(seq)) {
        const auto it = index_.find(token);
        if (it != index_.end()) out.emplace_back(it->second, std::log1p(count));
    }
    return out;
}

LinearTextClassifier LinearTextClassifier::fit(const std::vector<BimodalSequence>& sequences,
                                               const Eigen::VectorXd& labels, std::uint64_t seed, double positive_label,
                                               const LinearTextOptions& options) {
    if (static_cast<Eigen::Index>(sequences.size()) != labels.size())
        throw ModelError("text classifier: " + std::to_string(sequences.size()) + " sequences but " +
                         std::to_string(labels.size()) + " labels");
    const ClassCounts counts = class_counts(labels, positive_label);
    if (counts.positive == 0 || counts.negative == 0)
        throw ModelError("text classifier needs both classes in the training labels");
    if (!(options.l2 >= 0.0) || !(options.learning_rate > 0.0) || options.epochs == 0)
        throw ConfigError("text classifier options must have l2 >= 0, learning_rate > 0, epochs >= 1");

    LinearTextClassifier model;
    model.positive_ = positive_label;
    for (const auto& seq : sequences)
        for (const auto& [token, count] : token_counts(seq)) model.index_.try_emplace(token, 0);
    std::size_t next = 0;
    for (auto& [token, idx] : model.index_) idx = next++;
    model.weights_.assign(next, 0.0);

    std::vector<std::vector<std::pair<std::size_t, double>>> X;
    X.reserve(sequences.size());
    for (const auto& seq : sequences) X.push_back(model.features(seq));

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        const double lr = options.learning_rate / (1.0 + 0.1 * static_cast<double>(epoch));
        for (std::size_t i : order) {
            double z = model.bias_;
            for (const auto& [j, v] : X[i]) z += model.weights_[j] * v;
            const double y = labels(static_cast<Eigen::Index>(i)) == positive_label ? 1.0 : 0.0;
            const double g = sigmoid(z) - y;
            model.bias_ -= lr * g;
            for (const auto& [j, v] : X[i]) model.weights_[j] -= lr * (g * v + options.l2 * model.weights_[j]);
        }
    }
    return model;
}

double LinearTextClassifier::score(const BimodalSequence& seq) const {
    double z = bias_;
    for (const auto& [j, v] : features(seq)) z += weights_[j] * v;
    return sigmoid(z);
}

Eigen::VectorXd LinearTextClassifier::score(const std::vector<BimodalSequence>& seqs) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(seqs.size()));
    for (std::size_t i = 0; i < seqs.size(); ++i) out(static_cast<Eigen::Index>(i)) = score(seqs[i]);
    return out;
}

Eigen::VectorXd LinearTextClassifier::predict(const std::vector<BimodalSequence>& seqs, double threshold) const {
    Eigen::VectorXd s = score(seqs);
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = s(i) >= threshold ? positive_ : other_label(positive_);
    return s;
}

std::vector<std::size_t> sample_ground_truth(std::size_t pool_size, std::uint64_t seed, double margin, double z) {
    const std::size_t n = cochran_n(static_cast<double>(std::max<std::size_t>(pool_size, 1)), 0.5, margin, z);
    if (pool_size <= n)
        throw ConfigError("pool of " + std::to_string(pool_size) + " is not larger than the sample size " +
                          std::to_string(n));
    // Partial Fisher-Yates over a sparse permutation.
    std::map<std::size_t, std::size_t> swapped;
    auto at = [&](std::size_t i) {
        const auto it = swapped.find(i);
        return it == swapped.end() ? i : it->second;
    };
    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.index(pool_size - i);
        const std::size_t vi = at(i), vj = at(j);
        swapped[j] = vi;
        swapped[i] = vj;
        out.push_back(vj);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::map<std::string, double> read_pairs(const std::string& path, const char* kind,
                                         const std::function<void(double, std::size_t)>& check) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + std::string(kind) + " file " + path, 0);
    std::map<std::string, double> out;
    std::size_t row = 0;
    for (std::string line; std::getline(in, line);) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_record(line, ',');
        if (fields.size() != 2) throw ParseError(path + ": expected 2 fields, got " + std::to_string(fields.size()), row);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            if (row == 1) continue;  // header
            throw ParseError(path + ": '" + fields[1] + "' is not a number", row);
        }
        check(value, row);
        if (!out.emplace(fields[0], value).second) throw ParseError(path + ": repeated id " + fields[0], row);
    }
    return out;
}

}  // namespace

std::map<std::string, double> read_scores(const std::string& path) {
    return read_pairs(path, "score", [&](double p, std::size_t row) {
        if (!(p >= 0.0 && p <= 1.0)) throw ParseError(path + ": probability outside [0, 1]", row);
    });
}

std::map<std::string, double> read_labels(const std::string& path) {
    return read_pairs(path, "label", [&](double y, std::size_t row) {
        if (y != 0.0 && y != 1.0) throw ParseError(path + ": label must be 0 or 1", row);
    });
}

void write_scores(const std::string& path, const std::map<std::string, double>& scores) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write score file " + path);
    out << "id,prob\n" << std::setprecision(17);
    for (const auto& [id, p] : scores) out << id << ',' << p << '\n';
}

namespace {

nlohmann::json matrix_json(const PredictorEvaluation& e) {
    return {{"tp", e.matrix.tp},
            {"fn", e.matrix.fn},
            {"fp", e.matrix.fp},
            {"tn", e.matrix.tn},
            {"accuracy", e.metrics.accuracy},
            {"precision", e.metrics.precision},
            {"recall", e.metrics.recall},
            {"f1", e.metrics.f1}};
}

std::string fixed3(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

}  // namespace

nlohmann::json HybridReport::to_json() const {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : comparison.disagreements)
        records.push_back({{"id", r.user_id},
                           {"numeric", r.numeric},
                           {"textual", r.textual},
                           {"truth", r.truth},
                           {"correct", r.correct}});
    return {{"threshold", threshold},
            {"positive_label", positive_label},
            {"class_counts", {{"positive", counts.positive}, {"negative", counts.negative}}},
            {"numeric", matrix_json(numeric)},
            {"textual", matrix_json(textual)},
            {"agreement", comparison.agreement},
            {"delta_tp", comparison.delta_tp},
            {"delta_tn", comparison.delta_tn},
            {"disagreements", records}};
}

std::string HybridReport::table() const {
    std::ostringstream os;
    auto row = [&](const std::string& label, const std::string& a, const std::string& b, const std::string& c,
                   const std::string& d) {
        os << std::left << std::setw(14) << label << std::right << std::setw(10) << a << std::setw(10) << b
           << std::setw(12) << c << std::setw(10) << d << '\n';
    };
    row("", "Numeric", "", "Textual", "");
    row("", "pred +", "pred -", "pred +", "pred -");
    row("actual +", std::to_string(numeric.matrix.tp), std::to_string(numeric.matrix.fn),
        std::to_string(textual.matrix.tp), std::to_string(textual.matrix.fn));
    row("actual -", std::to_string(numeric.matrix.fp), std::to_string(numeric.matrix.tn),
        std::to_string(textual.matrix.fp), std::to_string(textual.matrix.tn));
    row("Accuracy", fixed3(numeric.metrics.accuracy), "", fixed3(textual.metrics.accuracy), "");
    row("F1", fixed3(numeric.metrics.f1), "", fixed3(textual.metrics.f1), "");
    os << "positive class: " << (positive_label == kNonDropoutLabel ? "non-dropout" : "dropout") << " ("
       << counts.positive << " positive, " << counts.negative << " negative)\n";
    os << "agreement: " << fixed3(comparison.agreement) << ", disagreements: " << comparison.disagreements.size()
       << '\n';
    return os.str();
}

HybridReport hybrid_evaluate(const std::map<std::string, double>& numeric_scores,
                             const std::map<std::string, double>& textual_scores,
                             const std::map<std::string, double>& truth, double threshold, double positive_label) {
    std::set<std::string> unknown;
    for (const auto* scores : {&numeric_scores, &textual_scores}) {
        for (const auto& [id, p] : *scores)
            if (!truth.count(id)) unknown.insert(id);
        for (const auto& [id, y] : truth)
            if (!scores->count(id)) unknown.insert(id);
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& id : unknown) list += (list.empty() ? "" : ", ") + id;
        throw EvaluationError("unresolvable ids: " + list);
    }
    if (truth.empty()) throw EvaluationError("ground truth is empty");
    const auto n = static_cast<Eigen::Index>(truth.size());
    std::vector<std::string> ids;
    Eigen::VectorXd y(n), a(n), b(n);
    const double negative = other_label(positive_label);
    Eigen::Index i = 0;
    for (const auto& [id, label] : truth) {
        ids.push_back(id);
        y(i) = label;
        a(i) = numeric_scores.at(id) >= threshold ? positive_label : negative;
        b(i) = textual_scores.at(id) >= threshold ? positive_label : negative;
        ++i;
    }
    HybridReport r;
    r.threshold = threshold;
    r.positive_label = positive_label;
    r.counts = class_counts(y, positive_label);
    r.numeric = evaluate_predictor(a, y, positive_label);
    r.textual = evaluate_predictor(b, y, positive_label);
    r.comparison = compare_predictors(ids, a, b, y, positive_label);
    return r;
}

}  // namespace cqabench
