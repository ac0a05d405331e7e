#pragma once

#include "cqabench/models/model.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string_view>
#include <vector>

namespace cqabench {

class Rng;

enum class Activation { Sigmoid, Relu, LeakyRelu };
enum class Optimizer { Adam, RMSProp, SgdMomentum };
enum class LrSchedule { Fixed, ExponentialDecay };

std::string_view to_string(Activation a);
std::string_view to_string(Optimizer o);
std::string_view to_string(LrSchedule s);

struct NNArchitecture {
    int id = 4;
    std::vector<std::size_t> units;
    Activation activation = Activation::LeakyRelu;
    double slope = 0.01;
    Optimizer optimizer = Optimizer::SgdMomentum;
    double momentum = 0.9;
    // Applied after every hidden layer during training only.
    double dropout = 0.0;
    LrSchedule schedule = LrSchedule::Fixed;
    // Per-epoch multiplier under ExponentialDecay.
    double decay = 0.99;
    std::size_t patience = 10;

    std::size_t hidden_layers() const noexcept { return units.size(); }
};

// Ids 1-4; throws ConfigError otherwise.
const NNArchitecture& nn_architecture(int id);
void validate_architecture(const NNArchitecture& arch);

// Dense feed-forward network with one output unit. Classification applies a
// sigmoid to the output and uses binary cross-entropy; regression is linear
// with mean squared error.
class Network {
public:
    // All weights start at zero; call initialize() for a random start.
    Network(NNArchitecture arch, std::size_t inputs, bool classification);

    void initialize(Rng& rng);

    const NNArchitecture& architecture() const noexcept { return arch_; }
    bool classification() const noexcept { return classification_; }
    std::size_t inputs() const noexcept { return inputs_; }
    // [inputs, hidden..., 1]
    std::vector<std::size_t> layer_sizes() const;

    // Inference pass, dropout disabled. Probabilities for classification.
    Eigen::VectorXd forward(const Eigen::MatrixXd& X) const;
    double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;
    // d loss / d parameters, in parameters() order, dropout disabled.
    Eigen::VectorXd gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);

    nlohmann::json save() const;
    static Network load(const nlohmann::json& j);

private:
    friend class NetworkTrainer;

    Eigen::MatrixXd activate(const Eigen::MatrixXd& Z) const;
    Eigen::MatrixXd activate_derivative(const Eigen::MatrixXd& Z) const;
    Eigen::VectorXd output_logits(const Eigen::MatrixXd& X) const;
    // Loss, with gradients written into gW/gb; dropout masks drawn from
    // `rng` when non-null.
    double backprop(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Rng* rng, std::vector<Eigen::MatrixXd>& gW,
                    std::vector<Eigen::VectorXd>& gb) const;

    NNArchitecture arch_;
    std::size_t inputs_;
    bool classification_;
    // W[l] is (fan_in x fan_out); rows of X are samples.
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
};

struct TrainOptions {
    double learning_rate = 1e-3;
    std::size_t max_epochs = 200;
    std::size_t batch_size = 32;
    // Held out for early stopping; ignored below 20 rows.
    double validation_fraction = 0.1;
};

struct TrainResult {
    std::size_t epochs = 0;
    double best_loss = 0.0;
};

// Mini-batch training with the architecture's optimizer, schedule, dropout
// and patience. Restores the best weights seen on the held-out rows. Throws
// NonConvergenceError when the loss becomes non-finite.
TrainResult train(Network& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainOptions& options,
                  Rng& rng);

// Same architecture, randomly initialized and never trained. Regression
// outputs are mapped back through the training target's mean and scale.
FittedModel frozen_network_baseline(const NNArchitecture& arch, Task task, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y, std::uint64_t seed = kDefaultModelSeed);

}  // namespace cqabench
