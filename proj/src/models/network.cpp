#include "cqabench/models/network.hpp"

#include "cqabench/error.hpp"
#include "cqabench/random.hpp"
#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cqabench {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky-relu";
    }
    return "?";
}

std::string_view to_string(Optimizer o) {
    switch (o) {
        case Optimizer::Adam: return "adam";
        case Optimizer::RMSProp: return "rmsprop";
        case Optimizer::SgdMomentum: return "sgd-momentum";
    }
    return "?";
}

std::string_view to_string(LrSchedule s) {
    switch (s) {
        case LrSchedule::Fixed: return "fixed";
        case LrSchedule::ExponentialDecay: return "exponential-decay";
    }
    return "?";
}

namespace {

std::vector<NNArchitecture> make_architectures() {
    NNArchitecture a1;
    a1.id = 1;
    a1.units = {8, 8};
    a1.activation = Activation::Sigmoid;
    a1.optimizer = Optimizer::Adam;

    NNArchitecture a2;
    a2.id = 2;
    a2.units = {512, 512, 512};
    a2.activation = Activation::Relu;
    a2.optimizer = Optimizer::RMSProp;

    NNArchitecture a3;
    a3.id = 3;
    a3.units = {128, 64};
    a3.activation = Activation::Relu;
    a3.optimizer = Optimizer::Adam;

    NNArchitecture a4;
    a4.id = 4;
    a4.units = {64, 64, 64};
    a4.activation = Activation::LeakyRelu;
    a4.slope = 0.01;
    a4.optimizer = Optimizer::SgdMomentum;
    a4.momentum = 0.9;
    a4.dropout = 0.2;
    a4.schedule = LrSchedule::ExponentialDecay;
    return {a1, a2, a3, a4};
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Eigen::MatrixXd affine(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
    Eigen::MatrixXd Z = H * W;
    Z.rowwise() += b.transpose();
    return Z;
}

}  // namespace

const NNArchitecture& nn_architecture(int id) {
    static const std::vector<NNArchitecture> all = make_architectures();
    if (id < 1 || id > static_cast<int>(all.size()))
        throw ConfigError("unknown network architecture id " + std::to_string(id));
    return all[static_cast<std::size_t>(id - 1)];
}

void validate_architecture(const NNArchitecture& arch) {
    if (arch.units.empty()) throw ConfigError("network needs at least one hidden layer");
    for (auto u : arch.units)
        if (u == 0) throw ConfigError("hidden layer with zero units");
    if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!(arch.slope >= 0.0)) throw ConfigError("leaky slope must be non-negative");
    if (!(arch.momentum >= 0.0 && arch.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(arch.decay > 0.0 && arch.decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
}

Network::Network(NNArchitecture arch, std::size_t inputs, bool classification)
    : arch_(std::move(arch)), inputs_(inputs), classification_(classification) {
    validate_architecture(arch_);
    if (inputs_ == 0) throw ModelError("network needs at least one input column");
    const auto sizes = layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        W_.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes[l]), static_cast<Eigen::Index>(sizes[l + 1])));
        b_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1])));
    }
}

std::vector<std::size_t> Network::layer_sizes() const {
    std::vector<std::size_t> s{inputs_};
    s.insert(s.end(), arch_.units.begin(), arch_.units.end());
    s.push_back(1);
    return s;
}

// He-uniform for rectifiers, Glorot-uniform for sigmoid and the output layer.
void Network::initialize(Rng& rng) {
    for (std::size_t l = 0; l < W_.size(); ++l) {
        const auto fan_in = static_cast<double>(W_[l].rows());
        const auto fan_out = static_cast<double>(W_[l].cols());
        const bool output = l + 1 == W_.size();
        const double limit = (!output && arch_.activation != Activation::Sigmoid) ? std::sqrt(6.0 / fan_in)
                                                                                   : std::sqrt(6.0 / (fan_in + fan_out));
        for (Eigen::Index j = 0; j < W_[l].cols(); ++j)
            for (Eigen::Index i = 0; i < W_[l].rows(); ++i) W_[l](i, j) = rng.uniform(-limit, limit);
        b_[l].setZero();
    }
}

Eigen::MatrixXd Network::activate(const Eigen::MatrixXd& Z) const {
    switch (arch_.activation) {
        case Activation::Sigmoid: return Z.unaryExpr([](double z) { return detail::sigmoid(z); });
        case Activation::Relu: return Z.cwiseMax(0.0);
        case Activation::LeakyRelu: {
            const double s = arch_.slope;
            return Z.unaryExpr([s](double z) { return z > 0.0 ? z : s * z; });
        }
    }
    return Z;
}

Eigen::MatrixXd Network::activate_derivative(const Eigen::MatrixXd& Z) const {
    switch (arch_.activation) {
        case Activation::Sigmoid:
            return Z.unaryExpr([](double z) {
                const double s = detail::sigmoid(z);
                return s * (1.0 - s);
            });
        case Activation::Relu: return Z.unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; });
        case Activation::LeakyRelu: {
            const double s = arch_.slope;
            return Z.unaryExpr([s](double z) { return z > 0.0 ? 1.0 : s; });
        }
    }
    return Z;
}

Eigen::VectorXd Network::output_logits(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != inputs_)
        throw ModelError("network expects " + std::to_string(inputs_) + " columns, got " + std::to_string(X.cols()));
    Eigen::MatrixXd H = X;
    for (std::size_t l = 0; l + 1 < W_.size(); ++l) H = activate(affine(H, W_[l], b_[l]));
    return affine(H, W_.back(), b_.back()).col(0);
}

Eigen::VectorXd Network::forward(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd z = output_logits(X);
    if (classification_) z = z.unaryExpr([](double v) { return detail::sigmoid(v); });
    return z;
}

double Network::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd z = output_logits(X);
    const auto n = static_cast<double>(z.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (classification_)
            total += softplus(z(i)) - y(i) * z(i);
        else
            total += (z(i) - y(i)) * (z(i) - y(i));
    }
    return total / n;
}

double Network::backprop(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Rng* rng, std::vector<Eigen::MatrixXd>& gW,
                         std::vector<Eigen::VectorXd>& gb) const {
    const std::size_t L = W_.size();
    const Eigen::Index n = X.rows();
    std::vector<Eigen::MatrixXd> Hs{X};
    std::vector<Eigen::MatrixXd> Zs;
    std::vector<Eigen::MatrixXd> masks;
    const double keep = 1.0 - arch_.dropout;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        Zs.push_back(affine(Hs.back(), W_[l], b_[l]));
        Eigen::MatrixXd H = activate(Zs.back());
        if (rng != nullptr && arch_.dropout > 0.0) {
            Eigen::MatrixXd m(H.rows(), H.cols());
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            H = H.cwiseProduct(m);
            masks.push_back(std::move(m));
        }
        Hs.push_back(std::move(H));
    }
    const Eigen::VectorXd z = affine(Hs.back(), W_.back(), b_.back()).col(0);

    double total = 0.0;
    Eigen::MatrixXd delta(n, 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (classification_) {
            total += softplus(z(i)) - y(i) * z(i);
            delta(i, 0) = (detail::sigmoid(z(i)) - y(i)) * inv_n;
        } else {
            const double r = z(i) - y(i);
            total += r * r;
            delta(i, 0) = 2.0 * r * inv_n;
        }
    }

    gW.resize(L);
    gb.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        gW[l] = Hs[l].transpose() * delta;
        gb[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd up = delta * W_[l].transpose();
        if (!masks.empty()) up = up.cwiseProduct(masks[l - 1]);
        delta = up.cwiseProduct(activate_derivative(Zs[l - 1]));
    }
    return total * inv_n;
}

Eigen::VectorXd Network::gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> gW;
    std::vector<Eigen::VectorXd> gb;
    backprop(X, y, nullptr, gW, gb);
    Eigen::VectorXd g(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        g.segment(k, gW[l].size()) = gW[l].reshaped();
        k += gW[l].size();
        g.segment(k, gb[l].size()) = gb[l];
        k += gb[l].size();
    }
    return g;
}

std::size_t Network::parameter_count() const {
    std::size_t c = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) c += static_cast<std::size_t>(W_[l].size() + b_[l].size());
    return c;
}

Eigen::VectorXd Network::parameters() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        t.segment(k, W_[l].size()) = W_[l].reshaped();
        k += W_[l].size();
        t.segment(k, b_[l].size()) = b_[l];
        k += b_[l].size();
    }
    return t;
}

void Network::set_parameters(const Eigen::VectorXd& theta) {
    if (static_cast<std::size_t>(theta.size()) != parameter_count())
        throw ModelError("parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        W_[l].reshaped() = theta.segment(k, W_[l].size());
        k += W_[l].size();
        b_[l] = theta.segment(k, b_[l].size());
        k += b_[l].size();
    }
}

nlohmann::json Network::save() const {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < W_.size(); ++l)
        layers.push_back({{"W", detail::matrix_to_json(W_[l])}, {"b", detail::vector_to_json(b_[l])}});
    return {{"architecture", arch_.id},
            {"units", arch_.units},
            {"activation", to_string(arch_.activation)},
            {"slope", arch_.slope},
            {"inputs", inputs_},
            {"classification", classification_},
            {"layers", layers}};
}

Network Network::load(const nlohmann::json& j) {
    NNArchitecture arch = nn_architecture(j.at("architecture").get<int>());
    if (j.at("units").get<std::vector<std::size_t>>() != arch.units) throw ModelError("malformed serialized network");
    Network net(arch, j.at("inputs").get<std::size_t>(), j.at("classification").get<bool>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.W_.size()) throw ModelError("malformed serialized network");
    for (std::size_t l = 0; l < net.W_.size(); ++l) {
        Eigen::MatrixXd W = detail::matrix_from_json(layers[l].at("W"));
        Eigen::VectorXd b = detail::vector_from_json(layers[l].at("b"));
        if (W.rows() != net.W_[l].rows() || W.cols() != net.W_[l].cols() || b.size() != net.b_[l].size())
            throw ModelError("malformed serialized network");
        net.W_[l] = std::move(W);
        net.b_[l] = std::move(b);
    }
    return net;
}

class NetworkTrainer {
public:
    NetworkTrainer(Network& net, double lr) : net_(net), lr_(lr) {
        for (std::size_t l = 0; l < net.W_.size(); ++l) {
            mW_.push_back(Eigen::MatrixXd::Zero(net.W_[l].rows(), net.W_[l].cols()));
            vW_.push_back(Eigen::MatrixXd::Zero(net.W_[l].rows(), net.W_[l].cols()));
            mb_.push_back(Eigen::VectorXd::Zero(net.b_[l].size()));
            vb_.push_back(Eigen::VectorXd::Zero(net.b_[l].size()));
        }
    }

    double step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Rng& rng) {
        const double loss = net_.backprop(X, y, &rng, gW_, gb_);
        ++t_;
        for (std::size_t l = 0; l < net_.W_.size(); ++l) {
            update(net_.W_[l], gW_[l], mW_[l], vW_[l]);
            update(net_.b_[l], gb_[l], mb_[l], vb_[l]);
        }
        return loss;
    }

    void decay(double factor) { lr_ *= factor; }

private:
    template <typename M>
    void update(M& p, const M& g, M& m, M& v) {
        const auto& a = net_.arch_;
        switch (a.optimizer) {
            case Optimizer::Adam: {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
                const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
                const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
                p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
                break;
            }
            case Optimizer::RMSProp: {
                constexpr double rho = 0.9, eps = 1e-7;
                v = rho * v + (1.0 - rho) * g.cwiseAbs2();
                p.array() -= lr_ * g.array() / (v.array().sqrt() + eps);
                break;
            }
            case Optimizer::SgdMomentum:
                m = a.momentum * m - lr_ * g;
                p += m;
                break;
        }
    }

    Network& net_;
    double lr_;
    std::uint64_t t_ = 0;
    std::vector<Eigen::MatrixXd> mW_, vW_, gW_;
    std::vector<Eigen::VectorXd> mb_, vb_, gb_;
};

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows, std::size_t begin,
                          std::size_t end) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), X.cols());
    for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows, std::size_t begin,
                     std::size_t end) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) out(static_cast<Eigen::Index>(i - begin)) = y(rows[i]);
    return out;
}

}  // namespace

TrainResult train(Network& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainOptions& options,
                  Rng& rng) {
    if (X.rows() == 0 || X.rows() != y.size()) throw ModelError("network training data is empty or misaligned");
    if (options.batch_size == 0 || options.max_epochs == 0 || !(options.learning_rate > 0.0))
        throw ConfigError("invalid network training options");

    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t n_val = 0;
    if (n >= 20 && options.validation_fraction > 0.0)
        n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(n))));
    const std::size_t n_fit = n - n_val;
    std::vector<Eigen::Index> fit_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
    const Eigen::MatrixXd Xv = take_rows(X, order, n_fit, n);
    const Eigen::VectorXd yv = take(y, order, n_fit, n);

    NetworkTrainer trainer(net, options.learning_rate);
    const auto& arch = net.architecture();
    TrainResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best = net.parameters();
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        rng.shuffle(fit_rows);
        double fit_loss = 0.0;
        for (std::size_t s = 0; s < n_fit; s += options.batch_size) {
            const std::size_t e = std::min(n_fit, s + options.batch_size);
            const double l = trainer.step(take_rows(X, fit_rows, s, e), take(y, fit_rows, s, e), rng);
            fit_loss += l * static_cast<double>(e - s);
        }
        fit_loss /= static_cast<double>(n_fit);
        const double monitored = n_val > 0 ? net.loss(Xv, yv) : fit_loss;
        if (!std::isfinite(monitored) || !std::isfinite(fit_loss))
            throw NonConvergenceError("network training diverged (non-finite loss at epoch " + std::to_string(epoch + 1) + ")");
        result.epochs = epoch + 1;
        if (monitored < result.best_loss) {
            result.best_loss = monitored;
            best = net.parameters();
            stale = 0;
        } else if (++stale >= arch.patience) {
            break;
        }
        if (arch.schedule == LrSchedule::ExponentialDecay) trainer.decay(arch.decay);
    }
    net.set_parameters(best);
    return result;
}

namespace detail {

namespace {

class NetworkEstimator final : public Estimator {
public:
    NetworkEstimator(Network net, double y_mean, double y_scale)
        : net_(std::move(net)), mean_(y_mean), scale_(y_scale) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out = net_.forward(X);
        if (!net_.classification()) out = (out.array() * scale_ + mean_).matrix();
        return out;
    }

    nlohmann::json save() const override {
        return {{"kind", "network"}, {"network", net_.save()}, {"y_mean", mean_}, {"y_scale", scale_}};
    }

private:
    Network net_;
    double mean_;
    double scale_;
};

std::pair<double, double> target_scaling(const Eigen::VectorXd& y, bool classification) {
    if (classification) return {0.0, 1.0};
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    return {mean, sd > 0.0 ? sd : 1.0};
}

}  // namespace

EstimatorPtr fit_network(const FitContext& ctx) {
    const int id = std::stoi(ctx.choice("architecture"));
    const bool cls = ctx.task == Task::Classification;
    Network net(nn_architecture(id), static_cast<std::size_t>(ctx.X.cols()), cls);
    net.initialize(ctx.rng);
    const auto [mean, scale] = target_scaling(ctx.y, cls);
    const Eigen::VectorXd target = cls ? ctx.y : Eigen::VectorXd((ctx.y.array() - mean) / scale);
    TrainOptions opts;
    opts.learning_rate = ctx.real("learning_rate");
    opts.max_epochs = static_cast<std::size_t>(ctx.integer("max_epochs"));
    opts.batch_size = static_cast<std::size_t>(ctx.integer("batch_size"));
    train(net, ctx.X, target, opts, ctx.rng);
    return std::make_unique<NetworkEstimator>(std::move(net), mean, scale);
}

EstimatorPtr load_network(const nlohmann::json& j) {
    return std::make_unique<NetworkEstimator>(Network::load(j.at("network")), j.at("y_mean").get<double>(),
                                              j.at("y_scale").get<double>());
}

}  // namespace detail

FittedModel frozen_network_baseline(const NNArchitecture& arch, Task task, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y, std::uint64_t seed) {
    if (X.rows() == 0 || X.rows() != y.size()) throw ModelError("baseline data is empty or misaligned");
    const bool cls = task == Task::Classification;
    Network net(arch, static_cast<std::size_t>(X.cols()), cls);
    Rng rng(seed);
    net.initialize(rng);
    const auto [mean, scale] = detail::target_scaling(y, cls);
    return FittedModel("Frozen Neural Network", task, seed, static_cast<std::size_t>(X.rows()),
                       static_cast<std::size_t>(X.cols()),
                       std::make_shared<detail::NetworkEstimator>(std::move(net), mean, scale));
}

}  // namespace cqabench
