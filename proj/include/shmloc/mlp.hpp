#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shmloc/errors.hpp"
#include "shmloc/linalg.hpp"
#include "shmloc/parallel.hpp"
#include "shmloc/rng.hpp"

namespace shmloc::mlp {

enum class Activation { Tanh, Logistic, Identity, Softmax };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Logistic: return "logistic";
        case Activation::Identity: return "identity";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "logistic") return Activation::Logistic;
    if (name == "identity") return Activation::Identity;
    if (name == "softmax") return Activation::Softmax;
    raise(ErrorKind::Config, "unknown activation '" + name + "'");
}

/// Two-layer perceptron: y = softmax(W2 f1(W1 x + b1) + b2). When
/// frozen_first_layer is set, training leaves W1 and b1 bit-identical.
struct MlpModel {
    Matrix w1;  // h x d
    Vector b1;  // h
    Matrix w2;  // c x h
    Vector b2;  // c
    Activation hidden_activation = Activation::Tanh;
    Activation output_activation = Activation::Softmax;
    bool frozen_first_layer = false;

    std::size_t inputs() const { return w1.cols(); }
    std::size_t hidden() const { return w1.rows(); }
    std::size_t outputs() const { return w2.rows(); }

    bool operator==(const MlpModel&) const = default;
};

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t max_epochs = 1000;
    double early_stop_rel = 1e-3;   // relative validation-loss improvement threshold
    std::size_t early_stop_patience = 5;
    std::size_t restarts = 10;
    double init_std = 0.1;
    std::uint64_t seed = 0;
};

struct LossHistory {
    Vector train_loss;
    Vector val_loss;
    std::size_t stopped_epoch = 0;  // number of epochs actually run
};

/// Gradient of the loss w.r.t. the model parameters. For frozen models
/// the first-layer slots are absent rather than zero.
struct MlpGradients {
    std::optional<Matrix> w1;
    std::optional<Vector> b1;
    Matrix w2;
    Vector b2;
};

inline std::size_t parameter_count(std::size_t d, std::size_t h, std::size_t c) {
    return h * d + h + c * h + c;
}

/// All weights and biases i.i.d. Normal(0, init_std^2). Draw order is
/// W1 row-major, b1, W2 row-major, b2.
inline MlpModel init_random(std::size_t d, std::size_t h, std::size_t c,
                            double init_std, Rng& rng) {
    if (d < 1 || h < 1 || c < 1) {
        raise(ErrorKind::Precondition, "init_random: dimensions must be >= 1");
    }
    if (!(init_std > 0.0)) {
        raise(ErrorKind::Precondition, "init_random: init_std must be positive");
    }
    MlpModel model;
    model.w1 = Matrix(h, d);
    model.b1.resize(h);
    model.w2 = Matrix(c, h);
    model.b2.resize(c);
    for (double& v : model.w1.data()) v = init_std * rng.normal();
    for (double& v : model.b1) v = init_std * rng.normal();
    for (double& v : model.w2.data()) v = init_std * rng.normal();
    for (double& v : model.b2) v = init_std * rng.normal();
    return model;
}

namespace detail {

inline double apply_activation(Activation act, double z) {
    switch (act) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Logistic: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Identity: return z;
        case Activation::Softmax: break;  // output-layer only
    }
    raise(ErrorKind::Config, "softmax is not a hidden activation");
}

/// Derivative expressed through the activation value a = f(z).
inline double activation_derivative(Activation act, double a) {
    switch (act) {
        case Activation::Tanh: return 1.0 - a * a;
        case Activation::Logistic: return a * (1.0 - a);
        case Activation::Identity: return 1.0;
        case Activation::Softmax: break;
    }
    raise(ErrorKind::Config, "softmax is not a hidden activation");
}

/// Max-subtracted softmax; safe for |logit| up to overflow range.
inline void softmax_inplace(Vector& logits) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double z : logits) max_logit = std::max(max_logit, z);
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - max_logit);
        sum += z;
    }
    for (double& z : logits) z /= sum;
}

} // namespace detail

/// Hidden activations f1(W1 x + b1).
inline Vector hidden_activations(const MlpModel& model, const Vector& x) {
    Vector a(model.hidden());
    for (std::size_t i = 0; i < model.hidden(); ++i) {
        double z = model.b1[i];
        for (std::size_t j = 0; j < model.inputs(); ++j) z += model.w1(i, j) * x[j];
        a[i] = detail::apply_activation(model.hidden_activation, z);
    }
    return a;
}

/// Class-membership probability vector for one input.
inline Vector forward(const MlpModel& model, const Vector& x) {
    if (x.size() != model.inputs()) {
        raise(ErrorKind::Bounds, "forward: input dimension " + std::to_string(x.size()) +
                                     " does not match model inputs " +
                                     std::to_string(model.inputs()));
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            raise(ErrorKind::Precondition, "forward: non-finite input");
        }
    }
    const Vector a = hidden_activations(model, x);
    Vector logits(model.outputs());
    for (std::size_t i = 0; i < model.outputs(); ++i) {
        double z = model.b2[i];
        for (std::size_t j = 0; j < model.hidden(); ++j) z += model.w2(i, j) * a[j];
        logits[i] = z;
    }
    detail::softmax_inplace(logits);
    return logits;
}

/// Probability rows for a batch; also exposes the hidden activations the
/// backward pass reuses.
inline void forward_batch(const MlpModel& model, const Matrix& x,
                          Matrix& probabilities, Matrix& hidden) {
    const std::size_t n = x.rows();
    probabilities = Matrix(n, model.outputs());
    hidden = Matrix(n, model.hidden());
    for (std::size_t r = 0; r < n; ++r) {
        const Vector a = hidden_activations(model, x.row(r));
        hidden.set_row(r, a);
        Vector logits(model.outputs());
        for (std::size_t i = 0; i < model.outputs(); ++i) {
            double z = model.b2[i];
            for (std::size_t j = 0; j < model.hidden(); ++j) z += model.w2(i, j) * a[j];
            logits[i] = z;
        }
        detail::softmax_inplace(logits);
        probabilities.set_row(r, logits);
    }
}

inline constexpr double kProbabilityClamp = 1e-12;

/// Categorical cross-entropy with per-class binary terms, averaged over
/// the batch: L = -(1/N) sum_i sum_j [y log p + (1 - y) log(1 - p)].
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
inline double loss(const Matrix& probabilities, const Matrix& labels) {
    const std::size_t n = probabilities.rows();
    const std::size_t c = probabilities.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::clamp(probabilities(i, j), kProbabilityClamp,
                                        1.0 - kProbabilityClamp);
            const double t = labels(i, j);
            total += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        }
    }
    return -total / static_cast<double>(n);
}

/// Exact analytic gradient of the loss composed with the forward pass.
/// Through softmax: dL/dz_k = g_k - p_k * sum_j g_j with
/// g_j = -t_j + (1 - t_j) p_j / (1 - p_j).
inline MlpGradients grad(const MlpModel& model, const Matrix& x,
                         const Matrix& labels) {
    const std::size_t n = x.rows();
    if (n == 0) {
        raise(ErrorKind::Precondition, "grad: empty batch");
    }
    const std::size_t d = model.inputs();
    const std::size_t h = model.hidden();
    const std::size_t c = model.outputs();

    MlpGradients gradients;
    gradients.w2 = Matrix(c, h);
    gradients.b2.assign(c, 0.0);
    if (!model.frozen_first_layer) {
        gradients.w1 = Matrix(h, d);
        gradients.b1 = Vector(h, 0.0);
    }

    Matrix probabilities, hidden;
    forward_batch(model, x, probabilities, hidden);

    const double inv_n = 1.0 / static_cast<double>(n);
    Vector g(c), delta2(c), delta1(h);
    for (std::size_t r = 0; r < n; ++r) {
        double g_sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::clamp(probabilities(r, j), kProbabilityClamp,
                                        1.0 - kProbabilityClamp);
            const double t = labels(r, j);
            g[j] = -t + (1.0 - t) * p / (1.0 - p);
            g_sum += g[j];
        }
        for (std::size_t k = 0; k < c; ++k) {
            delta2[k] = (g[k] - probabilities(r, k) * g_sum) * inv_n;
        }
        for (std::size_t k = 0; k < c; ++k) {
            gradients.b2[k] += delta2[k];
            for (std::size_t j = 0; j < h; ++j) {
                gradients.w2(k, j) += delta2[k] * hidden(r, j);
            }
        }
        if (model.frozen_first_layer) continue;
        for (std::size_t j = 0; j < h; ++j) {
            double back = 0.0;
            for (std::size_t k = 0; k < c; ++k) back += model.w2(k, j) * delta2[k];
            delta1[j] = back * detail::activation_derivative(model.hidden_activation,
                                                             hidden(r, j));
        }
        for (std::size_t j = 0; j < h; ++j) {
            (*gradients.b1)[j] += delta1[j];
            for (std::size_t i = 0; i < d; ++i) {
                (*gradients.w1)(j, i) += delta1[j] * x(r, i);
            }
        }
    }
    return gradients;
}

/// One-hot encodes label indices in [0, c).
inline Matrix one_hot(const std::vector<std::size_t>& indices, std::size_t c) {
    Matrix labels(indices.size(), c);
    for (std::size_t i = 0; i < indices.size(); ++i) labels(i, indices[i]) = 1.0;
    return labels;
}

/// Full-batch gradient descent with validation-based early stopping.
/// Stops once the relative validation improvement stays below
/// early_stop_rel for early_stop_patience consecutive epochs; the
/// returned parameters are those of the best validation epoch.
inline std::pair<MlpModel, LossHistory> train(MlpModel model, const Matrix& x_train,
                                              const Matrix& y_train,
                                              const Matrix& x_val,
                                              const Matrix& y_val,
                                              const TrainConfig& config) {
    if (!(config.learning_rate > 0.0) || config.max_epochs < 1) {
        raise(ErrorKind::Precondition, "train: invalid config");
    }
    if (x_train.cols() != model.inputs() || y_train.cols() != model.outputs()) {
        raise(ErrorKind::Bounds, "train: dataset dimensions do not match model");
    }

    LossHistory history;
    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    double prev_val = std::numeric_limits<double>::quiet_NaN();
    std::size_t slow_streak = 0;

    Matrix probabilities, hidden;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const MlpGradients g = grad(model, x_train, y_train);
        for (std::size_t i = 0; i < model.w2.data().size(); ++i) {
            model.w2.data()[i] -= config.learning_rate * g.w2.data()[i];
        }
        for (std::size_t i = 0; i < model.b2.size(); ++i) {
            model.b2[i] -= config.learning_rate * g.b2[i];
        }
        if (!model.frozen_first_layer) {
            for (std::size_t i = 0; i < model.w1.data().size(); ++i) {
                model.w1.data()[i] -= config.learning_rate * g.w1->data()[i];
            }
            for (std::size_t i = 0; i < model.b1.size(); ++i) {
                model.b1[i] -= config.learning_rate * (*g.b1)[i];
            }
        }

        forward_batch(model, x_train, probabilities, hidden);
        const double train_loss = loss(probabilities, y_train);
        forward_batch(model, x_val, probabilities, hidden);
        const double val_loss = loss(probabilities, y_val);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            raise(ErrorKind::Divergence,
                  "train: non-finite loss at epoch " + std::to_string(epoch) +
                      " (learning_rate " + std::to_string(config.learning_rate) + ")");
        }
        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        history.stopped_epoch = epoch;

        if (val_loss < best_val) {
            best_val = val_loss;
            best = model;
        }
        if (epoch > 1) {
            const double improvement = (prev_val - val_loss) / prev_val;
            if (improvement < config.early_stop_rel) {
                ++slow_streak;
            } else {
                slow_streak = 0;
            }
            if (config.early_stop_patience > 0 &&
                slow_streak >= config.early_stop_patience) {
                break;
            }
        }
        prev_val = val_loss;
    }
    return {std::move(best), std::move(history)};
}

/// Independent init + train cycles with rng streams derived from
/// (seed, restart index); keeps the run with the lowest validation loss.
inline std::pair<MlpModel, LossHistory> multi_restart_train(
    std::size_t d, std::size_t h, std::size_t c, const Matrix& x_train,
    const Matrix& y_train, const Matrix& x_val, const Matrix& y_val,
    const TrainConfig& config) {
    if (config.restarts < 1) {
        raise(ErrorKind::Precondition, "multi_restart_train: restarts must be >= 1");
    }
    struct Run {
        MlpModel model;
        LossHistory history;
        double val_loss = std::numeric_limits<double>::infinity();
        bool diverged = false;
    };
    std::vector<Run> runs(config.restarts);
    parallel_for(config.restarts, [&](std::size_t r) {
        Rng rng = derive_rng(config.seed, {r});
        MlpModel initial = init_random(d, h, c, config.init_std, rng);
        try {
            auto [model, history] = train(std::move(initial), x_train, y_train,
                                          x_val, y_val, config);
            Matrix probabilities, hidden;
            forward_batch(model, x_val, probabilities, hidden);
            runs[r].val_loss = loss(probabilities, y_val);
            runs[r].model = std::move(model);
            runs[r].history = std::move(history);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Divergence) throw;
            runs[r].diverged = true;
        }
    });
    std::size_t best = runs.size();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].diverged) continue;
        if (best == runs.size() || runs[r].val_loss < runs[best].val_loss) best = r;
    }
    if (best == runs.size()) {
        raise(ErrorKind::Divergence, "multi_restart_train: all " +
                                         std::to_string(config.restarts) +
                                         " restarts diverged");
    }
    return {std::move(runs[best].model), std::move(runs[best].history)};
}

/// Copies the trained feature-extraction layer (W1, b1) bit-exactly into
/// a new classifier for c_target classes and freezes it; only the output
/// layer remains trainable.
inline MlpModel freeze_transfer(const MlpModel& source, std::size_t c_target,
                                double init_std, Rng& rng) {
    if (c_target < 2) {
        raise(ErrorKind::Precondition, "freeze_transfer: c_target must be >= 2");
    }
    MlpModel target;
    target.w1 = source.w1;
    target.b1 = source.b1;
    target.hidden_activation = source.hidden_activation;
    target.w2 = Matrix(c_target, source.hidden());
    target.b2.resize(c_target);
    for (double& v : target.w2.data()) v = init_std * rng.normal();
    for (double& v : target.b2) v = init_std * rng.normal();
    target.frozen_first_layer = true;
    return target;
}

/// Zero-hidden-layer control: softmax regression expressed in the same
/// model structure (identity hidden layer pinned to W1 = I, b1 = 0).
inline MlpModel init_linear_softmax(std::size_t d, std::size_t c, double init_std,
                                    Rng& rng) {
    MlpModel model;
    model.w1 = Matrix::identity(d);
    model.b1.assign(d, 0.0);
    model.hidden_activation = Activation::Identity;
    model.w2 = Matrix(c, d);
    model.b2.resize(c);
    for (double& v : model.w2.data()) v = init_std * rng.normal();
    for (double& v : model.b2) v = init_std * rng.normal();
    model.frozen_first_layer = true;
    return model;
}

/// Argmax of the class probabilities; ties break to the lowest index.
inline std::size_t predict(const MlpModel& model, const Vector& x) {
    const Vector probabilities = forward(model, x);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < probabilities.size(); ++j) {
        if (probabilities[j] > probabilities[arg]) arg = j;
    }
    return arg;
}

} // namespace shmloc::mlp
