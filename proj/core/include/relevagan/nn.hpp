#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "relevagan/matrix.hpp"

namespace relevagan::nn {

enum class Activation { relu, sigmoid, linear };

enum class Mode { training, inference };

/// Fully connected layer: y = act(x W + b), W is in x out.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::linear;

    std::size_t in() const { return weights.rows; }
    std::size_t out() const { return weights.cols; }
};

/// Per-feature batch normalization. Training mode uses batch statistics and
/// updates running estimates; inference mode uses the running estimates only.
struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.99;
    double epsilon = 1e-5;

    explicit BatchNormLayer(std::size_t width, double momentum_ = 0.99,
                            double epsilon_ = 1e-5)
        : gamma(width, 1.0), beta(width, 0.0), running_mean(width, 0.0),
          running_var(width, 1.0), momentum(momentum_), epsilon(epsilon_) {}

    std::size_t width() const { return gamma.size(); }
};

/// Standalone elementwise activation, used when batch norm sits between the
/// linear map and its nonlinearity.
struct ActivationLayer {
    Activation activation = Activation::relu;
};

using Layer = std::variant<DenseLayer, BatchNormLayer, ActivationLayer>;

/// Sequential dense network. Forward in training mode caches per-layer
/// activations; backward consumes the cache and returns flat parameter
/// gradients plus the gradient with respect to the input batch.
class Network {
  public:
    Network& add(Layer layer);

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }

    std::size_t input_width() const;
    std::size_t output_width() const;

    Matrix forward(const Matrix& batch);

    struct Gradients {
        std::vector<double> params;  // same layout as flat_params()
        Matrix input;                // dLoss/dInput
    };
    Gradients backward(const Matrix& output_grad);

    /// Trainable parameters, flattened layer by layer (dense: weights
    /// row-major then bias; batchnorm: gamma then beta).
    std::size_t param_count() const;
    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> p);

    /// Trainable parameters plus batchnorm running statistics; the full
    /// state blended by soft updates and written to checkpoints.
    std::vector<double> flat_state() const;
    void set_flat_state(std::span<const double> s);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    /// In-place views over trainable parameters / full state, in flat order.
    std::vector<std::span<double>> param_spans();
    std::vector<std::span<double>> state_spans();

    bool same_architecture(const Network& o) const;

  private:
    struct LayerCache {
        Matrix input;
        Matrix pre;  // dense: pre-activation; batchnorm: normalized x_hat
        std::vector<double> mean;
        std::vector<double> var;
    };

    std::vector<Layer> layers_;
    std::vector<LayerCache> cache_;
    Mode mode_ = Mode::inference;
    bool has_cache_ = false;
};

/// Glorot-uniform initialized dense layer, deterministic under the rng state.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act,
                      std::mt19937_64& rng);

struct BceResult {
    double loss = 0.0;
    std::vector<double> grad;  // dLoss/dPred
};

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
BceResult bce(std::span<const double> pred, std::span<const double> target);

inline constexpr double kBceClamp = 1e-7;

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    AdamState() = default;
    AdamState(std::size_t n, double lr, double b1 = 0.9, double b2 = 0.999)
        : learning_rate(lr), beta1(b1), beta2(b2), m(n, 0.0), v(n, 0.0) {}
};

/// Standard bias-corrected Adam update, in place on params.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

/// Adam update applied in place across one or more networks sharing a single
/// optimizer state (grads laid out in the networks' concatenated flat order).
void adam_step_networks(std::initializer_list<Network*> nets,
                        std::span<const double> grads, AdamState& state);

/// target <- (1 - tau) * target + tau * online, over the full flat state
/// (including batchnorm running statistics).
void soft_update(Network& target, const Network& online, double tau);

double apply_activation(Activation a, double x);
double activation_grad(Activation a, double pre, double post);

}  // namespace relevagan::nn
