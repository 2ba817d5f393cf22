#pragma once

#include "epiquota/rng.hpp"

#include <string>
#include <vector>

#include <Eigen/Core>

namespace epiquota::nn {

enum class OutputActivation { linear, sigmoid };

// Fully connected network with tanh hidden layers. All weights and biases live
// in one flat vector so optimizers, soft updates and serialization treat the
// network as a single parameter array. Inputs and outputs are column batches.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, OutputActivation output);

    struct Cache {
        std::vector<Eigen::MatrixXd> activations;  // input, every hidden layer, output
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

    // Given dLoss/dOutput for the batch, adds dLoss/dParams into `grad` (when
    // non-null) and returns dLoss/dInput.
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Eigen::VectorXd* grad) const;

    // Glorot-uniform hidden weights, zero biases; the output layer is drawn
    // from +-output_scale (0 gives an all-zero output layer).
    void initialize(RandomStream& rng, double output_scale = 3e-3);

    // target <- tau * online + (1 - tau) * target
    void soft_update_from(const Mlp& online, double tau);

    const std::vector<int>& sizes() const noexcept { return sizes_; }
    OutputActivation output_activation() const noexcept { return output_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    Eigen::Index parameter_count() const noexcept { return params_.size(); }

    Eigen::VectorXd& parameters() noexcept { return params_; }
    const Eigen::VectorXd& parameters() const noexcept { return params_; }

    // e.g. "11-64-64-3:tanh:sigmoid"
    std::string descriptor() const;

private:
    struct Layer {
        Eigen::Index weight_offset = 0;
        Eigen::Index bias_offset = 0;
        int in = 0;
        int out = 0;
    };

    Eigen::Map<const Eigen::MatrixXd> weights(std::size_t l) const;
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;

    std::vector<int> sizes_;
    OutputActivation output_ = OutputActivation::linear;
    std::vector<Layer> layers_;
    Eigen::VectorXd params_;
};

class Adam {
public:
    Adam() = default;
    Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
    double learning_rate() const noexcept { return lr_; }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long long t_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

}  // namespace epiquota::nn
