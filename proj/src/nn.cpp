#include "epiquota/nn.hpp"

#include "epiquota/core.hpp"

#include <cmath>

#include <fmt/format.h>

namespace epiquota::nn {

Mlp::Mlp(std::vector<int> sizes, OutputActivation output) : sizes_(std::move(sizes)), output_(output) {
    if (sizes_.size() < 2) {
        throw InputError("sizes", "a network needs at least an input and an output layer");
    }
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] < 1 || sizes_[l + 1] < 1) {
            throw InputError("sizes", "layer widths must be positive");
        }
        Layer layer;
        layer.in = sizes_[l];
        layer.out = sizes_[l + 1];
        layer.weight_offset = offset;
        offset += static_cast<Eigen::Index>(layer.in) * layer.out;
        layer.bias_offset = offset;
        offset += layer.out;
        layers_.push_back(layer);
    }
    params_ = Eigen::VectorXd::Zero(offset);
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weights(std::size_t l) const {
    const Layer& layer = layers_[l];
    return {params_.data() + layer.weight_offset, layer.out, layer.in};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
    const Layer& layer = layers_[l];
    return {params_.data() + layer.bias_offset, layer.out};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    Cache cache;
    return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
    if (x.rows() != input_size()) {
        throw InputError("input", fmt::format("expected {} rows, got {}", input_size(), x.rows()));
    }
    cache.activations.resize(layers_.size() + 1);
    cache.activations[0] = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = weights(l) * cache.activations[l];
        z.colwise() += bias(l);
        const bool last = l + 1 == layers_.size();
        if (!last) {
            cache.activations[l + 1] = z.array().tanh().matrix();
        } else if (output_ == OutputActivation::sigmoid) {
            cache.activations[l + 1] = (1.0 / (1.0 + (-z.array()).exp())).matrix();
        } else {
            cache.activations[l + 1] = std::move(z);
        }
    }
    return cache.activations.back();
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Eigen::VectorXd* grad) const {
    if (cache.activations.size() != layers_.size() + 1) {
        throw InputError("cache", "forward pass missing");
    }
    if (grad != nullptr && grad->size() != params_.size()) {
        throw InputError("grad", fmt::format("expected {} entries, got {}", params_.size(), grad->size()));
    }
    const Eigen::MatrixXd& y = cache.activations.back();
    Eigen::MatrixXd delta = grad_output;
    if (output_ == OutputActivation::sigmoid) {
        delta = (delta.array() * y.array() * (1.0 - y.array())).matrix();
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        if (grad != nullptr) {
            Eigen::Map<Eigen::MatrixXd> gw(grad->data() + layer.weight_offset, layer.out, layer.in);
            Eigen::Map<Eigen::VectorXd> gb(grad->data() + layer.bias_offset, layer.out);
            gw.noalias() += delta * cache.activations[l].transpose();
            gb += delta.rowwise().sum();
        }
        Eigen::MatrixXd upstream = weights(l).transpose() * delta;
        if (l == 0) {
            return upstream;
        }
        const Eigen::MatrixXd& a = cache.activations[l];
        delta = (upstream.array() * (1.0 - a.array().square())).matrix();
    }
    return delta;
}

void Mlp::initialize(RandomStream& rng, double output_scale) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const bool last = l + 1 == layers_.size();
        const double bound = last ? output_scale : std::sqrt(6.0 / (layer.in + layer.out));
        const Eigen::Index n = static_cast<Eigen::Index>(layer.in) * layer.out;
        for (Eigen::Index p = 0; p < n; ++p) {
            params_[layer.weight_offset + p] = bound > 0.0 ? rng.uniform(-bound, bound) : 0.0;
        }
        params_.segment(layer.bias_offset, layer.out).setZero();
    }
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
    if (online.params_.size() != params_.size()) {
        throw InputError("online", "architectures differ");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw InputError("tau", "must lie in (0, 1]");
    }
    params_ = tau * online.params_ + (1.0 - tau) * params_;
}

std::string Mlp::descriptor() const {
    std::string out;
    for (std::size_t l = 0; l < sizes_.size(); ++l) {
        out += (l == 0 ? "" : "-") + std::to_string(sizes_[l]);
    }
    out += ":tanh:";
    out += output_ == OutputActivation::sigmoid ? "sigmoid" : "linear";
    return out;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {
    if (!(learning_rate > 0.0)) {
        throw InputError("learning_rate", "must be positive");
    }
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw InputError("grad", "size differs from the optimizer state");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace epiquota::nn
