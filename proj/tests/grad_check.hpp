#pragma once

#include "epiquota/agent.hpp"

#include <algorithm>
#include <utility>

namespace grad_check {

using epiquota::ActorCritic;
using epiquota::Batch;
using epiquota::RandomStream;

inline Batch random_batch(RandomStream& rng, std::size_t agents, Eigen::Index size) {
    const auto k = static_cast<Eigen::Index>(agents);
    Batch b;
    b.s.resize(k * epiquota::kObservationFeatures, size);
    b.s_next.resize(b.s.rows(), size);
    b.a.resize(k * k, size);
    b.r.resize(size);
    b.done.resize(size);
    for (Eigen::Index c = 0; c < size; ++c) {
        for (Eigen::Index n = 0; n < b.s.rows(); ++n) {
            b.s(n, c) = rng.uniform(-1.0, 1.0);
            b.s_next(n, c) = rng.uniform(-1.0, 1.0);
        }
        for (Eigen::Index n = 0; n < b.a.rows(); ++n) {
            b.a(n, c) = rng.uniform();
        }
        b.r[c] = rng.uniform(-3.0, 0.0);
        b.done[c] = rng.bernoulli(0.2) ? 1.0 : 0.0;
    }
    return b;
}

// Moves every parameter off its initial value so the output layer is not near zero.
inline void perturb(ActorCritic& model, RandomStream& rng, double scale) {
    for (auto& actor : model.actors()) {
        for (Eigen::Index p = 0; p < actor.parameter_count(); ++p) {
            actor.parameters()[p] += rng.uniform(-scale, scale);
        }
    }
    for (Eigen::Index p = 0; p < model.critic().parameter_count(); ++p) {
        model.critic().parameters()[p] += rng.uniform(-scale, scale);
    }
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300});
}

// Relative error between the analytic critic gradient and central differences.
inline double critic_error(ActorCritic& model, const Batch& batch, const Eigen::RowVectorXd& y, double h = 1e-6) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.critic().parameter_count());
    model.critic_loss(batch, y, &grad);
    Eigen::VectorXd& p = model.critic().parameters();
    Eigen::VectorXd numeric(p.size());
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        const double keep = p[n];
        p[n] = keep + h;
        const double up = model.critic_loss(batch, y, nullptr);
        p[n] = keep - h;
        const double down = model.critic_loss(batch, y, nullptr);
        p[n] = keep;
        numeric[n] = (up - down) / (2 * h);
    }
    return relative_error(grad, numeric);
}

inline double actor_error(ActorCritic& model, std::size_t i, const Batch& batch, double h = 1e-6) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.actors()[i].parameter_count());
    model.actor_objective(i, batch, &grad);
    Eigen::VectorXd& p = model.actors()[i].parameters();
    Eigen::VectorXd numeric(p.size());
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        const double keep = p[n];
        p[n] = keep + h;
        const double up = model.actor_objective(i, batch, nullptr);
        p[n] = keep - h;
        const double down = model.actor_objective(i, batch, nullptr);
        p[n] = keep;
        numeric[n] = (up - down) / (2 * h);
    }
    return relative_error(grad, numeric);
}

}  // namespace grad_check
