#include "epiquota/mobility.hpp"

#include <cmath>

#include <fmt/format.h>

namespace epiquota {

MobilityMatrix::MobilityMatrix(int day_, Eigen::MatrixXd flows_) : day(day_), flows(std::move(flows_)) {
    validate();
}

MobilityMatrix MobilityMatrix::zeros(int day, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(k);
    return MobilityMatrix(day, Eigen::MatrixXd::Zero(n, n));
}

double MobilityMatrix::outflow(std::size_t i) const {
    const auto row = static_cast<Eigen::Index>(i);
    return flows.row(row).sum() - flows(row, row);
}

double MobilityMatrix::total() const { return flows.sum() - flows.diagonal().sum(); }

void MobilityMatrix::validate() const {
    if (flows.rows() != flows.cols()) {
        throw InputError("flows", fmt::format("expected a square matrix, got {}x{}", flows.rows(), flows.cols()));
    }
    for (Eigen::Index i = 0; i < flows.rows(); ++i) {
        for (Eigen::Index j = 0; j < flows.cols(); ++j) {
            const double v = flows(i, j);
            if (!std::isfinite(v) || v < 0.0) {
                throw InputError(fmt::format("flows[{}][{}]", i, j), fmt::format("{} is not a finite count", v));
            }
        }
    }
}

QuotaMatrix::QuotaMatrix(int day_, Eigen::MatrixXd quotas_) : day(day_), quotas(std::move(quotas_)) {
    validate();
}

QuotaMatrix QuotaMatrix::filled(int day, std::size_t k, double value) {
    const auto n = static_cast<Eigen::Index>(k);
    return QuotaMatrix(day, Eigen::MatrixXd::Constant(n, n, value));
}

double QuotaMatrix::row_mean(std::size_t i) const {
    const auto k = quotas.rows();
    if (k <= 1) {
        return 1.0;
    }
    const auto row = static_cast<Eigen::Index>(i);
    return (quotas.row(row).sum() - quotas(row, row)) / static_cast<double>(k - 1);
}

void QuotaMatrix::validate() const {
    if (quotas.rows() != quotas.cols()) {
        throw InputError("quotas", fmt::format("expected a square matrix, got {}x{}", quotas.rows(), quotas.cols()));
    }
    for (Eigen::Index i = 0; i < quotas.rows(); ++i) {
        for (Eigen::Index j = 0; j < quotas.cols(); ++j) {
            const double q = quotas(i, j);
            if (!(q >= 0.0 && q <= 1.0)) {
                throw InputError(fmt::format("quotas[{}][{}]", i, j), fmt::format("{} outside [0, 1]", q));
            }
        }
    }
}

MobilityMatrix apply_quota(const MobilityMatrix& demand, const QuotaMatrix& quota) {
    if (demand.size() != quota.size()) {
        throw InputError("quota", fmt::format("dimension {} does not match demand {}", quota.size(), demand.size()));
    }
    MobilityMatrix actual;
    actual.day = demand.day;
    actual.flows = demand.flows.cwiseProduct(quota.quotas);
    return actual;
}

MobilityMatrix synth_gravity_od(std::span<const double> populations,
                                const std::vector<std::vector<double>>& distances_km, const GravityParams& params,
                                RandomStream* rng, int day) {
    const std::size_t k = populations.size();
    if (distances_km.size() != k) {
        throw InputError("distances", fmt::format("expected {} rows, got {}", k, distances_km.size()));
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (!(populations[i] > 0.0)) {
            throw InputError(fmt::format("populations[{}]", i), "must be positive");
        }
        if (distances_km[i].size() != k) {
            throw InputError(fmt::format("distances[{}]", i), fmt::format("expected {} columns", k));
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (distances_km[i][i] != 0.0) {
            throw InputError(fmt::format("distances[{}][{}]", i, i), "diagonal must be zero");
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j && !(distances_km[i][j] > 0.0)) {
                throw InputError(fmt::format("distances[{}][{}]", i, j), "off-diagonal distance must be positive");
            }
            if (distances_km[i][j] != distances_km[j][i]) {
                throw InputError(fmt::format("distances[{}][{}]", i, j), "matrix must be symmetric");
            }
        }
    }
    if (!(params.trip_rate >= 0.0)) {
        throw InputError("trip_rate", "must be non-negative");
    }
    if (params.noise_sigma > 0.0 && rng == nullptr) {
        throw InputError("noise_sigma", "noise requested without a random stream");
    }

    const auto n = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < k; ++i) {
        double attraction_sum = 0.0;
        std::vector<double> attraction(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) {
                attraction[j] = populations[j] / std::pow(distances_km[i][j], params.exponent);
                attraction_sum += attraction[j];
            }
        }
        if (attraction_sum <= 0.0) {
            continue;
        }
        const double trips = params.trip_rate * populations[i];
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            double flow = trips * attraction[j] / attraction_sum;
            if (params.noise_sigma > 0.0) {
                const double sigma = params.noise_sigma;
                flow *= std::exp(sigma * rng->normal() - 0.5 * sigma * sigma);
            }
            flows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flow;
        }
    }
    return MobilityMatrix(day, std::move(flows));
}

FlowSplit split_flows(std::span<const EpidemicState> states, const MobilityMatrix& actual) {
    const std::size_t k = states.size();
    if (actual.size() != k) {
        throw InputError("actual", fmt::format("dimension {} does not match {} divisions", actual.size(), k));
    }
    FlowSplit out;
    out.outflow.assign(k, std::vector<EpidemicState>(k));
    out.stayers.assign(states.begin(), states.end());
    out.inflow.assign(k, EpidemicState{});
    out.applied = actual;

    for (std::size_t i = 0; i < k; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        out.applied.flows(row, row) = 0.0;
        const double demanded = actual.outflow(i);
        if (demanded <= 0.0) {
            out.applied.flows.row(row).setZero();
            continue;
        }
        const EpidemicState& d = states[i];
        const double mobile = d.s + d.i + d.r;
        if (mobile <= 0.0) {
            out.warnings.push_back(fmt::format(
                "division {}: no mobile population for {:.6g} demanded trips; flow clamped to zero", i, demanded));
            out.applied.flows.row(row).setZero();
            continue;
        }
        const double cap = kMaxOutflowShare * mobile;
        if (demanded > cap) {
            out.applied.flows.row(row) *= cap / demanded;
            out.warnings.push_back(
                fmt::format("division {}: outflow {:.6g} exceeds {:.6g}; row scaled down", i, demanded, cap));
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double persons = out.applied.flows(row, static_cast<Eigen::Index>(j));
            if (persons <= 0.0) {
                continue;
            }
            const double share = persons / mobile;
            const EpidemicState moved{share * d.s, share * d.i, 0.0, share * d.r};
            out.outflow[i][j] = moved;
            out.stayers[i] -= moved;
            out.inflow[j] += moved;
        }
    }
    return out;
}

}  // namespace epiquota
