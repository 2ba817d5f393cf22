#pragma once

#include "epiquota/core.hpp"
#include "epiquota/rng.hpp"

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace epiquota {

// Daily person flows between divisions; flows(i, j) moves from i to j.
// The diagonal carries intra-division trips and is ignored by flow operations.
struct MobilityMatrix {
    int day = 0;
    Eigen::MatrixXd flows;

    MobilityMatrix() = default;
    MobilityMatrix(int day_, Eigen::MatrixXd flows_);
    static MobilityMatrix zeros(int day, std::size_t k);

    std::size_t size() const noexcept { return static_cast<std::size_t>(flows.rows()); }

    // Sum of row i without the diagonal.
    double outflow(std::size_t i) const;
    // Row mean over all K columns with the diagonal taken as zero.
    double mean_outflow(std::size_t i) const { return outflow(i) / static_cast<double>(size()); }
    double total() const;

    void validate() const;
};

// Retained share of each flow; every entry in [0, 1].
struct QuotaMatrix {
    int day = 0;
    Eigen::MatrixXd quotas;

    QuotaMatrix() = default;
    QuotaMatrix(int day_, Eigen::MatrixXd quotas_);
    static QuotaMatrix filled(int day, std::size_t k, double value);

    std::size_t size() const noexcept { return static_cast<std::size_t>(quotas.rows()); }
    // Mean over the off-diagonal entries of row i (1 when K = 1).
    double row_mean(std::size_t i) const;
    void validate() const;
};

// Hadamard product M_d ⊙ Q; never increases any entry.
MobilityMatrix apply_quota(const MobilityMatrix& demand, const QuotaMatrix& quota);

struct GravityParams {
    double trip_rate = 1.0;  // trips per person per day
    double exponent = 2.0;
    double noise_sigma = 0.0;  // log-normal multiplicative noise; 0 disables
};

// m_ij ∝ pop_i pop_j / d_ij^exponent, rows scaled to trip_rate * pop_i.
// `rng` is only drawn from when noise_sigma > 0.
MobilityMatrix synth_gravity_od(std::span<const double> populations,
                                const std::vector<std::vector<double>>& distances_km, const GravityParams& params,
                                RandomStream* rng = nullptr, int day = 0);

// Share of a division's population that may leave in one day.
inline constexpr double kMaxOutflowShare = 0.95;

struct FlowSplit {
    // outflow[i][j]: compartments moving from i to j (H component always 0)
    std::vector<std::vector<EpidemicState>> outflow;
    std::vector<EpidemicState> stayers;
    std::vector<EpidemicState> inflow;
    // flows actually applied after clamping
    MobilityMatrix applied;
    std::vector<std::string> warnings;
};

// Moves people along `actual`. Hospitalized persons stay put: each move carries
// the S, I, R mix of its origin. Rows whose total exceeds 95% of the mobile
// population (S + I + R) are scaled down to that bound.
FlowSplit split_flows(std::span<const EpidemicState> states, const MobilityMatrix& actual);

}  // namespace epiquota
