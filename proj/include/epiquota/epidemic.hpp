#pragma once

#include "epiquota/core.hpp"
#include "epiquota/mobility.hpp"

#include <span>
#include <string>
#include <vector>

namespace epiquota {

// People who arrived in a division today. Hospitalized persons never travel,
// so there is no H component.
struct InflowGroup {
    double s_plus = 0.0;
    double i_plus = 0.0;
    double r_plus = 0.0;
    double beta_plus = 0.0;

    double total() const noexcept { return s_plus + i_plus + r_plus; }
    static InflowGroup from_state(const EpidemicState& moved, double beta_plus);
};

// One day's change of each compartment. `infections` is the gross S -> I flow
// (not an independent compartment; the four changes sum to zero).
struct DailyDelta {
    double s_new = 0.0;
    double i_new = 0.0;
    double h_new = 0.0;
    double r_new = 0.0;
    double infections = 0.0;

    double sum() const noexcept { return s_new + i_new + h_new + r_new; }
    EpidemicState as_state() const noexcept { return {s_new, i_new, h_new, r_new}; }
};

// D-SIHR transitions for one division; the inflow group mixes only with itself
// in the infection term and shares the I -> H, I -> R outflows.
DailyDelta dsihr_delta(const EpidemicState& resident, const InflowGroup& inflow, double beta_resident,
                       const DiseaseParams& params);

// Classic SIR (H stays 0).
DailyDelta sir_delta(const EpidemicState& state, double beta, double gamma);
// SIHR without self-limiting dynamics: h is the hospitalization rate, gamma the
// cure rate and delta the recovery rate.
DailyDelta sihr_delta(const EpidemicState& state, double beta, double h, double gamma, double delta);

// Flow-weighted mean of the source divisions' rates for each destination;
// 0 where nothing arrives.
std::vector<double> inflow_betas(const MobilityMatrix& actual, std::span<const double> betas);

struct CityStep {
    std::vector<EpidemicState> states;
    std::vector<double> new_infections;
    std::vector<double> clamp_correction;  // persons added back by the non-negativity clamp
    std::vector<std::string> warnings;
    MobilityMatrix applied;  // flows after outflow clamping
};

// Moves people along `actual`, then applies the D-SIHR day to every division.
CityStep step_city(std::span<const EpidemicState> states, const MobilityMatrix& actual, std::span<const double> betas,
                   std::span<const double> betas_inflow, const DiseaseParams& params);

enum class ReferenceModel { sir, sihr };

// Daily new infections of one closed population under a constant rate.
// SIHR takes h = gamma, cure = theta, recovery = delta from `params`; SIR has
// no self-recovery path, so its single removal rate is params.gamma.
std::vector<double> reference_incidence(ReferenceModel model, const EpidemicState& initial, double beta,
                                        const DiseaseParams& params, int days);

struct BetaFit {
    double beta = 0.0;
    double r_squared = 0.0;
    std::vector<double> fitted;
};

// Least-squares constant rate in [lo, hi]: grid scan, then Brent refinement
// around the best grid point.
BetaFit fit_constant_beta(ReferenceModel model, const EpidemicState& initial, const DiseaseParams& params,
                          std::span<const double> observed, double lo = 0.0, double hi = 2.0);

// `day,division,S,I,H,R,new_infections` rows for one day.
std::string format_trajectory_rows(int day, std::span<const EpidemicState> states,
                                   std::span<const double> new_infections);
inline constexpr const char* kTrajectoryDumpHeader = "day,division,S,I,H,R,new_infections\n";

}  // namespace epiquota
