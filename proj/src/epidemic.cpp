#include "epiquota/epidemic.hpp"

#include "epiquota/io.hpp"

#include "epiquota/objectives.hpp"

#include <algorithm>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

namespace epiquota {

InflowGroup InflowGroup::from_state(const EpidemicState& moved, double beta_plus) {
    return {moved.s, moved.i, moved.r, beta_plus};
}

DailyDelta dsihr_delta(const EpidemicState& resident, const InflowGroup& inflow, double beta_resident,
                       const DiseaseParams& params) {
    const double n = resident.total();
    const double n_plus = inflow.total();
    const double resident_infections = n > 0.0 ? beta_resident * resident.s * resident.i / n : 0.0;
    const double inflow_infections = n_plus > 0.0 ? inflow.beta_plus * inflow.s_plus * inflow.i_plus / n_plus : 0.0;
    const double infections = resident_infections + inflow_infections;
    const double infected = inflow.i_plus + resident.i;

    DailyDelta d;
    d.infections = infections;
    d.s_new = -infections;
    d.i_new = infections - (params.gamma + params.delta) * infected;
    d.h_new = params.gamma * infected - params.theta * resident.h;
    d.r_new = params.delta * infected + params.theta * resident.h;
    return d;
}

DailyDelta sir_delta(const EpidemicState& state, double beta, double gamma) {
    const double n = state.total();
    const double infections = n > 0.0 ? beta * state.s * state.i / n : 0.0;
    DailyDelta d;
    d.infections = infections;
    d.s_new = -infections;
    d.i_new = infections - gamma * state.i;
    d.r_new = gamma * state.i;
    return d;
}

DailyDelta sihr_delta(const EpidemicState& state, double beta, double h, double gamma, double delta) {
    const double n = state.total();
    const double infections = n > 0.0 ? beta * state.s * state.i / n : 0.0;
    DailyDelta d;
    d.infections = infections;
    d.s_new = -infections;
    d.i_new = infections - h * state.i - delta * state.i;
    d.h_new = h * state.i - gamma * state.h;
    d.r_new = delta * state.i + gamma * state.h;
    return d;
}

std::vector<double> inflow_betas(const MobilityMatrix& actual, std::span<const double> betas) {
    const std::size_t k = actual.size();
    if (betas.size() != k) {
        throw InputError("betas", fmt::format("expected {} rates, got {}", k, betas.size()));
    }
    std::vector<double> out(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double weighted = 0.0;
        double arrivals = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (i == j) {
                continue;
            }
            const double m = actual.flows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            weighted += m * betas[i];
            arrivals += m;
        }
        out[j] = arrivals > 0.0 ? weighted / arrivals : 0.0;
    }
    return out;
}

CityStep step_city(std::span<const EpidemicState> states, const MobilityMatrix& actual, std::span<const double> betas,
                   std::span<const double> betas_inflow, const DiseaseParams& params) {
    const std::size_t k = states.size();
    if (betas.size() != k || betas_inflow.size() != k) {
        throw InputError("betas", fmt::format("expected {} rates", k));
    }
    FlowSplit split = split_flows(states, actual);

    CityStep out;
    out.states.resize(k);
    out.new_infections.resize(k);
    out.clamp_correction.assign(k, 0.0);
    out.warnings = std::move(split.warnings);
    for (std::size_t i = 0; i < k; ++i) {
        const InflowGroup inflow = InflowGroup::from_state(split.inflow[i], betas_inflow[i]);
        const DailyDelta delta = dsihr_delta(split.stayers[i], inflow, betas[i], params);
        EpidemicState next = split.stayers[i] + split.inflow[i] + delta.as_state();
        for (double* part : {&next.s, &next.i, &next.h, &next.r}) {
            if (*part < 0.0) {
                out.clamp_correction[i] -= *part;
                *part = 0.0;
            }
        }
        if (out.clamp_correction[i] > 0.0) {
            out.warnings.push_back(
                fmt::format("division {}: negative compartment clamped (+{:.6g} persons)", i, out.clamp_correction[i]));
        }
        out.states[i] = next;
        out.new_infections[i] = delta.infections;
    }
    out.applied = std::move(split.applied);
    return out;
}

std::vector<double> reference_incidence(ReferenceModel model, const EpidemicState& initial, double beta,
                                        const DiseaseParams& params, int days) {
    if (days < 0) {
        throw InputError("days", "must be non-negative");
    }
    initial.validate("initial");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(days));
    EpidemicState state = initial;
    for (int t = 0; t < days; ++t) {
        const DailyDelta d = model == ReferenceModel::sir
                                 ? sir_delta(state, beta, params.gamma)
                                 : sihr_delta(state, beta, params.gamma, params.theta, params.delta);
        state += d.as_state();
        for (double* part : {&state.s, &state.i, &state.h, &state.r}) {
            *part = std::max(*part, 0.0);
        }
        out.push_back(d.infections);
    }
    return out;
}

BetaFit fit_constant_beta(ReferenceModel model, const EpidemicState& initial, const DiseaseParams& params,
                          std::span<const double> observed, double lo, double hi) {
    if (observed.size() < 2) {
        throw InputError("observed", "need at least two days");
    }
    if (!(hi > lo) || lo < 0.0) {
        throw InputError("beta range", "need 0 <= lo < hi");
    }
    const int days = static_cast<int>(observed.size());
    const auto sse = [&](double beta) {
        const auto fitted = reference_incidence(model, initial, beta, params, days);
        double total = 0.0;
        for (std::size_t t = 0; t < observed.size(); ++t) {
            total += (fitted[t] - observed[t]) * (fitted[t] - observed[t]);
        }
        return total;
    };
    constexpr int kGrid = 200;
    const double step = (hi - lo) / kGrid;
    int best = 0;
    double best_sse = sse(lo);
    for (int g = 1; g <= kGrid; ++g) {
        const double v = sse(lo + step * g);
        if (v < best_sse) {
            best_sse = v;
            best = g;
        }
    }
    const double a = std::max(lo, lo + step * (best - 1));
    const double b = std::min(hi, lo + step * (best + 1));
    const auto [beta, value] = boost::math::tools::brent_find_minima(sse, a, b, 52);
    BetaFit fit;
    fit.beta = value <= best_sse ? beta : lo + step * best;
    fit.fitted = reference_incidence(model, initial, fit.beta, params, days);
    fit.r_squared = r_squared(observed, fit.fitted);
    return fit;
}

std::string format_trajectory_rows(int day, std::span<const EpidemicState> states,
                                   std::span<const double> new_infections) {
    std::string out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& s = states[i];
        out += fmt::format("{},{},{},{},{},{},{}\n", day, i, io::format_double(s.s), io::format_double(s.i),
                           io::format_double(s.h), io::format_double(s.r), io::format_double(new_infections[i]));
    }
    return out;
}

}  // namespace epiquota
