#pragma once

#include "epiquota/core.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace fixtures {

using namespace epiquota;

// Disease rates of the Guangzhou fit with 𝒟 chosen so that beta0 * 𝒟 = 2.10.
inline DiseaseParams guangzhou_disease() {
    DiseaseParams d;
    d.gamma = 0.0096;
    d.theta = 0.13;
    d.delta = 0.19;
    d.beta0 = 0.47;
    d.effective_infectious_period = 2.10 / 0.47;
    return d;
}

// Serial interval with the same mean and sd as the model's own time from
// infection to leaving I (exponential, rate gamma + delta).
inline void match_serial_interval(DiseaseParams& d) {
    const double rate = d.gamma + d.delta;
    d.si_mean = 1.0 / rate;
    d.si_sd = std::sqrt(1.0 - rate) / rate;
}

// Three divisions of 20000. Division 0 is past its peak with a small residue
// of infections; divisions 1 and 2 are untouched and have few beds, so an
// outbreak imported from division 0 breaches hospital capacity around day 22.
// Closing division 0's outflow on day 0 ends the epidemic by day 9.
inline Scenario toy3() {
    Scenario s;
    constexpr double pop = 20000.0;
    for (std::size_t i = 0; i < 3; ++i) {
        Division d;
        d.id = {i};
        d.name = fmt::format("d{}", i);
        d.initial = i == 0 ? EpidemicState{0.2 * pop, 40.0, 2.0, 0.8 * pop - 42.0} : EpidemicState{pop, 0.0, 0.0, 0.0};
        d.beds_per_1000 = i == 0 ? 6.92 : 0.15;
        s.divisions.push_back(d);
    }
    s.disease = guangzhou_disease();
    match_serial_interval(s.disease);
    s.objectives.k = {0.8, 0.8, 0.8};
    s.objectives.h0 = 2.0;
    s.objectives.l0 = 64.0;
    s.control.expert_hosp_threshold = 1.0;
    s.horizon = 60;
    s.seed = 1;
    s.od_source.kind = OdSource::Kind::gravity;
    s.od_source.trip_rate = 0.03;
    s.od_source.distances_km = {{0, 10, 10}, {10, 0, 10}, {10, 10, 0}};
    s.od_source.days = 7;
    s.od_source.noise_sigma = 0.1;
    return s;
}

// K equal divisions on a line 5 km apart, one of them seeded.
inline Scenario line_city(std::size_t k, double pop = 10000.0, double trip_rate = 0.05) {
    Scenario s;
    for (std::size_t i = 0; i < k; ++i) {
        Division d;
        d.id = {i};
        d.name = fmt::format("d{}", i);
        d.initial = i == 0 ? EpidemicState{pop - 120.0, 100.0, 20.0, 0.0} : EpidemicState{pop, 0.0, 0.0, 0.0};
        s.divisions.push_back(d);
    }
    s.disease = guangzhou_disease();
    s.objectives.k.assign(k, 0.8);
    s.od_source.kind = OdSource::Kind::gravity;
    s.od_source.trip_rate = trip_rate;
    s.od_source.distances_km.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            s.od_source.distances_km[i][j] = 5.0 * std::abs(static_cast<double>(i) - static_cast<double>(j));
        }
    }
    s.od_source.days = 7;
    s.od_source.noise_sigma = 0.05;
    return s;
}

}  // namespace fixtures
