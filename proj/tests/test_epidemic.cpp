#include "epiquota/epidemic.hpp"
#include "epiquota/objectives.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace epiquota;

TEST_CASE("D-SIHR transitions term by term") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    const EpidemicState res{9000, 300, 40, 660};
    const InflowGroup in{150, 20, 30, 0.35};
    const double beta = 0.4;
    const DailyDelta d = dsihr_delta(res, in, beta, p);

    const double n = 10000.0;
    const double n_plus = 200.0;
    const double infections = beta * 9000 * 300 / n + 0.35 * 150 * 20 / n_plus;
    const double infected = 300 + 20;
    CHECK(d.infections == doctest::Approx(infections).epsilon(1e-14));
    CHECK(d.s_new == doctest::Approx(-infections).epsilon(1e-14));
    CHECK(d.i_new == doctest::Approx(infections - 0.0096 * infected - 0.19 * infected).epsilon(1e-14));
    CHECK(d.h_new == doctest::Approx(0.0096 * infected - 0.13 * 40).epsilon(1e-14));
    CHECK(d.r_new == doctest::Approx(0.19 * infected + 0.13 * 40).epsilon(1e-14));
    CHECK(std::abs(d.sum()) < 1e-9);
}

TEST_CASE("no inflow means no inflow infections") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    const DailyDelta d = dsihr_delta({1000, 10, 0, 0}, InflowGroup{}, 0.5, p);
    CHECK(d.infections == doctest::Approx(0.5 * 1000 * 10 / 1010.0));
}

TEST_CASE("SIR and SIHR references") {
    const EpidemicState s{990, 10, 0, 0};
    const DailyDelta sir = sir_delta(s, 0.3, 0.1);
    CHECK(sir.infections == doctest::Approx(0.3 * 990 * 10 / 1000));
    CHECK(sir.r_new == doctest::Approx(1.0));
    CHECK(sir.h_new == 0.0);
    CHECK(std::abs(sir.sum()) < 1e-12);

    const DailyDelta sihr = sihr_delta({980, 10, 5, 5}, 0.3, 0.02, 0.1, 0.2);
    CHECK(sihr.i_new == doctest::Approx(0.3 * 980 * 10 / 1000 - 0.2 - 2.0));
    CHECK(sihr.h_new == doctest::Approx(0.2 - 0.5));
    CHECK(sihr.r_new == doctest::Approx(2.0 + 0.5));
    CHECK(std::abs(sihr.sum()) < 1e-12);
}

TEST_CASE("inflow rate is the flow-weighted mean of the sources") {
    Eigen::MatrixXd f(3, 3);
    f << 0, 10, 0, 30, 0, 0, 60, 20, 0;
    const MobilityMatrix m(0, f);
    const std::vector<double> betas{0.1, 0.2, 0.5};
    const auto out = inflow_betas(m, betas);
    CHECK(out[0] == doctest::Approx((30 * 0.2 + 60 * 0.5) / 90.0));
    CHECK(out[1] == doctest::Approx((10 * 0.1 + 20 * 0.5) / 30.0));
    CHECK(out[2] == 0.0);
    CHECK_THROWS_AS(inflow_betas(m, std::vector<double>{0.1}), InputError);
}

TEST_CASE("step_city conserves the city population on random instances") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    RandomStream rng(11, "conservation");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng.below(6);
        std::vector<EpidemicState> states(k);
        Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        std::vector<double> betas(k);
        double before = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            states[i] = {rng.uniform(0, 1e5), rng.uniform(0, 1e3), rng.uniform(0, 1e2), rng.uniform(0, 1e4)};
            before += states[i].total();
            betas[i] = rng.uniform(0, 1);
            for (std::size_t j = 0; j < k; ++j) {
                if (i != j) {
                    flows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.uniform(0, 2e4);
                }
            }
        }
        const MobilityMatrix m(0, flows);
        const auto step = step_city(states, m, betas, inflow_betas(m, betas), p);
        double after = 0.0;
        double correction = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            after += step.states[i].total();
            correction += step.clamp_correction[i];
            CHECK(step.states[i].s >= 0.0);
            CHECK(step.states[i].i >= 0.0);
            CHECK(step.new_infections[i] >= 0.0);
        }
        CHECK(after - correction == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("full lockdown keeps an outbreak confined") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    std::vector<EpidemicState> states{{9000, 1000, 0, 0}, {10000, 0, 0, 0}, {10000, 0, 0, 0}};
    Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(3, 3, 500.0);
    demand.diagonal().setZero();
    const MobilityMatrix actual = apply_quota(MobilityMatrix(0, demand), QuotaMatrix::filled(0, 3, 0.0));
    std::vector<double> betas(3, 0.47);
    for (int day = 0; day < 30; ++day) {
        auto step = step_city(states, actual, betas, inflow_betas(actual, betas), p);
        states = std::move(step.states);
    }
    CHECK(states[1].i == 0.0);
    CHECK(states[2].i == 0.0);
    CHECK(states[1].s == 10000.0);
    CHECK(states[0].i > 0.0);
}

TEST_CASE("open borders do carry infection") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    std::vector<EpidemicState> states{{9000, 1000, 0, 0}, {10000, 0, 0, 0}};
    Eigen::MatrixXd demand(2, 2);
    demand << 0, 500, 500, 0;
    const MobilityMatrix m(0, demand);
    std::vector<double> betas(2, 0.47);
    const auto step = step_city(states, m, betas, inflow_betas(m, betas), p);
    CHECK(step.states[1].i > 0.0);
}

TEST_CASE("trajectory dump rows") {
    const std::vector<EpidemicState> s{{1, 2, 3, 4}};
    const std::vector<double> inc{0.5};
    CHECK(format_trajectory_rows(7, s, inc) == "7,0,1,2,3,4,0.5\n");
}

TEST_CASE("constant-rate fit recovers the rate of its own model") {
    const DiseaseParams p = fixtures::guangzhou_disease();
    const EpidemicState start{99900, 100, 0, 0};
    for (auto model : {ReferenceModel::sihr, ReferenceModel::sir}) {
        const auto series = reference_incidence(model, start, 0.31, p, 80);
        const BetaFit fit = fit_constant_beta(model, start, p, series);
        CHECK(fit.beta == doctest::Approx(0.31).epsilon(1e-6));
        CHECK(fit.r_squared > 0.999999);
    }
    CHECK_THROWS_AS(fit_constant_beta(ReferenceModel::sir, start, p, std::vector<double>{1.0}), InputError);
}
