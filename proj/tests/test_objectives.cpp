#include "epiquota/objectives.hpp"
#include "epiquota/rng.hpp"

#include "ewm_oracle.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace epiquota;

TEST_CASE("restricted fraction and ledger update") {
    const std::array<double, 3> demand{0, 40, 60};
    const std::array<double, 3> actual{0, 10, 60};
    CHECK(restricted_fraction(demand, actual, 100.0 / 3.0) == doctest::Approx(0.9));
    CHECK(restricted_fraction(demand, actual, 0.0) == 0.0);
    const RestrictionLedger l = update_ledger({2.0, 0.99}, demand, actual, 100.0 / 3.0);
    CHECK(l.loss == doctest::Approx(0.99 * 2.0 + 0.99 * 0.9));
    CHECK(l.lambda == 0.99);
    CHECK_THROWS_AS(restricted_fraction(demand, std::array<double, 2>{0, 1}, 1.0), InputError);
}

TEST_CASE("strain and loss indices") {
    CHECK(strain_index(0.0, 0.8, 72.0) == doctest::Approx(0.8));
    CHECK(strain_index(72.0, 0.8, 72.0) == doctest::Approx(0.8 * std::exp(1.0)));
    CHECK_THROWS_AS(strain_index(1.0, 0.8, 0.0), InputError);
    const std::array<double, 2> demand{0, 10};
    const std::array<double, 2> actual{0, 5};
    CHECK(loss_index(64.0, 64.0, demand, actual, 5.0) == doctest::Approx(std::exp(1.0) * 1.0));
    CHECK(loss_index(0.0, 64.0, demand, demand, 5.0) == 0.0);
    CHECK_THROWS_AS(loss_index(0.0, -1.0, demand, actual, 5.0), InputError);
}

TEST_CASE("reward composition") {
    CHECK(reward(0.0, 0.0, {}) == 0.0);
    CHECK(reward(2.0, 1.0, {0.5, 0.5}) == doctest::Approx(-1.5));
    CHECK(reward(2.0, 1.0, {1.0, 0.0}) == doctest::Approx(-2.0));
}

TEST_CASE("reward from a hand-worked day") {
    // H = 36, k = 0.8, h0 = 72; L = 32, l0 = 64; half of a 30-trip row held back
    const double c = strain_index(36.0, 0.8, 72.0);
    const std::array<double, 3> demand{0, 10, 20};
    const std::array<double, 3> actual{0, 5, 10};
    const double r = loss_index(32.0, 64.0, demand, actual, 10.0);
    const double expected = -(0.3 * 0.8 * std::exp(0.5) + 0.7 * std::exp(0.5) * 1.5);
    CHECK(reward(c, r, {0.3, 0.7}) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("EWM weights always sum to one") {
    RandomStream rng(4, "ewm");
    for (int trial = 0; trial < 1000; ++trial) {
        const auto t = static_cast<Eigen::Index>(2 + rng.below(30));
        const auto k = static_cast<Eigen::Index>(1 + rng.below(5));
        Eigen::MatrixXd c(t, k);
        Eigen::MatrixXd r(t, k);
        for (Eigen::Index i = 0; i < t; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) {
                c(i, j) = rng.uniform(0, 5);
                r(i, j) = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0, 3);
            }
        }
        const auto w = entropy_weights(c, r);
        CHECK(w.w_c + w.w_r == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(w.w_c >= 0.0);
        CHECK(w.w_r >= 0.0);
        const auto o = ewm_oracle::weights(c, r);
        CHECK(std::abs(w.w_c - o.first) <= 1e-10);
    }
}

TEST_CASE("EWM symmetric and degenerate cases") {
    Eigen::MatrixXd s(5, 2);
    s << 1, 2, 3, 1, 2, 2, 5, 4, 0, 1;
    const auto w = entropy_weights(s, s);
    CHECK(w.w_c == doctest::Approx(0.5));
    CHECK(w.w_r == doctest::Approx(0.5));

    // a constant objective carries no information and gets no weight
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 2, 0.8);
    const auto d = entropy_weights(flat, s);
    CHECK(d.w_c == 0.0);
    CHECK(d.w_r == 1.0);
    CHECK(entropy_weights(flat, flat).w_c == 0.5);

    CHECK_THROWS_AS(entropy_weights(Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Ones(1, 2)), InputError);
    CHECK_THROWS_AS(entropy_weights(Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(4, 2)), InputError);
    CHECK_THROWS_AS(entropy_weights(-Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(3, 2)), InputError);
}

TEST_CASE("EWM 10x2 fixture") {
    const auto [c, r] = ewm_oracle::fixture();
    const auto w = entropy_weights(c, r);
    const auto o = ewm_oracle::weights(c, r);
    CHECK(std::abs(w.w_c - o.first) <= 1e-10);
    CHECK(std::abs(w.w_r - o.second) <= 1e-10);
    // independent spreadsheet evaluation
    CHECK(std::abs(w.w_c - 0.43409730339367253) <= 1e-10);
    CHECK(std::abs(w.w_r - 0.5659026966063274) <= 1e-10);
}

TEST_CASE("Pareto distance") {
    const ParetoBounds b{1.0, 3.0, 0.0, 10.0};
    CHECK(pareto_distance(1.0, 0.0, b) == 0.0);
    CHECK(pareto_distance(3.0, 10.0, b) == doctest::Approx(std::sqrt(2.0)));
    CHECK(pareto_distance(1.0 + 0.6 * 2.0, 8.0, b) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pareto_distance(1.0, 0.0, {1.0, 1.0, 0.0, 1.0}), InputError);
}

TEST_CASE("pooled Pareto distances") {
    const std::array<double, 3> c{1.0, 2.0, 3.0};
    const std::array<double, 3> r{0.0, 5.0, 10.0};
    const auto d = pooled_pareto_distances(c, r);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(d[2] == doctest::Approx(std::sqrt(2.0)));
    // a pool member attaining both minima sits at the ideal point
    const std::array<double, 2> c2{1.0, 1.0};
    const std::array<double, 2> r2{0.0, 4.0};
    const auto d2 = pooled_pareto_distances(c2, r2);
    CHECK(d2[0] == 0.0);
    CHECK(d2[1] == doctest::Approx(1.0));
}

TEST_CASE("R squared") {
    const std::array<double, 4> a{1, 2, 3, 4};
    CHECK(r_squared(a, a) == 1.0);
    const std::array<double, 4> m{2.5, 2.5, 2.5, 2.5};
    CHECK(r_squared(a, m) == doctest::Approx(0.0));
    CHECK_THROWS_AS(r_squared(m, a), InputError);
    CHECK_THROWS_AS(r_squared(std::array<double, 1>{1}, std::array<double, 1>{1}), InputError);
}
