#include "epiquota/rt.hpp"

#include "fixtures.hpp"
#include "rt_oracle.hpp"

#include <doctest.h>

#include <cmath>

using namespace epiquota;

TEST_CASE("serial interval from mean and sd") {
    const auto si = rt::SerialInterval::from_mean_sd(7.5, 3.4);
    CHECK(si.shape() == doctest::Approx((7.5 / 3.4) * (7.5 / 3.4)));
    CHECK(si.scale() == doctest::Approx(3.4 * 3.4 / 7.5));
    CHECK(si.mean() == doctest::Approx(7.5));
    // smallest integer truncation reaching 99% of the mass
    CHECK(si.cdf(si.max_days()) >= 0.99);
    CHECK(si.cdf(si.max_days() - 1) < 0.99);
    CHECK(si.max_days() == 18);
    CHECK(si.weight(-1) == 0.0);
    CHECK(si.weight(si.max_days() + 1) == 0.0);
    CHECK(si.weight(0) == doctest::Approx(si.pdf(0.5)));
    CHECK(rt::si_weight(3, si) == doctest::Approx(si.pdf(3.0)));

    CHECK_THROWS_AS(rt::SerialInterval(-1.0, 1.0), InputError);
    CHECK_THROWS_AS(rt::SerialInterval::from_mean_sd(7.5, 3.4, 5), InputError);
    CHECK(rt::SerialInterval::from_mean_sd(7.5, 3.4, 25).max_days() == 25);
}

TEST_CASE("attribution probabilities over the window sum to one") {
    const auto si = rt::SerialInterval::from_mean_sd(5.0, 2.0);
    RandomStream rng(5, "attr");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> inc(30);
        for (auto& x : inc) {
            x = rng.bernoulli(0.3) ? 0.0 : std::floor(rng.uniform(0, 20));
        }
        for (int v = 0; v < 30; ++v) {
            double total = 0.0;
            bool any = false;
            for (int u = std::max(0, v - si.max_days()); u <= v; ++u) {
                total += inc[static_cast<std::size_t>(u)] * rt::attribution_prob(u, v, inc, si);
                any |= inc[static_cast<std::size_t>(u)] > 0.0;
            }
            if (any) {
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            } else {
                CHECK(total == 0.0);
            }
        }
    }
    CHECK_THROWS_AS(rt::attribution_prob(5, 3, std::vector<double>(10, 1.0), si), InputError);
}

TEST_CASE("day-level estimate equals individual-level enumeration") {
    const auto si = rt::SerialInterval::from_mean_sd(4.0, 2.0);
    RandomStream rng(2, "rt-oracle");
    for (int trial = 0; trial < 50; ++trial) {
        const auto inst = rt_oracle::random_instance(rng);
        const auto est = rt::estimate_rt(inst.incidence, si, inst.now);
        const auto oracle = rt_oracle::enumerate(inst.person_day, static_cast<int>(inst.incidence.size()), si, inst.now);
        REQUIRE(est.points.size() == oracle.size());
        for (std::size_t n = 0; n < oracle.size(); ++n) {
            CHECK(est.points[n].day == oracle[n].day);
            CHECK(std::abs(est.points[n].rt_raw - oracle[n].rt_raw) <= 1e-12);
            CHECK(std::abs(est.points[n].rt_corrected - oracle[n].rt_corrected) <= 1e-12);
            CHECK(est.points[n].imputed == oracle[n].imputed);
        }
    }
}

TEST_CASE("censoring correction ratio") {
    const auto si = rt::SerialInterval::from_mean_sd(7.5, 3.4);
    std::vector<double> inc(40);
    for (std::size_t t = 0; t < inc.size(); ++t) {
        inc[t] = 10.0 + static_cast<double>(t);
    }
    const int now = 39;
    const auto est = rt::estimate_rt(inc, si, now);
    double previous = 0.0;
    for (const auto& p : est.points) {
        REQUIRE(p.rt_raw >= 0.0);
        CHECK(p.rt_corrected >= p.rt_raw);
        if (p.rt_raw > 0.0) {
            const double ratio = p.rt_corrected / p.rt_raw;
            // ratio grows toward 2 as the day nears the present
            CHECK(ratio >= previous - 1e-15);
            CHECK(ratio == doctest::Approx(rt::censoring_factor(si, now - p.day)).epsilon(1e-14));
            previous = ratio;
            if (now - p.day >= si.max_days()) {
                CHECK(ratio <= 1.01);
            }
        }
    }
    CHECK(rt::censoring_factor(si, 0) == 2.0);
    CHECK(rt::censoring_factor(si, si.max_days()) == 1.0);
    CHECK(rt::censoring_factor(si, 3) == doctest::Approx(2.0 - si.cdf(3.0)));
    CHECK_THROWS_AS(rt::censoring_factor(si, -1), InputError);
    // the newest day has seen no secondary cases yet
    CHECK(est.points.back().rt_raw == 0.0);

    // a single-day series: corrected = 2 x raw at T - t = 0 (both 0 here)
    const auto single = rt::estimate_rt(std::vector<double>{5.0}, si, 0);
    REQUIRE(single.points.size() == 1);
    CHECK(single.points[0].rt_corrected == 2.0 * single.points[0].rt_raw);
}

TEST_CASE("scaling incidence leaves Rt unchanged") {
    const auto si = rt::SerialInterval::from_mean_sd(5.0, 3.0);
    std::vector<double> inc{1, 3, 0, 7, 12, 9, 15, 20, 18, 0, 25, 30};
    std::vector<double> scaled = inc;
    for (auto& x : scaled) {
        x *= 37.5;
    }
    const auto a = rt::estimate_rt(inc, si, 11);
    const auto b = rt::estimate_rt(scaled, si, 11);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t n = 0; n < a.points.size(); ++n) {
        CHECK(a.points[n].rt_raw == doctest::Approx(b.points[n].rt_raw).epsilon(1e-12));
    }
}

TEST_CASE("zero days are carried forward and flagged") {
    const auto si = rt::SerialInterval::from_mean_sd(3.0, 1.5);
    const std::vector<double> inc{0, 0, 4, 0, 0, 6, 2};
    const auto est = rt::estimate_rt(inc, si, 6);
    REQUIRE(est.points.size() == 5);
    CHECK(est.points.front().day == 2);
    CHECK(est.points[1].imputed);
    CHECK(est.points[1].rt_raw == est.points[0].rt_raw);
    CHECK_FALSE(est.points[3].imputed);

    const auto empty = rt::estimate_rt(std::vector<double>(5, 0.0), si, 4);
    CHECK(empty.empty());
    CHECK_FALSE(empty.warning.empty());
}

TEST_CASE("single-day query agrees with the full estimate") {
    const auto si = rt::SerialInterval::from_mean_sd(4.0, 2.5);
    RandomStream rng(9, "at");
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = rt_oracle::random_instance(rng, 50, 30);
        const auto est = rt::estimate_rt(inst.incidence, si, inst.now);
        for (int day = 0; day <= inst.now; ++day) {
            const auto one = rt::estimate_rt_at(inst.incidence, si, inst.now, day);
            const auto* full = est.at(day);
            REQUIRE(one.has_value() == (full != nullptr));
            if (full != nullptr) {
                CHECK(one->rt_corrected == doctest::Approx(full->rt_corrected).epsilon(1e-12));
                CHECK(one->imputed == full->imputed);
            }
        }
    }
}

TEST_CASE("reference lag keeps 95% of the final value") {
    for (auto [mean, sd] : {std::pair{7.5, 3.4}, std::pair{5.0, 4.5}, std::pair{3.0, 1.0}}) {
        const auto si = rt::SerialInterval::from_mean_sd(mean, sd);
        const int lag = rt::reference_lag(si);
        const double f = si.cdf(lag);
        CHECK(f * (2.0 - f) >= 0.95);
        if (lag > 1) {
            const double g = si.cdf(lag - 1);
            CHECK(g * (2.0 - g) < 0.95);
        }
    }
}

TEST_CASE("beta from Rt") {
    CHECK(rt::beta_from_rt(2.1, 2.1 / 0.47) == doctest::Approx(0.47));
    CHECK_THROWS_AS(rt::beta_from_rt(1.0, 0.0), InputError);
    CHECK_THROWS_AS(rt::beta_from_rt(-1.0, 2.0), InputError);
}

TEST_CASE("three-day smoothing") {
    const std::vector<double> v{3, 6, 9, 0};
    const auto s = rt::smooth3(v);
    CHECK(s[0] == doctest::Approx(4.5));
    CHECK(s[1] == doctest::Approx(6.0));
    CHECK(s[3] == doctest::Approx(4.5));
}
