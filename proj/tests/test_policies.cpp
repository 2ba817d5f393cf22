#include "epiquota/policies.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace epiquota;

namespace {

AgentObservation observation(double new_cases, double cases_7d, double population, double h = 0.0, double loss = 0.0) {
    AgentObservation o;
    o.new_infections = new_cases;
    o.new_infections_7d = cases_7d;
    o.population = population;
    o.state = {population - h, 0.0, h, 0.0};
    o.accumulated_loss = loss;
    return o;
}

}  // namespace

TEST_CASE("policy ids") {
    for (auto kind : {PolicyKind::none, PolicyKind::count_threshold, PolicyKind::mitigation, PolicyKind::suppression,
                      PolicyKind::expert, PolicyKind::random, PolicyKind::learned}) {
        CHECK(parse_policy_kind(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(parse_policy_kind("lockdown"), InputError);
    CHECK_THROWS_AS(make_heuristic_policy(PolicyKind::learned), InputError);
}

TEST_CASE("count threshold branches: 10% above N/1000, 100% below 3 cases") {
    const double n = 50000.0;  // N/1000 = 50
    CHECK(count_threshold_quota(51.0, n, 1.0) == 0.10);
    CHECK(count_threshold_quota(2.99, n, 0.10) == 1.00);
    CHECK(count_threshold_quota(0.0, n, 0.10) == 1.00);
    // in between the previous quota holds
    CHECK(count_threshold_quota(50.0, n, 0.10) == 0.10);
    CHECK(count_threshold_quota(3.0, n, 1.00) == 1.00);
    CHECK(count_threshold_quota(20.0, n, 0.10) == 0.10);
    // a tiny division: fewer than 3 cases reopens even above N/1000
    CHECK(count_threshold_quota(2.0, 1000.0, 0.10) == 1.00);
    CHECK_THROWS_AS(count_threshold_quota(1.0, 0.0, 1.0), InputError);
}

TEST_CASE("mitigation: 50% when the weekly sum exceeds N/1000") {
    CHECK(mitigation_quota(10.01, 10000.0) == 0.50);
    CHECK(mitigation_quota(10.0, 10000.0) == 1.00);
    CHECK(mitigation_quota(0.0, 10000.0) == 1.00);
}

TEST_CASE("suppression: 30% then 10% while infected, 50% then 90% when clean") {
    std::optional<SuppressionClock> clock;
    std::vector<double> seen;
    for (int d = 0; d < 9; ++d) {
        clock = advance_suppression(clock, 5.0);
        seen.push_back(suppression_quota(*clock));
    }
    CHECK(seen == std::vector<double>{0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.10, 0.10});
    seen.clear();
    for (int d = 0; d < 16; ++d) {
        clock = advance_suppression(clock, 0.0);
        seen.push_back(suppression_quota(*clock));
    }
    CHECK(seen[0] == 0.50);
    CHECK(seen[13] == 0.50);
    CHECK(seen[14] == 0.90);
    CHECK(seen[15] == 0.90);
    // a new case restarts the infected branch
    clock = advance_suppression(clock, 1.0);
    CHECK(clock->infected);
    CHECK(clock->days == 0);
    CHECK(suppression_quota(*clock) == 0.30);
    CHECK(advance_suppression(std::nullopt, 0.99).infected == false);
}

TEST_CASE("expert rule with X_h = 100 and X_l = 168") {
    CHECK(expert_quota(101.0, 0.0, 100.0, 168.0) == 0.0);
    CHECK(expert_quota(101.0, 167.9, 100.0, 168.0) == 0.0);
    CHECK(expert_quota(100.0, 0.0, 100.0, 168.0) == 1.0);
    CHECK(expert_quota(101.0, 168.0, 100.0, 168.0) == 1.0);
    CHECK(expert_quota(0.0, 0.0, 100.0, 168.0) == 1.0);
    CHECK_THROWS_AS(expert_quota(1.0, 1.0, 0.0, 168.0), InputError);
}

TEST_CASE("rows_to_quota fills each row") {
    const QuotaMatrix q = rows_to_quota(4, {0.1, 0.9});
    CHECK(q.day == 4);
    CHECK(q.quotas(0, 1) == 0.1);
    CHECK(q.quotas(1, 0) == 0.9);
}

TEST_CASE("policy objects apply the branch rules per division") {
    Scenario s = fixtures::line_city(2);
    const std::vector<AgentObservation> obs{observation(100.0, 100.0, 10000.0, 150.0, 10.0),
                                            observation(0.0, 0.0, 10000.0)};

    NoPolicy none;
    CHECK(none.act(obs, 0).quotas.isConstant(1.0));

    CountThresholdPolicy ct;
    ct.reset(s, 1);
    const auto q1 = ct.act(obs, 0);
    CHECK(q1.quotas(0, 1) == 0.10);
    CHECK(q1.quotas(1, 0) == 1.00);
    // between the thresholds the strict quota persists
    const std::vector<AgentObservation> mid{observation(5.0, 5.0, 10000.0), observation(5.0, 5.0, 10000.0)};
    const auto q2 = ct.act(mid, 1);
    CHECK(q2.quotas(0, 1) == 0.10);
    CHECK(q2.quotas(1, 0) == 1.00);

    MitigationPolicy mit;
    CHECK(mit.act(obs, 0).quotas(0, 1) == 0.50);

    SuppressionPolicy sup;
    sup.reset(s, 1);
    const auto q3 = sup.act(obs, 0);
    CHECK(q3.quotas(0, 1) == 0.30);
    CHECK(q3.quotas(1, 0) == 0.50);

    s.control.expert_hosp_threshold = 100.0;
    s.control.expert_loss_threshold = 168.0;
    ExpertPolicy ex;
    ex.reset(s, 1);
    const auto q4 = ex.act(obs, 0);
    CHECK(q4.quotas(0, 1) == 0.0);
    CHECK(q4.quotas(1, 0) == 1.0);
}

TEST_CASE("random policy is seeded and bounded") {
    const Scenario s = fixtures::line_city(3);
    const std::vector<AgentObservation> obs(3);
    RandomPolicy a;
    RandomPolicy b;
    a.reset(s, 9);
    b.reset(s, 9);
    const auto qa = a.act(obs, 0);
    CHECK(qa.quotas == b.act(obs, 0).quotas);
    CHECK((qa.quotas.array() >= 0.0).all());
    CHECK((qa.quotas.array() < 1.0).all());
}
