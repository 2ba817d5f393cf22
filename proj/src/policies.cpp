#include "epiquota/policies.hpp"

#include <fmt/format.h>

namespace epiquota {

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::none:
            return "none";
        case PolicyKind::count_threshold:
            return "count_threshold";
        case PolicyKind::mitigation:
            return "mitigation";
        case PolicyKind::suppression:
            return "suppression";
        case PolicyKind::expert:
            return "expert";
        case PolicyKind::random:
            return "random";
        case PolicyKind::learned:
            return "learned";
    }
    return "none";
}

PolicyKind parse_policy_kind(std::string_view id) {
    for (auto kind : {PolicyKind::none, PolicyKind::count_threshold, PolicyKind::mitigation, PolicyKind::suppression,
                      PolicyKind::expert, PolicyKind::random, PolicyKind::learned}) {
        if (id == to_string(kind)) {
            return kind;
        }
    }
    throw InputError("policy", fmt::format("unknown policy id '{}'", id));
}

double count_threshold_quota(double new_cases, double population, double previous) {
    if (!(population > 0.0)) {
        throw InputError("population", "must be positive");
    }
    if (new_cases < kCountThresholdLowCases) {
        return kCountThresholdOpen;
    }
    if (new_cases > population / 1000.0) {
        return kCountThresholdStrict;
    }
    return previous;
}

double mitigation_quota(double cases_7d, double population) {
    return cases_7d > population / 1000.0 ? kMitigationQuota : 1.0;
}

SuppressionClock advance_suppression(std::optional<SuppressionClock> clock, double cases_7d) {
    const bool infected = cases_7d >= 1.0;
    if (!clock || clock->infected != infected) {
        return {infected, 0};
    }
    return {infected, clock->days + 1};
}

double suppression_quota(const SuppressionClock& clock) {
    if (clock.infected) {
        return clock.days < 7 ? 0.30 : 0.10;
    }
    return clock.days < 14 ? 0.50 : 0.90;
}

double expert_quota(double hospitalized, double accumulated_loss, double x_h, double x_l) {
    if (!(x_h > 0.0) || !(x_l > 0.0)) {
        throw InputError("expert thresholds", "must be positive");
    }
    return hospitalized > x_h && accumulated_loss < x_l ? 0.0 : 1.0;
}

QuotaMatrix rows_to_quota(int day, const std::vector<double>& rows) {
    const auto k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd q(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        q.row(i).setConstant(rows[static_cast<std::size_t>(i)]);
    }
    return QuotaMatrix(day, std::move(q));
}

QuotaMatrix NoPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    return QuotaMatrix::filled(day, obs.size(), 1.0);
}

void CountThresholdPolicy::reset(const Scenario& scenario, std::uint64_t) {
    previous_.assign(scenario.size(), kCountThresholdOpen);
}

QuotaMatrix CountThresholdPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    previous_.resize(obs.size(), kCountThresholdOpen);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        previous_[i] = count_threshold_quota(obs[i].new_infections, obs[i].population, previous_[i]);
    }
    return rows_to_quota(day, previous_);
}

QuotaMatrix MitigationPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    std::vector<double> rows(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        rows[i] = mitigation_quota(obs[i].new_infections_7d, obs[i].population);
    }
    return rows_to_quota(day, rows);
}

void SuppressionPolicy::reset(const Scenario& scenario, std::uint64_t) { clocks_.assign(scenario.size(), std::nullopt); }

QuotaMatrix SuppressionPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    clocks_.resize(obs.size());
    std::vector<double> rows(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        clocks_[i] = advance_suppression(clocks_[i], obs[i].new_infections_7d);
        rows[i] = suppression_quota(*clocks_[i]);
    }
    return rows_to_quota(day, rows);
}

void ExpertPolicy::reset(const Scenario& scenario, std::uint64_t) {
    x_h_ = scenario.control.expert_hosp_threshold;
    x_l_ = scenario.control.expert_loss_threshold;
}

QuotaMatrix ExpertPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    std::vector<double> rows(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        rows[i] = expert_quota(obs[i].state.h, obs[i].accumulated_loss, x_h_, x_l_);
    }
    return rows_to_quota(day, rows);
}

void RandomPolicy::reset(const Scenario&, std::uint64_t seed) { rng_.emplace(seed, "policy/random"); }

QuotaMatrix RandomPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    if (!rng_) {
        rng_.emplace(0, "policy/random");
    }
    const auto k = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd q(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            q(i, j) = rng_->uniform();
        }
    }
    return QuotaMatrix(day, std::move(q));
}

std::unique_ptr<Policy> make_heuristic_policy(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::none:
            return std::make_unique<NoPolicy>();
        case PolicyKind::count_threshold:
            return std::make_unique<CountThresholdPolicy>();
        case PolicyKind::mitigation:
            return std::make_unique<MitigationPolicy>();
        case PolicyKind::suppression:
            return std::make_unique<SuppressionPolicy>();
        case PolicyKind::expert:
            return std::make_unique<ExpertPolicy>();
        case PolicyKind::random:
            return std::make_unique<RandomPolicy>();
        case PolicyKind::learned:
            break;
    }
    throw InputError("policy", "the learned policy needs a parameter file");
}

}  // namespace epiquota
