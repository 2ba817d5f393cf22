#pragma once

#include "epiquota/env.hpp"
#include "epiquota/rng.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace epiquota {

enum class PolicyKind { none, count_threshold, mitigation, suppression, expert, random, learned };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view id);

// Branch rules. Each returns the quota applied to every destination of a row.

inline constexpr double kCountThresholdStrict = 0.10;
inline constexpr double kCountThresholdOpen = 1.00;
inline constexpr double kCountThresholdLowCases = 3.0;

// 0.10 when new cases exceed N/1000, 1.00 below 3 cases, otherwise `previous`.
double count_threshold_quota(double new_cases, double population, double previous);

inline constexpr double kMitigationQuota = 0.50;

// 0.50 when the 7-day case sum strictly exceeds N/1000, else 1.00.
double mitigation_quota(double cases_7d, double population);

// Per-division suppression clock: which branch is active and for how long.
struct SuppressionClock {
    bool infected = false;
    int days = 0;  // days spent in the current branch
};

// Moves the clock one day forward given the latest 7-day sum; switching
// branch restarts the count.
SuppressionClock advance_suppression(std::optional<SuppressionClock> clock, double cases_7d);

// infected: 0.30 for the first 7 days, then 0.10; clean: 0.50 for 14 days, then 0.90
double suppression_quota(const SuppressionClock& clock);

// Full lockdown (0) when H > X_h and L < X_l, else 1.
double expert_quota(double hospitalized, double accumulated_loss, double x_h, double x_l);

// Quota matrix whose row i is filled with rows[i].
QuotaMatrix rows_to_quota(int day, const std::vector<double>& rows);

class NoPolicy final : public Policy {
public:
    std::string id() const override { return "none"; }
    void reset(const Scenario&, std::uint64_t) override {}
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;
};

class CountThresholdPolicy final : public Policy {
public:
    std::string id() const override { return "count_threshold"; }
    void reset(const Scenario& scenario, std::uint64_t seed) override;
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;

private:
    std::vector<double> previous_;
};

class MitigationPolicy final : public Policy {
public:
    std::string id() const override { return "mitigation"; }
    void reset(const Scenario&, std::uint64_t) override {}
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;
};

class SuppressionPolicy final : public Policy {
public:
    std::string id() const override { return "suppression"; }
    void reset(const Scenario& scenario, std::uint64_t seed) override;
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;

private:
    std::vector<std::optional<SuppressionClock>> clocks_;
};

class ExpertPolicy final : public Policy {
public:
    std::string id() const override { return "expert"; }
    void reset(const Scenario& scenario, std::uint64_t seed) override;
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;

private:
    double x_h_ = 100.0;
    double x_l_ = 168.0;
};

// Independent uniform quota for every pair and day.
class RandomPolicy final : public Policy {
public:
    std::string id() const override { return "random"; }
    void reset(const Scenario& scenario, std::uint64_t seed) override;
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;

private:
    std::optional<RandomStream> rng_;
};

// Heuristic policy by id; "learned" is built from a parameter file instead.
std::unique_ptr<Policy> make_heuristic_policy(PolicyKind kind);

}  // namespace epiquota
