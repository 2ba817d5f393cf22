#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epiquota {

struct DiseaseParams;

namespace rt {

// Gamma(shape, scale) serial interval truncated at `max_days`.
class SerialInterval {
public:
    // max_days <= 0 picks the smallest integer whose CDF reaches 0.99.
    SerialInterval(double shape, double scale, int max_days = 0);

    static SerialInterval from_mean_sd(double mean_days, double sd_days, int max_days = 0);
    static SerialInterval from_disease(const DiseaseParams& disease);

    double shape() const noexcept { return shape_; }
    double scale() const noexcept { return scale_; }
    int max_days() const noexcept { return max_days_; }
    double mean() const noexcept { return shape_ * scale_; }

    double pdf(double days) const;
    double cdf(double days) const;

    // Tabulated si_weight for lags 0..max_days.
    double weight(int lag) const noexcept {
        return (lag < 0 || lag > max_days_) ? 0.0 : weights_[static_cast<std::size_t>(lag)];
    }

private:
    double shape_;
    double scale_;
    int max_days_;
    std::vector<double> weights_;
};

// Gamma density at `lag` days; lag 0 is evaluated at half a day and lags past
// the truncation are 0.
double si_weight(int lag, const SerialInterval& si);

// Probability that a case on day t_v was infected by a case on day t_u, given
// the daily incidence. 0 when nobody in the window could have infected t_v.
double attribution_prob(int t_u, int t_v, std::span<const double> incidence, const SerialInterval& si);

// 2 - F(elapsed): 2 on the newest day, exactly 1 once elapsed >= max_days.
double censoring_factor(const SerialInterval& si, int elapsed);

struct RtPoint {
    int day = 0;
    double rt_raw = 0.0;
    double rt_corrected = 0.0;
    bool imputed = false;  // carried forward over a zero-incidence day
};

struct RtEstimate {
    std::vector<RtPoint> points;  // from the first day with cases through `now`
    std::string warning;

    bool empty() const noexcept { return points.empty(); }
    const RtPoint* at(int day) const;
};

// Expected secondary cases per case infected on each day, observed through
// day `now`, with the right-censoring correction E * (2 - F(now - t)).
RtEstimate estimate_rt(std::span<const double> incidence, const SerialInterval& si, int now);

// Estimate for one day only; same result as estimate_rt(...).at(day) but
// O(max_days^2) instead of O(now * max_days). Returns nullopt before the first case.
std::optional<RtPoint> estimate_rt_at(std::span<const double> incidence, const SerialInterval& si, int now,
                                      int day);

double beta_from_rt(double rt, double period_days);

// Smallest lag e >= 1 at which the corrected estimate is expected to keep
// `retention` of its final value, i.e. F(e) * (2 - F(e)) >= retention.
int reference_lag(const SerialInterval& si, double retention = 0.95);

// Centered three-day moving average; endpoints average what exists.
std::vector<double> smooth3(std::span<const double> values);

}  // namespace rt
}  // namespace epiquota
