#include "epiquota/rt.hpp"

#include "epiquota/core.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/gamma.hpp>
#include <fmt/format.h>

namespace epiquota::rt {

namespace {

constexpr double kTruncationMass = 0.99;

boost::math::gamma_distribution<double> distribution(double shape, double scale) {
    return boost::math::gamma_distribution<double>(shape, scale);
}

double count_at(std::span<const double> incidence, int day) {
    return incidence[static_cast<std::size_t>(day)];
}

// Denominator of the attribution ratio for a case on day v.
double infector_mass(std::span<const double> incidence, const SerialInterval& si, int v) {
    double mass = 0.0;
    for (int w = std::max(0, v - si.max_days()); w <= v; ++w) {
        mass += count_at(incidence, w) * si.weight(v - w);
    }
    return mass;
}

void check_now(std::span<const double> incidence, int now) {
    if (now < 0 || static_cast<std::size_t>(now) >= incidence.size()) {
        throw InputError("now", fmt::format("day {} outside incidence of {} days", now, incidence.size()));
    }
}

}  // namespace

double censoring_factor(const SerialInterval& si, int elapsed) {
    if (elapsed < 0) {
        throw InputError("elapsed", "must be non-negative");
    }
    const double observed = elapsed >= si.max_days() ? 1.0 : si.cdf(static_cast<double>(elapsed));
    return 1.0 + (1.0 - observed);
}

SerialInterval::SerialInterval(double shape, double scale, int max_days)
    : shape_(shape), scale_(scale), max_days_(max_days) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw InputError("si_shape", "must be positive");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InputError("si_scale", "must be positive");
    }
    const auto dist = distribution(shape, scale);
    if (max_days_ <= 0) {
        max_days_ = std::max(1, static_cast<int>(std::ceil(boost::math::quantile(dist, kTruncationMass))));
        // quantile rounding can leave the CDF a hair short
        while (boost::math::cdf(dist, max_days_) < kTruncationMass) {
            ++max_days_;
        }
    } else if (boost::math::cdf(dist, static_cast<double>(max_days_)) < kTruncationMass) {
        throw InputError("si_max", fmt::format("{} days covers less than 99% of the serial interval", max_days_));
    }
    weights_.resize(static_cast<std::size_t>(max_days_) + 1);
    for (int lag = 0; lag <= max_days_; ++lag) {
        weights_[static_cast<std::size_t>(lag)] = boost::math::pdf(dist, lag == 0 ? 0.5 : static_cast<double>(lag));
    }
}

SerialInterval SerialInterval::from_mean_sd(double mean_days, double sd_days, int max_days) {
    if (!(mean_days > 0.0)) {
        throw InputError("si_mean", "must be positive");
    }
    if (!(sd_days > 0.0)) {
        throw InputError("si_sd", "must be positive");
    }
    const double shape = (mean_days / sd_days) * (mean_days / sd_days);
    const double scale = sd_days * sd_days / mean_days;
    return SerialInterval(shape, scale, max_days);
}

SerialInterval SerialInterval::from_disease(const DiseaseParams& disease) {
    return from_mean_sd(disease.si_mean, disease.si_sd, static_cast<int>(std::ceil(disease.si_max)));
}

double SerialInterval::pdf(double days) const {
    if (days < 0.0) {
        return 0.0;
    }
    return boost::math::pdf(distribution(shape_, scale_), days);
}

double SerialInterval::cdf(double days) const {
    if (days <= 0.0) {
        return 0.0;
    }
    return boost::math::cdf(distribution(shape_, scale_), days);
}

double si_weight(int lag, const SerialInterval& si) { return si.weight(lag); }

double attribution_prob(int t_u, int t_v, std::span<const double> incidence, const SerialInterval& si) {
    if (t_u < 0 || t_u > t_v || static_cast<std::size_t>(t_v) >= incidence.size()) {
        throw InputError("t_u", fmt::format("need 0 <= t_u <= t_v < {}", incidence.size()));
    }
    const double mass = infector_mass(incidence, si, t_v);
    if (mass <= 0.0) {
        return 0.0;
    }
    return si.weight(t_v - t_u) / mass;
}

const RtPoint* RtEstimate::at(int day) const {
    const auto it = std::find_if(points.begin(), points.end(), [day](const RtPoint& p) { return p.day == day; });
    return it == points.end() ? nullptr : &*it;
}

RtEstimate estimate_rt(std::span<const double> incidence, const SerialInterval& si, int now) {
    check_now(incidence, now);
    RtEstimate out;

    std::vector<double> mass(static_cast<std::size_t>(now) + 1);
    for (int v = 0; v <= now; ++v) {
        mass[static_cast<std::size_t>(v)] = infector_mass(incidence, si, v);
    }

    const RtPoint* last = nullptr;
    for (int t = 0; t <= now; ++t) {
        if (count_at(incidence, t) <= 0.0) {
            if (last != nullptr) {
                RtPoint carried = *last;
                carried.day = t;
                carried.imputed = true;
                out.points.push_back(carried);
                last = &out.points.back();
            }
            continue;
        }
        double expected = 0.0;
        for (int v = t + 1; v <= std::min(t + si.max_days(), now); ++v) {
            const double m = mass[static_cast<std::size_t>(v)];
            if (m > 0.0) {
                expected += count_at(incidence, v) * si.weight(v - t) / m;
            }
        }
        out.points.push_back({t, expected, expected * censoring_factor(si, now - t), false});
        last = &out.points.back();
    }
    if (out.points.empty()) {
        out.warning = "all-zero incidence; no reproduction number estimated";
    }
    return out;
}

std::optional<RtPoint> estimate_rt_at(std::span<const double> incidence, const SerialInterval& si, int now,
                                      int day) {
    check_now(incidence, now);
    if (day < 0 || day > now) {
        return std::nullopt;
    }
    int source = day;
    while (source >= 0 && count_at(incidence, source) <= 0.0) {
        --source;
    }
    if (source < 0) {
        return std::nullopt;
    }
    double expected = 0.0;
    for (int v = source + 1; v <= std::min(source + si.max_days(), now); ++v) {
        const double m = infector_mass(incidence, si, v);
        if (m > 0.0) {
            expected += count_at(incidence, v) * si.weight(v - source) / m;
        }
    }
    return RtPoint{day, expected, expected * censoring_factor(si, now - source), source != day};
}

double beta_from_rt(double rt, double period_days) {
    if (!(period_days > 0.0)) {
        throw InputError("effective_infectious_period", "must be positive");
    }
    if (rt < 0.0) {
        throw InputError("rt", "must be non-negative");
    }
    return rt / period_days;
}

int reference_lag(const SerialInterval& si, double retention) {
    for (int lag = 1; lag < si.max_days(); ++lag) {
        const double f = si.cdf(static_cast<double>(lag));
        if (f * (2.0 - f) >= retention) {
            return lag;
        }
    }
    return si.max_days();
}

std::vector<double> smooth3(std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = std::min(values.size() - 1, k + 1);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            sum += values[j];
        }
        out[k] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace epiquota::rt
