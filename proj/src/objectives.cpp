#include "epiquota/objectives.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace epiquota {

namespace {

// Normalized entropy of a per-day series treated as a negative indicator.
double series_entropy(const Eigen::VectorXd& x) {
    const auto n = x.size();
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    if (hi - lo <= 0.0) {
        return 1.0;  // uniform proportions
    }
    const Eigen::VectorXd inverted = (hi - x.array()) / (hi - lo);
    const double total = inverted.sum();
    double h = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double p = inverted[t] / total;
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h / std::log(static_cast<double>(n));
}

}  // namespace

double restricted_fraction(std::span<const double> demand_row, std::span<const double> actual_row,
                           double demand_mean) {
    if (demand_row.size() != actual_row.size()) {
        throw InputError("actual_row", "length differs from demand_row");
    }
    if (!(demand_mean > 0.0)) {
        return 0.0;
    }
    double restricted = 0.0;
    for (std::size_t j = 0; j < demand_row.size(); ++j) {
        restricted += demand_row[j] - actual_row[j];
    }
    return restricted / demand_mean;
}

RestrictionLedger update_ledger(const RestrictionLedger& ledger, std::span<const double> demand_row,
                                std::span<const double> actual_row, double demand_mean) {
    const double f = restricted_fraction(demand_row, actual_row, demand_mean);
    return {ledger.lambda * ledger.loss + ledger.lambda * f, ledger.lambda};
}

double strain_index(double hospitalized, double k, double h0) {
    if (!(h0 > 0.0)) {
        throw InputError("h0", "must be positive");
    }
    return k * std::exp(hospitalized / h0);
}

double loss_index(double accumulated_loss, double l0, std::span<const double> demand_row,
                  std::span<const double> actual_row, double demand_mean) {
    if (!(l0 > 0.0)) {
        throw InputError("l0", "must be positive");
    }
    return std::exp(accumulated_loss / l0) * restricted_fraction(demand_row, actual_row, demand_mean);
}

ObjectiveWeights entropy_weights(const Eigen::MatrixXd& c_series, const Eigen::MatrixXd& r_series) {
    if (c_series.rows() < 2 || r_series.rows() < 2) {
        throw InputError("series", fmt::format("need at least 2 days, got {}", std::min(c_series.rows(), r_series.rows())));
    }
    if (c_series.rows() != r_series.rows()) {
        throw InputError("series", "objective series differ in length");
    }
    if ((c_series.array() < 0.0).any() || (r_series.array() < 0.0).any()) {
        throw InputError("series", "entries must be non-negative");
    }
    const double h_c = series_entropy(c_series.rowwise().mean());
    const double h_r = series_entropy(r_series.rowwise().mean());
    const double denom = 2.0 - h_c - h_r;
    if (denom <= 0.0) {
        return ObjectiveWeights::equal();
    }
    ObjectiveWeights w;
    w.w_c = (1.0 - h_c) / denom;
    w.w_r = 1.0 - w.w_c;
    return w;
}

double reward(double c, double r, const ObjectiveWeights& weights) { return -(weights.w_c * c + weights.w_r * r); }

double pareto_distance(double c, double r, const ParetoBounds& b) {
    if (!(b.c_max > b.c_min)) {
        throw InputError("c_max", "must exceed c_min");
    }
    if (!(b.r_max > b.r_min)) {
        throw InputError("r_max", "must exceed r_min");
    }
    const double nc = (c - b.c_min) / (b.c_max - b.c_min);
    const double nr = (r - b.r_min) / (b.r_max - b.r_min);
    return std::sqrt(nc * nc + nr * nr);
}

std::vector<double> pooled_pareto_distances(std::span<const double> c, std::span<const double> r) {
    if (c.size() != r.size()) {
        throw InputError("r", "pool sizes differ");
    }
    if (c.empty()) {
        return {};
    }
    const auto [c_lo, c_hi] = std::minmax_element(c.begin(), c.end());
    const auto [r_lo, r_hi] = std::minmax_element(r.begin(), r.end());
    const double c_span = *c_hi - *c_lo;
    const double r_span = *r_hi - *r_lo;
    std::vector<double> out;
    out.reserve(c.size());
    for (std::size_t n = 0; n < c.size(); ++n) {
        const double nc = c_span > 0.0 ? (c[n] - *c_lo) / c_span : 0.0;
        const double nr = r_span > 0.0 ? (r[n] - *r_lo) / r_span : 0.0;
        out.push_back(std::sqrt(nc * nc + nr * nr));
    }
    return out;
}

double r_squared(std::span<const double> actual, std::span<const double> estimated) {
    if (actual.size() != estimated.size() || actual.size() < 2) {
        throw InputError("estimated", "series must have equal lengths of at least 2");
    }
    double mean = 0.0;
    for (double a : actual) {
        mean += a;
    }
    mean /= static_cast<double>(actual.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        sse += (actual[t] - estimated[t]) * (actual[t] - estimated[t]);
        sst += (actual[t] - mean) * (actual[t] - mean);
    }
    if (sst <= 0.0) {
        throw InputError("actual", "constant series has no variance to explain");
    }
    return 1.0 - sse / sst;
}

}  // namespace epiquota
