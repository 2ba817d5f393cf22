#pragma once

#include "epiquota/core.hpp"

#include <span>
#include <vector>

#include <Eigen/Core>

namespace epiquota {

struct ObjectiveSample {
    double c = 0.0;  // hospital capacity strain
    double r = 0.0;  // mobility restriction loss
    int day = 0;
    DivisionId division;
};

// Accumulated restriction loss of one division, decayed by lambda each day.
struct RestrictionLedger {
    double loss = 0.0;
    double lambda = 0.99;
};

struct ObjectiveWeights {
    double w_c = 0.5;
    double w_r = 0.5;

    static ObjectiveWeights equal() { return {}; }
};

// Restricted demand of a row relative to the mean demand; 0 when the mean is 0.
double restricted_fraction(std::span<const double> demand_row, std::span<const double> actual_row,
                           double demand_mean);

// L' = lambda * L + lambda * restricted_fraction.
RestrictionLedger update_ledger(const RestrictionLedger& ledger, std::span<const double> demand_row,
                                std::span<const double> actual_row, double demand_mean);

// c = k * exp(h / h0)
double strain_index(double hospitalized, double k, double h0);

// r = exp(L / l0) * restricted_fraction
double loss_index(double accumulated_loss, double l0, std::span<const double> demand_row,
                  std::span<const double> actual_row, double demand_mean);

// Entropy weight method over a T x K window of each objective. Both series
// are negative indicators; divisions are averaged per day before weighting.
ObjectiveWeights entropy_weights(const Eigen::MatrixXd& c_series, const Eigen::MatrixXd& r_series);

// -(w_c c + w_r r)
double reward(double c, double r, const ObjectiveWeights& weights);

struct ParetoBounds {
    double c_min = 0.0;
    double c_max = 1.0;
    double r_min = 0.0;
    double r_max = 1.0;
};

// Euclidean distance of the min-max normalized (c, r) from the ideal (0, 0).
double pareto_distance(double c, double r, const ParetoBounds& bounds);

// Bounds taken from the pooled (c, r) outcomes of the compared policies. A
// dimension with no spread normalizes to 0 for every member of the pool.
std::vector<double> pooled_pareto_distances(std::span<const double> c, std::span<const double> r);

double r_squared(std::span<const double> actual, std::span<const double> estimated);

}  // namespace epiquota
