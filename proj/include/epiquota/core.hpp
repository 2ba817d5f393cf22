#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace epiquota {

// Raised for malformed input or a value that violates a documented invariant.
// `field()` names the offending field (dotted path for nested scenario keys).
class InputError : public std::runtime_error {
public:
    InputError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Raised when a run reaches a state the model promises never to produce.
class InvariantBreach : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DivisionId {
    std::size_t index = 0;

    friend bool operator==(DivisionId, DivisionId) = default;
    friend auto operator<=>(DivisionId, DivisionId) = default;
};

// Compartment vector [S, I, H, R] of one division. Person counts are real valued.
struct EpidemicState {
    double s = 0.0;
    double i = 0.0;
    double h = 0.0;
    double r = 0.0;

    double total() const noexcept { return s + i + h + r; }

    EpidemicState& operator+=(const EpidemicState& o) noexcept {
        s += o.s; i += o.i; h += o.h; r += o.r;
        return *this;
    }
    EpidemicState& operator-=(const EpidemicState& o) noexcept {
        s -= o.s; i -= o.i; h -= o.h; r -= o.r;
        return *this;
    }
    friend EpidemicState operator+(EpidemicState a, const EpidemicState& b) noexcept { return a += b; }
    friend EpidemicState operator-(EpidemicState a, const EpidemicState& b) noexcept { return a -= b; }
    friend EpidemicState operator*(double k, const EpidemicState& a) noexcept {
        return {k * a.s, k * a.i, k * a.h, k * a.r};
    }
    friend bool operator==(const EpidemicState&, const EpidemicState&) = default;

    // Throws InputError naming `field` when a component is negative or non-finite.
    void validate(const std::string& field) const;
};

struct DiseaseParams {
    double gamma = 0.0;  // hospitalization rate, 1/day
    double theta = 0.0;  // cure rate, 1/day
    double delta = 0.0;  // self-recovery rate, 1/day
    double beta0 = 0.0;  // infection rate at day 0, 1/day
    double effective_infectious_period = 1.0;  // days
    double si_mean = 7.5;  // serial interval mean, days
    double si_sd = 3.4;    // serial interval standard deviation, days
    double si_max = 0.0;   // truncation, days; 0 selects the 99% quantile rule

    void validate() const;
    friend bool operator==(const DiseaseParams&, const DiseaseParams&) = default;
};

struct ObjectiveParams {
    std::vector<double> k;  // baseline strain per division
    double h0 = 72.0;
    double l0 = 64.0;
    double lambda = 0.99;

    void validate(std::size_t divisions) const;
    friend bool operator==(const ObjectiveParams&, const ObjectiveParams&) = default;
};

// Thresholds of the control problem: termination rules, expert thresholds and
// the online infection-rate refresh.
struct ControlParams {
    int time_threshold = 60;            // days
    double lockdown_threshold = 336.0;  // L_T
    double breach_fraction = 0.2;       // share of divisions that triggers a breach
    double breach_penalty = 100.0;      // subtracted from every agent on breach
    double expert_hosp_threshold = 100.0;  // X_h
    double expert_loss_threshold = 168.0;  // X_l
    int max_steps = 300;
    int rt_lag = -1;  // days between the estimate's reference day and today; -1 = derived

    void validate() const;
    friend bool operator==(const ControlParams&, const ControlParams&) = default;
};

struct Division {
    DivisionId id;
    std::string name;
    EpidemicState initial;
    double beds_per_1000 = 6.92;

    friend bool operator==(const Division&, const Division&) = default;
};

// Where daily demand matrices come from.
struct OdSource {
    enum class Kind { gravity, csv };
    Kind kind = Kind::gravity;

    // gravity
    std::vector<std::vector<double>> distances_km;
    double trip_rate = 0.0;
    double exponent = 2.0;
    double noise_sigma = 0.0;
    int days = 7;

    // csv; relative paths resolve against the scenario file's directory
    std::filesystem::path path;

    friend bool operator==(const OdSource&, const OdSource&) = default;
};

struct Scenario {
    std::vector<Division> divisions;
    DiseaseParams disease;
    ObjectiveParams objectives;
    ControlParams control;
    int horizon = 60;
    std::uint64_t seed = 0;
    OdSource od_source;
    std::filesystem::path base_dir;  // not serialized

    std::size_t size() const noexcept { return divisions.size(); }
    std::vector<EpidemicState> initial_states() const;
    std::vector<double> populations() const;

    void validate() const;

    friend bool operator==(const Scenario& a, const Scenario& b) {
        return a.divisions == b.divisions && a.disease == b.disease && a.objectives == b.objectives &&
               a.control == b.control && a.horizon == b.horizon && a.seed == b.seed &&
               a.od_source == b.od_source;
    }
};

// Rounds a real person count half-up for reporting.
inline long long report_count(double persons) { return static_cast<long long>(std::floor(persons + 0.5)); }

}  // namespace epiquota
