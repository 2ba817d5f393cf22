#pragma once

#include "epiquota/core.hpp"
#include "epiquota/mobility.hpp"
#include "epiquota/objectives.hpp"
#include "epiquota/rt.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epiquota {

// What agent i sees before choosing its quota row for the coming day.
struct AgentObservation {
    int position_code = 0;
    EpidemicState state;
    EpidemicState delta_state;  // change since the previous day
    double accumulated_loss = 0.0;
    double mean_demand = 0.0;  // mean outflow demand of the coming day

    // Case counts used by the threshold baselines.
    double new_infections = 0.0;
    double new_infections_7d = 0.0;
    double population = 0.0;
};

struct JointAction {
    QuotaMatrix quota;
};

enum class Termination { none, success, hospital_breach, lockdown_breach, timeout };

std::string_view to_string(Termination t);

struct AgentInfo {
    double c = 0.0;
    double r = 0.0;
    double new_infections = 0.0;
};

struct StepOutcome {
    std::vector<AgentObservation> observations;
    std::vector<double> rewards;
    Termination reason = Termination::none;
    std::vector<AgentInfo> info;
    std::vector<std::string> warnings;

    bool terminated() const noexcept { return reason != Termination::none; }
};

struct Transition {
    std::vector<AgentObservation> s;
    JointAction a;
    std::vector<double> r;
    std::vector<AgentObservation> s_next;
    bool done = false;
};

// Daily demand matrices. Days past the recorded horizon repeat the last full
// week of it (or cycle the whole record when it is shorter than a week).
class DemandProvider {
public:
    DemandProvider(const Scenario& scenario, std::uint64_t seed);

    const MobilityMatrix& demand(int day);
    int recorded_days() const noexcept { return days_; }

    // Recorded day that stands in for `day`.
    static int cycle_day(int day, int recorded_days);

private:
    std::uint64_t seed_;
    int days_ = 0;
    std::vector<double> populations_;
    std::vector<std::vector<double>> distances_;
    GravityParams gravity_;
    std::map<int, MobilityMatrix> cache_;
};

class Environment {
public:
    explicit Environment(Scenario scenario);

    std::vector<AgentObservation> reset(std::uint64_t seed);
    StepOutcome step(const JointAction& action);

    void set_weights(const ObjectiveWeights& w) { weights_ = w; }
    const ObjectiveWeights& weights() const noexcept { return weights_; }

    const Scenario& scenario() const noexcept { return scenario_; }
    std::size_t size() const noexcept { return scenario_.size(); }
    int day() const noexcept { return day_; }
    bool terminated() const noexcept { return reason_ != Termination::none; }
    const std::vector<EpidemicState>& states() const noexcept { return states_; }
    const std::vector<double>& betas() const noexcept { return betas_; }
    const std::vector<RestrictionLedger>& ledgers() const noexcept { return ledgers_; }
    const std::vector<std::vector<double>>& incidence() const noexcept { return incidence_; }
    const MobilityMatrix& last_demand() const noexcept { return last_demand_; }
    int rt_lag() const noexcept { return rt_lag_; }

    // H_T of division i at its current population.
    double hospital_threshold(std::size_t i) const;

private:
    std::vector<AgentObservation> observe();

    Scenario scenario_;
    rt::SerialInterval si_;
    int rt_lag_ = 0;
    std::optional<DemandProvider> demand_;
    ObjectiveWeights weights_;

    int day_ = 0;
    Termination reason_ = Termination::none;
    std::vector<EpidemicState> states_;
    std::vector<EpidemicState> prev_states_;
    std::vector<double> betas_;
    std::vector<RestrictionLedger> ledgers_;
    std::vector<std::vector<double>> incidence_;
    MobilityMatrix last_demand_;
};

// Something that picks the joint quota for the coming day.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string id() const = 0;
    virtual void reset(const Scenario& scenario, std::uint64_t seed) = 0;
    virtual QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) = 0;
};

struct TraceRow {
    int day = 0;  // day after the step, starting at 1
    std::size_t division = 0;
    EpidemicState state;
    double new_infections = 0.0;
    double beta = 0.0;
    double quota_mean = 0.0;
    double loss = 0.0;
    double c = 0.0;
    double r = 0.0;
    double reward = 0.0;
};

struct EpisodeTrace {
    std::string policy_id;
    std::uint64_t seed = 0;
    std::string scenario_hash;
    ObjectiveWeights weights;
    std::vector<TraceRow> rows;
    std::vector<Transition> transitions;
    Termination reason = Termination::none;
    std::optional<int> tts;
    int steps = 0;

    double episode_return() const;  // sum over days of the mean agent reward
};

// reset + step until termination or max_steps (which counts as a timeout).
EpisodeTrace run_episode(Policy& policy, const Scenario& scenario, std::uint64_t seed, int max_steps,
                         const ObjectiveWeights& weights = {}, bool keep_transitions = false);

// EWM weights from a finished trace's per-day (c, r) cells; 0.5/0.5 when the
// trace is shorter than two days.
ObjectiveWeights weights_from_trace(const EpisodeTrace& trace, std::size_t divisions);

struct EpisodeMetrics {
    double h_bar = 0.0;
    double q_bar = 0.0;
    double c_bar = 0.0;
    double r_bar = 0.0;
    std::optional<int> tts;
    double episode_return = 0.0;
};

EpisodeMetrics summarize(const EpisodeTrace& trace);

inline constexpr const char* kTraceHeader = "day,division,S,I,H,R,new_infections,beta,quota_mean,L,c,r,reward\n";

std::string format_trace_csv(const EpisodeTrace& trace);
std::string format_trace_meta(const EpisodeTrace& trace);
void write_trace(const EpisodeTrace& trace, const std::filesystem::path& dir);

}  // namespace epiquota
