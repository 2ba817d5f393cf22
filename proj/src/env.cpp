#include "epiquota/env.hpp"

#include "epiquota/epidemic.hpp"
#include "epiquota/io.hpp"
#include "epiquota/rng.hpp"
#include "epiquota/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace epiquota {

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::none:
            return "none";
        case Termination::success:
            return "success";
        case Termination::hospital_breach:
            return "hospital-breach";
        case Termination::lockdown_breach:
            return "lockdown-breach";
        case Termination::timeout:
            return "timeout";
    }
    return "none";
}

DemandProvider::DemandProvider(const Scenario& scenario, std::uint64_t seed) : seed_(seed) {
    const OdSource& od = scenario.od_source;
    if (od.kind == OdSource::Kind::csv) {
        auto matrices = parse_od_csv(io::read_file(scenario.base_dir / od.path), scenario.size());
        if (matrices.empty()) {
            throw InputError("od_source.path", "demand file has no days");
        }
        days_ = static_cast<int>(matrices.size());
        for (auto& m : matrices) {
            const int d = m.day;
            cache_.emplace(d, std::move(m));
        }
    } else {
        populations_ = scenario.populations();
        distances_ = od.distances_km;
        gravity_ = {od.trip_rate, od.exponent, od.noise_sigma};
        days_ = od.days;
    }
}

int DemandProvider::cycle_day(int day, int recorded_days) {
    if (recorded_days <= 0) {
        throw InputError("days", "no recorded demand");
    }
    if (day < recorded_days) {
        return day;
    }
    if (recorded_days < 7) {
        return day % recorded_days;
    }
    const int week_start = recorded_days - 7;
    return week_start + (day - week_start) % 7;
}

const MobilityMatrix& DemandProvider::demand(int day) {
    const int d = cycle_day(day, days_);
    if (auto it = cache_.find(d); it != cache_.end()) {
        return it->second;
    }
    RandomStream rng(seed_, fmt::format("od/{}", d));
    auto m = synth_gravity_od(populations_, distances_, gravity_, gravity_.noise_sigma > 0.0 ? &rng : nullptr, d);
    return cache_.emplace(d, std::move(m)).first->second;
}

Environment::Environment(Scenario scenario)
    : scenario_(std::move(scenario)), si_(rt::SerialInterval::from_disease(scenario_.disease)) {
    scenario_.validate();
    rt_lag_ = scenario_.control.rt_lag >= 0 ? scenario_.control.rt_lag : rt::reference_lag(si_);
}

double Environment::hospital_threshold(std::size_t i) const {
    return scenario_.divisions[i].beds_per_1000 * states_[i].total() / 1000.0;
}

std::vector<AgentObservation> Environment::reset(std::uint64_t seed) {
    const std::size_t k = size();
    demand_.emplace(scenario_, seed);
    weights_ = ObjectiveWeights::equal();
    day_ = 0;
    reason_ = Termination::none;
    states_ = scenario_.initial_states();
    prev_states_ = states_;
    betas_.assign(k, scenario_.disease.beta0);
    ledgers_.assign(k, RestrictionLedger{0.0, scenario_.objectives.lambda});
    incidence_.assign(k, {});
    // Infections present at day 0 seed each incidence series.
    for (std::size_t i = 0; i < k; ++i) {
        incidence_[i].push_back(states_[i].i);
    }
    last_demand_ = MobilityMatrix::zeros(0, k);
    return observe();
}

std::vector<AgentObservation> Environment::observe() {
    const std::size_t k = size();
    const MobilityMatrix& upcoming = demand_->demand(day_);
    std::vector<AgentObservation> obs(k);
    for (std::size_t i = 0; i < k; ++i) {
        AgentObservation& o = obs[i];
        o.position_code = static_cast<int>(i);
        o.state = states_[i];
        o.delta_state = states_[i] - prev_states_[i];
        o.accumulated_loss = ledgers_[i].loss;
        o.mean_demand = upcoming.mean_outflow(i);
        const auto& inc = incidence_[i];
        o.new_infections = inc.back();
        const std::size_t from = inc.size() > 7 ? inc.size() - 7 : 0;
        for (std::size_t t = from; t < inc.size(); ++t) {
            o.new_infections_7d += inc[t];
        }
        o.population = states_[i].total();
    }
    return obs;
}

namespace {

std::vector<double> off_diagonal_row(const Eigen::MatrixXd& m, std::size_t i) {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (static_cast<std::size_t>(j) != i) {
            row.push_back(m(static_cast<Eigen::Index>(i), j));
        }
    }
    return row;
}

}  // namespace

StepOutcome Environment::step(const JointAction& action) {
    if (!demand_) {
        throw InvariantBreach("step called before reset");
    }
    if (terminated()) {
        throw InvariantBreach(fmt::format("step called after termination ({})", to_string(reason_)));
    }
    const std::size_t k = size();
    if (action.quota.size() != k || static_cast<std::size_t>(action.quota.quotas.cols()) != k) {
        throw InputError("quota", fmt::format("expected a {}x{} matrix", k, k));
    }
    action.quota.validate();

    const MobilityMatrix demand = demand_->demand(day_);
    const MobilityMatrix actual = apply_quota(demand, action.quota);
    const std::vector<double> beta_in = inflow_betas(actual, betas_);
    CityStep city = step_city(states_, actual, betas_, beta_in, scenario_.disease);

    prev_states_ = states_;
    states_ = std::move(city.states);
    last_demand_ = demand;
    ++day_;

    const DiseaseParams& disease = scenario_.disease;
    const int reference = day_ - rt_lag_;
    for (std::size_t i = 0; i < k; ++i) {
        incidence_[i].push_back(city.new_infections[i]);
        if (reference < 0) {
            continue;
        }
        if (auto p = rt::estimate_rt_at(incidence_[i], si_, day_, reference)) {
            betas_[i] = std::clamp(rt::beta_from_rt(p->rt_corrected, disease.effective_infectious_period), 0.0, 1.0);
        }
    }

    StepOutcome out;
    out.warnings = std::move(city.warnings);
    out.rewards.resize(k);
    out.info.resize(k);
    const ObjectiveParams& obj = scenario_.objectives;
    for (std::size_t i = 0; i < k; ++i) {
        const auto demand_row = off_diagonal_row(demand.flows, i);
        const auto actual_row = off_diagonal_row(actual.flows, i);
        const double mean = demand.mean_outflow(i);
        // Today's loss is amplified by the restriction accumulated before today.
        const double r = loss_index(ledgers_[i].loss, obj.l0, demand_row, actual_row, mean);
        ledgers_[i] = update_ledger(ledgers_[i], demand_row, actual_row, mean);
        const double c = strain_index(states_[i].h, obj.k[i], obj.h0);
        out.info[i] = {c, r, city.new_infections[i]};
        out.rewards[i] = reward(c, r, weights_);
    }

    const ControlParams& ctl = scenario_.control;
    const double breach_count = ctl.breach_fraction * static_cast<double>(k);
    int hospital = 0;
    int lockdown = 0;
    bool success = true;
    for (std::size_t i = 0; i < k; ++i) {
        success = success && city.new_infections[i] < 1.0;
        hospital += states_[i].h > hospital_threshold(i) ? 1 : 0;
        lockdown += ledgers_[i].loss > ctl.lockdown_threshold ? 1 : 0;
    }
    if (success) {
        reason_ = Termination::success;
    } else if (hospital > breach_count) {
        reason_ = Termination::hospital_breach;
    } else if (lockdown > breach_count) {
        reason_ = Termination::lockdown_breach;
    } else if (day_ >= ctl.time_threshold) {
        reason_ = Termination::timeout;
    }
    if (reason_ == Termination::hospital_breach || reason_ == Termination::lockdown_breach) {
        for (double& r : out.rewards) {
            r -= ctl.breach_penalty;
        }
    }
    out.reason = reason_;
    out.observations = observe();
    return out;
}

double EpisodeTrace::episode_return() const {
    if (rows.empty()) {
        return 0.0;
    }
    const std::size_t k = rows.size() / static_cast<std::size_t>(steps);
    double total = 0.0;
    for (const auto& row : rows) {
        total += row.reward;
    }
    return total / static_cast<double>(k);
}

EpisodeTrace run_episode(Policy& policy, const Scenario& scenario, std::uint64_t seed, int max_steps,
                         const ObjectiveWeights& weights, bool keep_transitions) {
    if (max_steps < 1) {
        throw InputError("max_steps", "must be at least 1");
    }
    Environment env(scenario);
    auto obs = env.reset(seed);
    env.set_weights(weights);
    policy.reset(env.scenario(), seed);

    EpisodeTrace trace;
    trace.policy_id = policy.id();
    trace.seed = seed;
    trace.weights = weights;
    const std::size_t k = env.size();
    while (true) {
        QuotaMatrix quota = policy.act(obs, env.day());
        quota.day = env.day();
        StepOutcome out = env.step({quota});
        ++trace.steps;
        for (std::size_t i = 0; i < k; ++i) {
            TraceRow row;
            row.day = env.day();
            row.division = i;
            row.state = env.states()[i];
            row.new_infections = out.info[i].new_infections;
            row.beta = env.betas()[i];
            row.quota_mean = quota.row_mean(i);
            row.loss = env.ledgers()[i].loss;
            row.c = out.info[i].c;
            row.r = out.info[i].r;
            row.reward = out.rewards[i];
            trace.rows.push_back(row);
        }
        if (keep_transitions) {
            trace.transitions.push_back({std::move(obs), {std::move(quota)}, out.rewards, out.observations,
                                         out.terminated()});
        }
        obs = std::move(out.observations);
        if (out.terminated()) {
            trace.reason = out.reason;
            if (out.reason == Termination::success) {
                trace.tts = env.day();
            }
            break;
        }
        if (trace.steps >= max_steps) {
            trace.reason = Termination::timeout;
            break;
        }
    }
    return trace;
}

ObjectiveWeights weights_from_trace(const EpisodeTrace& trace, std::size_t divisions) {
    if (trace.steps < 2 || divisions == 0) {
        return ObjectiveWeights::equal();
    }
    const auto t = static_cast<Eigen::Index>(trace.steps);
    const auto k = static_cast<Eigen::Index>(divisions);
    Eigen::MatrixXd c(t, k);
    Eigen::MatrixXd r(t, k);
    for (Eigen::Index day = 0; day < t; ++day) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const TraceRow& row = trace.rows[static_cast<std::size_t>(day * k + i)];
            c(day, i) = row.c;
            r(day, i) = row.r;
        }
    }
    return entropy_weights(c, r);
}

EpisodeMetrics summarize(const EpisodeTrace& trace) {
    EpisodeMetrics m;
    m.tts = trace.tts;
    m.episode_return = trace.episode_return();
    if (trace.rows.empty()) {
        return m;
    }
    for (const auto& row : trace.rows) {
        m.h_bar += row.state.h;
        m.q_bar += row.quota_mean;
        m.c_bar += row.c;
        m.r_bar += row.r;
    }
    const auto n = static_cast<double>(trace.rows.size());
    m.h_bar /= n;
    m.q_bar /= n;
    m.c_bar /= n;
    m.r_bar /= n;
    return m;
}

std::string format_trace_csv(const EpisodeTrace& trace) {
    std::string out = kTraceHeader;
    using io::format_double;
    for (const auto& row : trace.rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", row.day, row.division, format_double(row.state.s),
                           format_double(row.state.i), format_double(row.state.h), format_double(row.state.r),
                           format_double(row.new_infections), format_double(row.beta), format_double(row.quota_mean),
                           format_double(row.loss), format_double(row.c), format_double(row.r),
                           format_double(row.reward));
    }
    return out;
}

std::string format_trace_meta(const EpisodeTrace& trace) {
    nlohmann::ordered_json meta;
    meta["scenario_hash"] = trace.scenario_hash;
    meta["seed"] = trace.seed;
    meta["policy"] = trace.policy_id;
    meta["termination"] = std::string(to_string(trace.reason));
    meta["tts"] = trace.tts ? nlohmann::ordered_json(*trace.tts) : nlohmann::ordered_json(nullptr);
    meta["steps"] = trace.steps;
    meta["weights"] = {{"w_c", trace.weights.w_c}, {"w_r", trace.weights.w_r}};
    meta["episode_return"] = trace.episode_return();
    return meta.dump(2) + "\n";
}

void write_trace(const EpisodeTrace& trace, const std::filesystem::path& dir) {
    io::write_file(dir / "trace.csv", format_trace_csv(trace));
    io::write_file(dir / "meta.json", format_trace_meta(trace));
}

}  // namespace epiquota
