#include "epiquota/commands.hpp"

#include "epiquota/io.hpp"
#include "epiquota/mobility.hpp"
#include "epiquota/objectives.hpp"
#include "epiquota/policies.hpp"
#include "epiquota/rt.hpp"
#include "epiquota/scenario.hpp"
#include "epiquota/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace epiquota::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    std::set<std::uint64_t> seen;
    const auto add = [&](std::uint64_t s) {
        if (!seen.insert(s).second) {
            throw InputError("seeds", fmt::format("seed {} listed twice", s));
        }
        seeds.push_back(s);
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = io::trim(text.substr(pos, comma - pos));
        if (item.empty()) {
            throw InputError("seeds", fmt::format("empty entry in '{}'", text));
        }
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            const long long s = io::parse_int(item, "seeds");
            if (s < 0) {
                throw InputError("seeds", "seeds are non-negative");
            }
            add(static_cast<std::uint64_t>(s));
        } else {
            const long long lo = io::parse_int(item.substr(0, dash), "seeds");
            const long long hi = io::parse_int(item.substr(dash + 1), "seeds");
            if (lo < 0 || hi < lo) {
                throw InputError("seeds", fmt::format("bad range '{}'", item));
            }
            if (hi - lo >= 100000) {
                throw InputError("seeds", fmt::format("range '{}' is too long", item));
            }
            for (long long s = lo; s <= hi; ++s) {
                add(static_cast<std::uint64_t>(s));
            }
        }
        pos = comma + 1;
    }
    return seeds;
}

std::vector<std::string> parse_policy_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string id = io::trim(text.substr(pos, comma - pos));
        out.emplace_back(to_string(parse_policy_kind(id)));
        pos = comma + 1;
    }
    return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<MetricsRow> metrics_table(const std::vector<std::string>& policies,
                                      const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                                      const std::vector<std::uint64_t>& seeds, bool pool_d) {
    if (per_seed.size() != policies.size()) {
        throw InputError("metrics", "one result list per policy expected");
    }
    if (pool_d && policies.size() < 2) {
        throw InputError("policy", "the Pareto distance needs at least two policies");
    }
    std::vector<double> all_c;
    std::vector<double> all_r;
    for (const auto& runs : per_seed) {
        if (runs.size() != seeds.size()) {
            throw InputError("metrics", "one result per seed expected");
        }
        for (const auto& m : runs) {
            all_c.push_back(m.c_bar);
            all_r.push_back(m.r_bar);
        }
    }
    const std::vector<double> d = pool_d ? pooled_pareto_distances(all_c, all_r) : std::vector<double>{};

    std::vector<MetricsRow> rows;
    std::size_t flat = 0;
    for (std::size_t p = 0; p < policies.size(); ++p) {
        std::vector<double> h, q, c, r, ds, tts, ret;
        for (std::size_t s = 0; s < seeds.size(); ++s, ++flat) {
            const EpisodeMetrics& m = per_seed[p][s];
            MetricsRow row{policies[p], std::to_string(seeds[s]), m, std::nullopt, std::nullopt};
            if (m.tts) {
                row.tts = *m.tts;
                tts.push_back(*m.tts);
            }
            if (pool_d) {
                row.d = d[flat];
                ds.push_back(d[flat]);
            }
            h.push_back(m.h_bar);
            q.push_back(m.q_bar);
            c.push_back(m.c_bar);
            r.push_back(m.r_bar);
            ret.push_back(m.episode_return);
            rows.push_back(std::move(row));
        }
        // TTS statistics only when every seed succeeded; a single failure prints "/".
        const bool all_tts = tts.size() == seeds.size() && !tts.empty();
        MetricsRow mean{policies[p], "mean", {}, std::nullopt, std::nullopt};
        mean.metrics = {mean_of(h), mean_of(q), mean_of(c), mean_of(r), std::nullopt, mean_of(ret)};
        MetricsRow sd{policies[p], "sd", {}, std::nullopt, std::nullopt};
        sd.metrics = {sd_of(h), sd_of(q), sd_of(c), sd_of(r), std::nullopt, sd_of(ret)};
        if (all_tts) {
            mean.tts = mean_of(tts);
            sd.tts = sd_of(tts);
        }
        if (pool_d) {
            mean.d = mean_of(ds);
            sd.d = sd_of(ds);
        }
        rows.push_back(std::move(mean));
        rows.push_back(std::move(sd));
    }
    return rows;
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
    const auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("/"); };
    std::string out = kMetricsHeader;
    for (const auto& row : rows) {
        const auto& m = row.metrics;
        out += fmt::format("{},{},{},{},{},{},{},{}\n", row.policy, row.seed, io::format_double(m.h_bar),
                           io::format_double(m.q_bar), opt(row.tts), io::format_double(m.c_bar),
                           io::format_double(m.r_bar), opt(row.d));
    }
    return out;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::mutex mutex;
        std::size_t next = 0;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t i = 0;
                    {
                        std::lock_guard lock(mutex);
                        if (next == n) {
                            return;
                        }
                        i = next++;
                    }
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

fs::path make_run_dir(const fs::path& root, const std::string& hash) {
    const auto now = std::chrono::system_clock::now();
    const std::string stamp = fmt::format("{:%Y%m%dT%H%M%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
    const std::string base = fmt::format("{}-{}", hash.substr(0, 12), stamp);
    fs::path dir = root / base;
    for (int n = 2; fs::exists(dir); ++n) {
        dir = root / fmt::format("{}-{}", base, n);
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw InputError("out", fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    }
    return dir;
}

namespace {

struct Globals {
    std::string scenario;
    std::string seeds;
    std::string out = "runs";
    std::string policy;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

struct InputFile {
    std::string path;
    std::string sha256;
};

std::string utc_now_iso() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                       fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

// Manifest goes in before any result file.
void write_manifest(const fs::path& dir, const std::string& command, const std::string& hash,
                    const std::vector<InputFile>& inputs, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& policies, const ordered_json& extra = ordered_json::object()) {
    ordered_json m;
    m["command"] = command;
    m["scenario_hash"] = hash;
    m["inputs"] = ordered_json::array();
    for (const auto& f : inputs) {
        m["inputs"].push_back({{"path", f.path}, {"sha256", f.sha256}});
    }
    m["seeds"] = seeds;
    m["policies"] = policies;
    m["output_directory"] = dir.string();
    m["tool_version"] = kToolVersion;
    m["wall_clock"] = utc_now_iso();
    for (const auto& [key, value] : extra.items()) {
        m[key] = value;
    }
    io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::string combined_hash(const std::vector<InputFile>& inputs) {
    std::string joined;
    for (const auto& f : inputs) {
        joined += f.sha256;
    }
    return io::sha256_hex(joined);
}

Scenario require_scenario(const Globals& g) {
    if (g.scenario.empty()) {
        throw InputError("scenario", "--scenario is required");
    }
    return load_scenario(g.scenario);
}

std::vector<InputFile> scenario_inputs(const Globals& g, const Scenario& scenario) {
    std::vector<InputFile> in{{g.scenario, io::sha256_file(g.scenario)}};
    if (scenario.od_source.kind == OdSource::Kind::csv) {
        const fs::path p = scenario.base_dir / scenario.od_source.path;
        in.push_back({p.string(), io::sha256_file(p)});
    }
    return in;
}

std::vector<std::uint64_t> seeds_or_default(const Globals& g, const Scenario* scenario) {
    if (!g.seeds.empty()) {
        return parse_seeds(g.seeds);
    }
    return {scenario != nullptr ? scenario->seed : 0};
}

// Builds one policy instance per call so that workers never share state.
class PolicyFactory {
public:
    PolicyFactory(const std::string& id, const std::string& params_path) : kind_(parse_policy_kind(id)) {
        if (kind_ == PolicyKind::learned) {
            if (params_path.empty()) {
                throw InputError("params", "policy 'learned' needs --params");
            }
            model_ = std::make_shared<const ActorCritic>(ActorCritic::load(params_path));
        }
    }

    std::unique_ptr<Policy> make() const {
        if (kind_ == PolicyKind::learned) {
            return std::make_unique<LearnedPolicy>(model_);
        }
        return make_heuristic_policy(kind_);
    }

private:
    PolicyKind kind_;
    std::shared_ptr<const ActorCritic> model_;
};

struct SweepResult {
    std::vector<std::string> policies;
    std::vector<std::vector<EpisodeMetrics>> metrics;
};

SweepResult sweep(const Scenario& scenario, const std::string& hash, const std::vector<std::string>& policies,
                  const std::string& params_path, const std::vector<std::uint64_t>& seeds, const fs::path& dir,
                  unsigned jobs) {
    std::vector<PolicyFactory> factories;
    for (const auto& id : policies) {
        factories.emplace_back(id, params_path);
    }
    SweepResult result{policies, std::vector<std::vector<EpisodeMetrics>>(policies.size(),
                                                                         std::vector<EpisodeMetrics>(seeds.size()))};
    parallel_for(policies.size() * seeds.size(), jobs, [&](std::size_t n) {
        const std::size_t p = n / seeds.size();
        const std::size_t s = n % seeds.size();
        auto policy = factories[p].make();
        EpisodeTrace trace = run_episode(*policy, scenario, seeds[s], scenario.control.max_steps);
        trace.scenario_hash = hash;
        write_trace(trace, dir / "traces" / policies[p] / fmt::format("seed-{}", seeds[s]));
        result.metrics[p][s] = summarize(trace);
    });
    return result;
}

void print_table(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << fmt::format("{:<16} {:>18} {:>16} {:>12} {:>16} {:>16} {:>14}\n", "policy", "H_bar", "Q_bar", "TTS",
                       "c_bar", "r_bar", "D");
    for (std::size_t n = 0; n + 1 < rows.size(); ++n) {
        if (rows[n].seed != "mean") {
            continue;
        }
        const MetricsRow& m = rows[n];
        const MetricsRow& s = rows[n + 1];
        const auto pm = [](double a, double b) { return fmt::format("{:.2f}±{:.2f}", a, b); };
        const std::string tts = m.tts ? pm(*m.tts, *s.tts) : "/";
        const std::string d = m.d ? pm(*m.d, *s.d) : "/";
        out << fmt::format("{:<16} {:>18} {:>16} {:>12} {:>16} {:>16} {:>14}\n", m.policy,
                           pm(m.metrics.h_bar, s.metrics.h_bar), pm(m.metrics.q_bar, s.metrics.q_bar), tts,
                           pm(m.metrics.c_bar, s.metrics.c_bar), pm(m.metrics.r_bar, s.metrics.r_bar), d);
    }
}

int cmd_simulate(const Globals& g, const std::string& params_path, std::ostream& out) {
    const Scenario scenario = require_scenario(g);
    const auto seeds = seeds_or_default(g, &scenario);
    const std::string policy = g.policy.empty() ? "none" : std::string(to_string(parse_policy_kind(g.policy)));
    const std::string hash = scenario_hash(scenario);
    auto inputs = scenario_inputs(g, scenario);
    if (!params_path.empty()) {
        inputs.push_back({params_path, io::sha256_file(params_path)});
    }
    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "simulate", hash, inputs, seeds, {policy});
    const SweepResult r = sweep(scenario, hash, {policy}, params_path, seeds, dir, g.jobs);
    const auto rows = metrics_table(r.policies, r.metrics, seeds, false);
    io::write_file(dir / "metrics.csv", format_metrics_csv(rows));
    print_table(out, rows);
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const Globals& g, const std::string& params_path, std::ostream& out) {
    const Scenario scenario = require_scenario(g);
    const auto seeds = seeds_or_default(g, &scenario);
    const auto policies = parse_policy_list(g.policy.empty() ? "none,expert" : g.policy);
    if (policies.size() < 2) {
        throw InputError("policy", "evaluate compares at least two policies");
    }
    if (std::set<std::string>(policies.begin(), policies.end()).size() != policies.size()) {
        throw InputError("policy", "a policy is listed twice");
    }
    const std::string hash = scenario_hash(scenario);
    auto inputs = scenario_inputs(g, scenario);
    if (!params_path.empty()) {
        inputs.push_back({params_path, io::sha256_file(params_path)});
    }
    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "evaluate", hash, inputs, seeds, policies);
    const SweepResult r = sweep(scenario, hash, policies, params_path, seeds, dir, g.jobs);
    const auto rows = metrics_table(r.policies, r.metrics, seeds, true);
    io::write_file(dir / "metrics.csv", format_metrics_csv(rows));
    print_table(out, rows);
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

struct TrainFlags {
    TrainParams params;
    std::optional<double> lr;
    bool fixed_weights = false;
};

ordered_json hyperparameters_json(const TrainParams& p) {
    ordered_json h;
    h["episodes"] = p.episodes;
    h["actor_learning_rate"] = p.actor_lr;
    h["critic_learning_rate"] = p.critic_lr;
    h["eta"] = p.eta;
    h["tau"] = p.tau;
    h["rho"] = p.rho0;
    h["rho_decrement"] = p.rho_decrement;
    h["rho_interval"] = p.rho_interval;
    h["batch"] = p.batch;
    h["capacity"] = p.capacity;
    h["noise_start"] = p.noise_start;
    h["noise_end"] = p.noise_end;
    h["expert_episodes"] = p.expert_episodes;
    h["update_every"] = p.update_every;
    h["reward_scale"] = p.reward_scale;
    h["adaptive_weights"] = p.adaptive_weights;
    h["actor_hidden"] = p.actor_hidden;
    h["critic_hidden"] = p.critic_hidden;
    return h;
}

int cmd_train(const Globals& g, TrainFlags flags, std::ostream& out) {
    TrainParams& p = flags.params;
    if (flags.lr) {
        p.actor_lr = *flags.lr;
        p.critic_lr = *flags.lr;
    }
    p.adaptive_weights = !flags.fixed_weights;
    p.validate();
    const Scenario scenario = require_scenario(g);
    const auto seeds = seeds_or_default(g, &scenario);
    const std::string hash = scenario_hash(scenario);
    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "train", hash, scenario_inputs(g, scenario), seeds, {"learned"},
                   {{"hyperparameters", hyperparameters_json(p)}});

    std::vector<double> final_means(seeds.size());
    std::vector<long long> updates(seeds.size());
    parallel_for(seeds.size(), g.jobs, [&](std::size_t s) {
        const TrainResult result = train(scenario, p, seeds[s]);
        result.model.save(dir / fmt::format("params-seed-{}.bin", seeds[s]));
        io::write_file(dir / fmt::format("curve-seed-{}.csv", seeds[s]), format_curve_csv(result.curve));
        const std::size_t tail = std::min<std::size_t>(100, result.curve.size());
        std::vector<double> last;
        for (std::size_t e = result.curve.size() - tail; e < result.curve.size(); ++e) {
            last.push_back(result.curve[e].mean_return);
        }
        final_means[s] = mean_of(last);
        updates[s] = result.updates;
    });
    std::string summary = "seed,episodes,updates,final100_mean_return\n";
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        summary += fmt::format("{},{},{},{}\n", seeds[s], p.episodes, updates[s], io::format_double(final_means[s]));
        out << fmt::format("seed {}: {} updates, mean return over the last 100 episodes {:.3f}\n", seeds[s],
                           updates[s], final_means[s]);
    }
    io::write_file(dir / "train_summary.csv", summary);
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

struct RtFlags {
    std::string incidence;
    std::optional<double> si_mean;
    std::optional<double> si_sd;
    std::optional<int> si_max;
    std::optional<double> period;
};

std::map<long long, std::vector<double>> read_incidence(const std::string& path) {
    io::CsvReader reader(io::read_file(path));
    std::vector<std::string> fields;
    if (!reader.next_row(fields)) {
        throw InputError("incidence", fmt::format("{} is empty", path));
    }
    for (auto& f : fields) {
        f = io::trim(f);
    }
    if (fields != std::vector<std::string>{"day", "division", "new_infections"}) {
        throw InputError("incidence", "header must be day,division,new_infections");
    }
    std::map<long long, std::map<long long, double>> cells;
    std::size_t rows = 0;
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && io::trim(fields[0]).empty()) {
            continue;
        }
        const std::string where = fmt::format("incidence line {}", reader.line());
        if (fields.size() != 3) {
            throw InputError(where, "expected 3 fields");
        }
        const long long day = io::parse_int(io::trim(fields[0]), where + " day");
        const long long div = io::parse_int(io::trim(fields[1]), where + " division");
        const double n = io::parse_double(io::trim(fields[2]), where + " new_infections");
        if (day < 0 || div < 0 || !(n >= 0.0) || !std::isfinite(n)) {
            throw InputError(where, "day, division and new_infections must be non-negative");
        }
        if (!cells[div].emplace(day, n).second) {
            throw InputError(where, fmt::format("day {} of division {} appears twice", day, div));
        }
        ++rows;
    }
    if (rows == 0) {
        throw InputError("incidence", fmt::format("{} has no data rows", path));
    }
    long long last_day = 0;
    for (const auto& [div, days] : cells) {
        last_day = std::max(last_day, days.rbegin()->first);
    }
    std::map<long long, std::vector<double>> out;
    for (const auto& [div, days] : cells) {
        std::vector<double> series(static_cast<std::size_t>(last_day + 1), 0.0);
        for (const auto& [day, n] : days) {
            series[static_cast<std::size_t>(day)] = n;
        }
        out.emplace(div, std::move(series));
    }
    return out;
}

int cmd_estimate_rt(const Globals& g, const RtFlags& flags, std::ostream& out, std::ostream& err) {
    if (flags.incidence.empty()) {
        throw InputError("incidence", "--incidence is required");
    }
    DiseaseParams disease;
    std::vector<InputFile> inputs{{flags.incidence, io::sha256_file(flags.incidence)}};
    std::optional<double> period = flags.period;
    std::string hash;
    if (!g.scenario.empty()) {
        const Scenario scenario = load_scenario(g.scenario);
        disease = scenario.disease;
        if (!period) {
            period = disease.effective_infectious_period;
        }
        inputs.push_back({g.scenario, io::sha256_file(g.scenario)});
    }
    disease.si_mean = flags.si_mean.value_or(disease.si_mean);
    disease.si_sd = flags.si_sd.value_or(disease.si_sd);
    if (flags.si_max) {
        disease.si_max = *flags.si_max;
    }
    if (!period) {
        throw InputError("period", "estimate-rt needs --period or --scenario for the beta column");
    }
    const rt::SerialInterval si = rt::SerialInterval::from_disease(disease);
    const auto series = read_incidence(flags.incidence);
    hash = combined_hash(inputs);

    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "estimate-rt", hash, inputs, {}, {},
                   {{"serial_interval", {{"shape", si.shape()}, {"scale", si.scale()}, {"max_days", si.max_days()}}},
                    {"effective_infectious_period", *period}});
    std::string csv = "day,division,rt_raw,rt_corrected,beta,imputed_flag\n";
    for (const auto& [div, incidence] : series) {
        const auto est = rt::estimate_rt(incidence, si, static_cast<int>(incidence.size()) - 1);
        if (est.empty()) {
            err << fmt::format("warning: division {}: {}\n", div, est.warning.empty() ? "no cases" : est.warning);
            continue;
        }
        for (const auto& p : est.points) {
            csv += fmt::format("{},{},{},{},{},{}\n", p.day, div, io::format_double(p.rt_raw),
                               io::format_double(p.rt_corrected),
                               io::format_double(rt::beta_from_rt(p.rt_corrected, *period)), p.imputed ? 1 : 0);
        }
    }
    io::write_file(dir / "rt.csv", csv);
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

int cmd_synth_od(const Globals& g, std::optional<int> days_flag, std::optional<double> trip_rate, std::ostream& out) {
    Scenario scenario = require_scenario(g);
    if (scenario.od_source.kind != OdSource::Kind::gravity) {
        throw InputError("od_source.kind", "synth-od needs a gravity demand source");
    }
    if (days_flag) {
        if (*days_flag < 1) {
            throw InputError("days", "must be at least 1");
        }
        scenario.od_source.days = *days_flag;
    }
    if (trip_rate) {
        scenario.od_source.trip_rate = *trip_rate;
    }
    scenario.validate();
    const auto seeds = seeds_or_default(g, &scenario);
    const std::string hash = scenario_hash(scenario);
    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "synth-od", hash, scenario_inputs(g, scenario), seeds, {},
                   {{"days", scenario.od_source.days}, {"trip_rate", scenario.od_source.trip_rate}});
    parallel_for(seeds.size(), g.jobs, [&](std::size_t s) {
        DemandProvider provider(scenario, seeds[s]);
        std::vector<MobilityMatrix> matrices;
        for (int d = 0; d < scenario.od_source.days; ++d) {
            matrices.push_back(provider.demand(d));
        }
        io::write_file(dir / fmt::format("od-seed-{}.csv", seeds[s]), format_od_csv(matrices));
    });
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

struct AggregateFlags {
    std::string trajectories;
    std::string centroids;
    double max_km = 5.0;
    double utc_offset_hours = 0.0;
    std::string first_day;
    std::optional<int> days;
};

std::vector<Centroid> read_centroids(const std::string& path) {
    io::CsvReader reader(io::read_file(path));
    std::vector<std::string> fields;
    if (!reader.next_row(fields)) {
        throw InputError("centroids", fmt::format("{} is empty", path));
    }
    for (auto& f : fields) {
        f = io::trim(f);
    }
    if (fields != std::vector<std::string>{"division", "lng", "lat"}) {
        throw InputError("centroids", "header must be division,lng,lat");
    }
    std::vector<Centroid> out;
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && io::trim(fields[0]).empty()) {
            continue;
        }
        const std::string where = fmt::format("centroids line {}", reader.line());
        if (fields.size() != 3) {
            throw InputError(where, "expected 3 fields");
        }
        if (io::parse_int(io::trim(fields[0]), where) != static_cast<long long>(out.size())) {
            throw InputError(where, "divisions must be numbered 0, 1, 2, ... in order");
        }
        out.push_back({io::parse_double(io::trim(fields[1]), where + " lng"),
                       io::parse_double(io::trim(fields[2]), where + " lat")});
    }
    if (out.empty()) {
        throw InputError("centroids", "no divisions");
    }
    return out;
}

std::int64_t parse_date(const std::string& text) {
    unsigned y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%4u-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        throw InputError("first-day", fmt::format("'{}' is not YYYY-MM-DD", text));
    }
    return civil_day(static_cast<int>(y), m, d);
}

int cmd_aggregate_od(const Globals& g, const AggregateFlags& flags, std::ostream& out) {
    if (flags.trajectories.empty() || flags.centroids.empty()) {
        throw InputError("aggregate-od", "--trajectories and --centroids are required");
    }
    if (!(flags.max_km > 0.0)) {
        throw InputError("max-km", "must be positive");
    }
    const std::vector<InputFile> inputs{{flags.trajectories, io::sha256_file(flags.trajectories)},
                                        {flags.centroids, io::sha256_file(flags.centroids)}};
    const auto centroids = read_centroids(flags.centroids);
    const TrajectoryFile file = read_trajectory_csv(flags.trajectories);
    DayBoundary boundary;
    boundary.utc_offset_seconds = static_cast<int>(std::lround(flags.utc_offset_hours * 3600.0));
    if (!flags.first_day.empty()) {
        boundary.first_day = parse_date(flags.first_day);
    }
    boundary.days = flags.days;
    const std::size_t k = centroids.size();
    OdAggregation agg =
        aggregate_daily_od(file.records, k, nearest_centroid_assignment(centroids, flags.max_km), boundary);
    agg.malformed += file.malformed;

    const std::string hash = combined_hash(inputs);
    const fs::path dir = make_run_dir(g.out, hash);
    write_manifest(dir, "aggregate-od", hash, inputs, {}, {},
                   {{"max_km", flags.max_km}, {"utc_offset_hours", flags.utc_offset_hours}});
    io::write_file(dir / "od.csv", format_od_csv(agg.matrices));
    ordered_json summary;
    summary["divisions"] = k;
    summary["first_day"] = agg.first_day;
    summary["days"] = agg.matrices.size();
    summary["records_used"] = agg.used;
    summary["out_of_area"] = agg.out_of_area;
    summary["out_of_window"] = agg.out_of_window;
    summary["malformed"] = agg.malformed;
    io::write_file(dir / "aggregation.json", summary.dump(2) + "\n");
    out << fmt::format("{} records used, {} out of area, {} out of window, {} malformed\n", agg.used,
                       agg.out_of_area, agg.out_of_window, agg.malformed);
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Township-level epidemic mobility-restriction simulator and trainer", "epiquota"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    Globals g;
    app.add_option("--scenario", g.scenario, "Scenario JSON file");
    app.add_option("--seeds", g.seeds, "Seeds: 3, 1,2,5 or 0-9");
    app.add_option("--out", g.out, "Root directory for run directories")->capture_default_str();
    app.add_option("--policy", g.policy, "Policy id (simulate) or comma-separated ids (evaluate)");
    app.add_option("--jobs", g.jobs, "Worker threads for seed sweeps")->check(CLI::Range(1u, 1024u));

    std::string params_path;
    auto* simulate = app.add_subcommand("simulate", "Run one policy over the seeds and write traces and metrics");
    simulate->add_option("--params", params_path, "Parameter file for the learned policy");
    auto* evaluate = app.add_subcommand("evaluate", "Compare policies over the seeds, including the Pareto distance");
    evaluate->add_option("--params", params_path, "Parameter file for the learned policy");

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train the multi-agent policy, one model per seed");
    train_cmd->add_option("--episodes", tf.params.episodes)->capture_default_str();
    train_cmd->add_option("--lr", tf.lr, "Learning rate for actors and critic");
    train_cmd->add_option("--actor-lr", tf.params.actor_lr)->capture_default_str();
    train_cmd->add_option("--critic-lr", tf.params.critic_lr)->capture_default_str();
    train_cmd->add_option("--eta", tf.params.eta, "Discount factor")->capture_default_str();
    train_cmd->add_option("--tau", tf.params.tau, "Soft update rate")->capture_default_str();
    train_cmd->add_option("--rho", tf.params.rho0, "Initial expert sampling fraction")->capture_default_str();
    train_cmd->add_option("--rho-decrement", tf.params.rho_decrement)->capture_default_str();
    train_cmd->add_option("--rho-interval", tf.params.rho_interval)->capture_default_str();
    train_cmd->add_option("--batch", tf.params.batch)->capture_default_str();
    train_cmd->add_option("--capacity", tf.params.capacity)->capture_default_str();
    train_cmd->add_option("--noise-start", tf.params.noise_start)->capture_default_str();
    train_cmd->add_option("--noise-end", tf.params.noise_end)->capture_default_str();
    train_cmd->add_option("--expert-episodes", tf.params.expert_episodes)->capture_default_str();
    train_cmd->add_option("--update-every", tf.params.update_every)->capture_default_str();
    train_cmd->add_option("--reward-scale", tf.params.reward_scale)->capture_default_str();
    train_cmd->add_flag("--fixed-weights", tf.fixed_weights, "Keep 0.5/0.5 reward weights");

    RtFlags rf;
    auto* estimate = app.add_subcommand("estimate-rt", "Estimate Rt and beta from an incidence CSV");
    estimate->add_option("--incidence", rf.incidence, "CSV with day,division,new_infections");
    estimate->add_option("--si-mean", rf.si_mean, "Serial interval mean, days");
    estimate->add_option("--si-sd", rf.si_sd, "Serial interval standard deviation, days");
    estimate->add_option("--si-max", rf.si_max, "Serial interval truncation, days");
    estimate->add_option("--period", rf.period, "Effective infectious period for beta = Rt / period");

    std::optional<int> od_days;
    std::optional<double> trip_rate;
    auto* synth = app.add_subcommand("synth-od", "Write gravity-model demand matrices for the scenario");
    synth->add_option("--days", od_days, "Number of days");
    synth->add_option("--trip-rate", trip_rate, "Trips per person per day");

    AggregateFlags af;
    auto* aggregate = app.add_subcommand("aggregate-od", "Aggregate trajectory records into daily OD matrices");
    aggregate->add_option("--trajectories", af.trajectories, "Trajectory CSV");
    aggregate->add_option("--centroids", af.centroids, "CSV with division,lng,lat");
    aggregate->add_option("--max-km", af.max_km, "Largest distance to a centroid")->capture_default_str();
    aggregate->add_option("--utc-offset", af.utc_offset_hours, "Local time zone, hours east of UTC");
    aggregate->add_option("--first-day", af.first_day, "First local day, YYYY-MM-DD");
    aggregate->add_option("--days", af.days, "Number of days");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(g, params_path, out);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(g, params_path, out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(g, tf, out);
        }
        if (estimate->parsed()) {
            return cmd_estimate_rt(g, rf, out, err);
        }
        if (synth->parsed()) {
            return cmd_synth_od(g, od_days, trip_rate, out);
        }
        if (aggregate->parsed()) {
            return cmd_aggregate_od(g, af, out);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantBreach& e) {
        err << "invariant breach: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace epiquota::cli
