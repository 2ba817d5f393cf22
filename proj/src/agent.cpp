#include "epiquota/agent.hpp"

#include "epiquota/io.hpp"
#include "epiquota/policies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace epiquota {

Eigen::VectorXd observation_features(const AgentObservation& obs, std::size_t divisions, double l0) {
    const double n = obs.state.total() > 0.0 ? obs.state.total() : 1.0;
    Eigen::VectorXd f(kObservationFeatures);
    f << static_cast<double>(obs.position_code) / static_cast<double>(std::max<std::size_t>(divisions, 1)),
        obs.state.s / n, std::log1p(obs.state.i) / 10.0, std::log1p(obs.state.h) / 10.0, obs.state.r / n,
        std::asinh(obs.delta_state.s) / 10.0, std::asinh(obs.delta_state.i) / 10.0,
        std::asinh(obs.delta_state.h) / 10.0, std::asinh(obs.delta_state.r) / 10.0, obs.accumulated_loss / l0,
        std::log1p(obs.mean_demand) / 10.0;
    return f;
}

Eigen::VectorXd joint_features(const std::vector<AgentObservation>& obs, double l0) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(obs.size()) * kObservationFeatures);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        s.segment(static_cast<Eigen::Index>(i) * kObservationFeatures, kObservationFeatures) =
            observation_features(obs[i], obs.size(), l0);
    }
    return s;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, ReplaySource source) : capacity_(capacity), source_(source) {
    if (capacity == 0) {
        throw InputError("capacity", "must be positive");
    }
}

void ReplayBuffer::push(Experience e) {
    if (entries_.size() == capacity_) {
        entries_.pop_front();
    }
    entries_.push_back(std::move(e));
}

const Experience& ReplayBuffer::sample(RandomStream& rng) const {
    if (entries_.empty()) {
        throw InvariantBreach("sampling an empty replay buffer");
    }
    return entries_[static_cast<std::size_t>(rng.below(entries_.size()))];
}

std::vector<const Experience*> sample_mixed(const ReplayBuffer& expert, const ReplayBuffer& agent, double rho,
                                            std::size_t n, RandomStream& rng, std::size_t* expert_items) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw InputError("rho", "must lie in [0, 1]");
    }
    if (expert.empty() && agent.empty()) {
        throw InvariantBreach("both replay buffers are empty");
    }
    std::vector<const Experience*> out;
    out.reserve(n);
    std::size_t from_expert = 0;
    for (std::size_t k = 0; k < n; ++k) {
        bool use_expert = rng.bernoulli(rho);
        if (use_expert && expert.empty()) {
            use_expert = false;
        } else if (!use_expert && agent.empty()) {
            use_expert = true;
        }
        out.push_back(&(use_expert ? expert : agent).sample(rng));
        from_expert += use_expert ? 1 : 0;
    }
    if (expert_items != nullptr) {
        *expert_items = from_expert;
    }
    return out;
}

double rho_schedule(long long update_step, double rho0, double decrement, int interval) {
    if (interval < 1) {
        throw InputError("rho_interval", "must be positive");
    }
    const double steps = static_cast<double>(std::max(0LL, update_step) / interval);
    return std::max(0.0, rho0 - decrement * steps);
}

double noise_schedule(int episode, int episodes, double start, double end) {
    if (episodes <= 1) {
        return start;
    }
    const double frac = static_cast<double>(std::clamp(episode, 0, episodes - 1)) / (episodes - 1);
    return start + (end - start) * frac;
}

void TrainParams::validate() const {
    if (episodes < 1) {
        throw InputError("episodes", "must be at least 1");
    }
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
        throw InputError("learning_rate", "must be positive");
    }
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw InputError("eta", "must lie in [0, 1]");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw InputError("tau", "must lie in (0, 1]");
    }
    if (!(rho0 >= 0.0 && rho0 <= 1.0)) {
        throw InputError("rho", "must lie in [0, 1]");
    }
    if (rho_decrement < 0.0 || rho_interval < 1) {
        throw InputError("rho_decay", "decrement must be non-negative and interval positive");
    }
    if (batch < 1) {
        throw InputError("batch", "must be positive");
    }
    if (capacity < 1) {
        throw InputError("capacity", "must be positive");
    }
    if (noise_start < 0.0 || noise_end < 0.0) {
        throw InputError("noise", "must be non-negative");
    }
    if (expert_episodes < 0) {
        throw InputError("expert_episodes", "must be non-negative");
    }
    if (update_every < 1) {
        throw InputError("update_every", "must be positive");
    }
    if (!(reward_scale > 0.0)) {
        throw InputError("reward_scale", "must be positive");
    }
    if (actor_hidden < 1 || critic_hidden < 1) {
        throw InputError("hidden", "layer widths must be positive");
    }
}

Batch Batch::from(const std::vector<const Experience*>& items) {
    if (items.empty()) {
        throw InputError("batch", "no experiences");
    }
    const auto b = static_cast<Eigen::Index>(items.size());
    const auto ns = items.front()->s.size();
    const auto na = items.front()->a.size();
    Batch out;
    out.s.resize(ns, b);
    out.a.resize(na, b);
    out.r.resize(b);
    out.s_next.resize(ns, b);
    out.done.resize(b);
    for (Eigen::Index c = 0; c < b; ++c) {
        const Experience& e = *items[static_cast<std::size_t>(c)];
        out.s.col(c) = e.s;
        out.a.col(c) = e.a;
        out.r[c] = e.r;
        out.s_next.col(c) = e.s_next;
        out.done[c] = e.done ? 1.0 : 0.0;
    }
    return out;
}

ActorCritic::ActorCritic(std::size_t agents, int actor_hidden, int critic_hidden) : agents_(agents) {
    if (agents == 0) {
        throw InputError("agents", "need at least one agent");
    }
    const int k = static_cast<int>(agents);
    for (std::size_t i = 0; i < agents; ++i) {
        actors_.emplace_back(std::vector<int>{kObservationFeatures, actor_hidden, actor_hidden, k},
                             nn::OutputActivation::sigmoid);
    }
    target_actors_ = actors_;
    critic_ = nn::Mlp({k * kObservationFeatures + k * k, critic_hidden, critic_hidden, 1}, nn::OutputActivation::linear);
    target_critic_ = critic_;
}

void ActorCritic::initialize(RandomStream& rng) {
    for (auto& actor : actors_) {
        actor.initialize(rng);
    }
    critic_.initialize(rng);
    target_actors_ = actors_;
    target_critic_ = critic_;
}

int ActorCritic::critic_input_size() const { return critic_.input_size(); }

Eigen::MatrixXd ActorCritic::agent_slice(const Eigen::MatrixXd& s, std::size_t i) const {
    return s.middleRows(static_cast<Eigen::Index>(i) * kObservationFeatures, kObservationFeatures);
}

Eigen::MatrixXd ActorCritic::critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const {
    if (s.cols() != a.cols()) {
        throw InputError("action", "batch sizes differ");
    }
    Eigen::MatrixXd x(s.rows() + a.rows(), s.cols());
    x << s, a;
    return x;
}

namespace {

Eigen::MatrixXd joint_action(const std::vector<nn::Mlp>& actors, const Eigen::MatrixXd& s) {
    const auto k = static_cast<Eigen::Index>(actors.size());
    if (s.rows() != k * kObservationFeatures) {
        throw InputError("features", fmt::format("expected {} rows, got {}", k * kObservationFeatures, s.rows()));
    }
    Eigen::MatrixXd a(k * k, s.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
        a.middleRows(i * k, k) = actors[static_cast<std::size_t>(i)].forward(s.middleRows(i * kObservationFeatures, kObservationFeatures));
    }
    return a;
}

}  // namespace

Eigen::MatrixXd ActorCritic::act(const Eigen::MatrixXd& s) const { return joint_action(actors_, s); }

Eigen::MatrixXd ActorCritic::target_act(const Eigen::MatrixXd& s) const { return joint_action(target_actors_, s); }

Eigen::RowVectorXd ActorCritic::value(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const {
    return critic_.forward(critic_input(s, a));
}

Eigen::RowVectorXd ActorCritic::targets(const Batch& batch, double eta, double reward_scale) const {
    const Eigen::RowVectorXd next = target_critic_.forward(critic_input(batch.s_next, target_act(batch.s_next)));
    return (reward_scale * batch.r.array() + eta * (1.0 - batch.done.array()) * next.array()).matrix();
}

double ActorCritic::critic_loss(const Batch& batch, const Eigen::RowVectorXd& targets, Eigen::VectorXd* grad) const {
    nn::Mlp::Cache cache;
    const Eigen::RowVectorXd q = critic_.forward(critic_input(batch.s, batch.a), cache);
    const Eigen::RowVectorXd err = q - targets;
    const double b = static_cast<double>(q.size());
    if (grad != nullptr) {
        critic_.backward(cache, (2.0 / b) * err, grad);
    }
    return err.squaredNorm() / b;
}

double ActorCritic::actor_objective(std::size_t i, const Batch& batch, Eigen::VectorXd* grad) const {
    const auto k = static_cast<Eigen::Index>(agents_);
    const auto row = static_cast<Eigen::Index>(i) * k;
    nn::Mlp::Cache actor_cache;
    const Eigen::MatrixXd own = actors_[i].forward(agent_slice(batch.s, i), actor_cache);
    Eigen::MatrixXd a = batch.a;
    a.middleRows(row, k) = own;

    nn::Mlp::Cache critic_cache;
    const Eigen::RowVectorXd q = critic_.forward(critic_input(batch.s, a), critic_cache);
    const double b = static_cast<double>(q.size());
    if (grad != nullptr) {
        const Eigen::MatrixXd dq = critic_.backward(critic_cache, Eigen::RowVectorXd::Constant(q.size(), -1.0 / b), nullptr);
        const Eigen::MatrixXd d_own = dq.middleRows(batch.s.rows() + row, k);
        actors_[i].backward(actor_cache, d_own, grad);
    }
    return -q.mean();
}

void ActorCritic::soft_update(double tau) {
    for (std::size_t i = 0; i < agents_; ++i) {
        target_actors_[i].soft_update_from(actors_[i], tau);
    }
    target_critic_.soft_update_from(critic_, tau);
}

std::string ActorCritic::descriptor() const {
    nlohmann::ordered_json d;
    d["agents"] = agents_;
    d["features"] = kObservationFeatures;
    d["actor"] = actors_.empty() ? std::string() : actors_.front().descriptor();
    d["critic"] = critic_.descriptor();
    return d.dump();
}

namespace {

constexpr char kMagic[8] = {'E', 'P', 'Q', 'P', 'A', 'R', 'A', 'M'};

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) {
        throw InputError("parameters", "file is truncated");
    }
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

void put_vector(std::string& out, const Eigen::VectorXd& v) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void take_vector(const std::string& in, std::size_t& pos, Eigen::VectorXd& v) {
    const auto n = take<std::uint64_t>(in, pos);
    if (n != static_cast<std::uint64_t>(v.size())) {
        throw InputError("parameters", fmt::format("expected {} values, file has {}", v.size(), n));
    }
    if (pos + n * sizeof(double) > in.size()) {
        throw InputError("parameters", "file is truncated");
    }
    std::memcpy(v.data(), in.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
}

}  // namespace

void ActorCritic::save(const std::filesystem::path& path) const {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kParameterFileVersion);
    const std::string desc = descriptor();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(desc.size()));
    out += desc;
    for (const auto& actor : actors_) {
        put_vector(out, actor.parameters());
    }
    put_vector(out, critic_.parameters());
    io::write_file(path, out);
}

ActorCritic ActorCritic::load(const std::filesystem::path& path) {
    const std::string in = io::read_file(path);
    if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
        throw InputError("parameters", fmt::format("{} is not a parameter file", path.string()));
    }
    std::size_t pos = sizeof(kMagic);
    const auto version = take<std::uint32_t>(in, pos);
    if (version != kParameterFileVersion) {
        throw InputError("parameters", fmt::format("unsupported version {}", version));
    }
    const auto len = take<std::uint32_t>(in, pos);
    if (pos + len > in.size()) {
        throw InputError("parameters", "file is truncated");
    }
    nlohmann::ordered_json desc;
    try {
        desc = nlohmann::ordered_json::parse(in.substr(pos, len));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("parameters", fmt::format("bad architecture descriptor: {}", e.what()));
    }
    pos += len;
    if (desc.value("features", 0) != kObservationFeatures) {
        throw InputError("parameters", "observation feature count differs from this build");
    }
    const auto agents = desc.at("agents").get<std::size_t>();
    const std::string actor_desc = desc.at("actor").get<std::string>();
    const std::string critic_desc = desc.at("critic").get<std::string>();
    // hidden widths are the second field of each "in-h-h-out" descriptor
    const auto hidden = [](const std::string& d) {
        const auto first = d.find('-');
        return std::stoi(d.substr(first + 1, d.find('-', first + 1) - first - 1));
    };
    ActorCritic model(agents, hidden(actor_desc), hidden(critic_desc));
    if (model.descriptor() != desc.dump()) {
        throw InputError("parameters", "architecture descriptor does not match a supported layout");
    }
    for (auto& actor : model.actors_) {
        take_vector(in, pos, actor.parameters());
    }
    take_vector(in, pos, model.critic_.parameters());
    if (pos != in.size()) {
        throw InputError("parameters", "trailing bytes after the critic");
    }
    model.target_actors_ = model.actors_;
    model.target_critic_ = model.critic_;
    return model;
}

LearnedPolicy::LearnedPolicy(std::shared_ptr<const ActorCritic> model, double noise_sigma)
    : model_(std::move(model)), noise_sigma_(noise_sigma) {
    if (!model_) {
        throw InputError("model", "missing");
    }
}

void LearnedPolicy::reset(const Scenario& scenario, std::uint64_t seed) {
    if (scenario.size() != model_->agents()) {
        throw InputError("parameters",
                         fmt::format("model has {} agents, scenario has {} divisions", model_->agents(), scenario.size()));
    }
    l0_ = scenario.objectives.l0;
    rng_.emplace(seed, "policy/learned");
}

QuotaMatrix LearnedPolicy::act(const std::vector<AgentObservation>& obs, int day) {
    const auto k = static_cast<Eigen::Index>(obs.size());
    const Eigen::VectorXd a = model_->act(joint_features(obs, l0_));
    Eigen::MatrixXd q(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double v = a[i * k + j];
            if (noise_sigma_ > 0.0 && rng_) {
                v += rng_->normal(0.0, noise_sigma_);
            }
            q(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return QuotaMatrix(day, std::move(q));
}

namespace {

Experience to_experience(const Transition& t, double l0) {
    const auto k = static_cast<Eigen::Index>(t.s.size());
    Experience e;
    e.s = joint_features(t.s, l0);
    e.s_next = joint_features(t.s_next, l0);
    e.a.resize(k * k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            e.a[i * k + j] = t.a.quota.quotas(i, j);
        }
    }
    double sum = 0.0;
    for (double r : t.r) {
        sum += r;
    }
    e.r = sum / static_cast<double>(k);
    e.done = t.done;
    return e;
}

}  // namespace

TrainResult train(const Scenario& scenario, const TrainParams& params, std::uint64_t seed,
                  const std::function<void(const CurvePoint&)>& progress) {
    params.validate();
    scenario.validate();
    const std::size_t k = scenario.size();
    const double l0 = scenario.objectives.l0;
    const int max_steps = scenario.control.max_steps;

    TrainResult result;
    result.model = ActorCritic(k, params.actor_hidden, params.critic_hidden);
    RandomStream init_rng(seed, "train/init");
    result.model.initialize(init_rng);
    ActorCritic& model = result.model;

    nn::Adam critic_opt(model.critic().parameter_count(), params.critic_lr);
    std::vector<nn::Adam> actor_opt;
    for (const auto& actor : model.actors()) {
        actor_opt.emplace_back(actor.parameter_count(), params.actor_lr);
    }

    ReplayBuffer expert(params.capacity, ReplaySource::expert);
    ReplayBuffer agent(params.capacity, ReplaySource::agent);
    for (int e = 0; e < params.expert_episodes; ++e) {
        ExpertPolicy policy;
        const EpisodeTrace trace = run_episode(policy, scenario, derive_seed(seed, fmt::format("expert/{}", e)),
                                               max_steps, ObjectiveWeights::equal(), true);
        for (const auto& t : trace.transitions) {
            expert.push(to_experience(t, l0));
        }
    }

    RandomStream noise_rng(seed, "train/noise");
    RandomStream sample_rng(seed, "train/sample");
    Environment env(scenario);
    ObjectiveWeights weights = ObjectiveWeights::equal();
    long long updates = 0;
    long long env_steps = 0;

    const auto update = [&]() {
        const double rho = rho_schedule(updates, params.rho0, params.rho_decrement, params.rho_interval);
        const Batch batch = Batch::from(
            sample_mixed(expert, agent, rho, static_cast<std::size_t>(params.batch), sample_rng));
        const Eigen::RowVectorXd y = model.targets(batch, params.eta, params.reward_scale);
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.critic().parameter_count());
        model.critic_loss(batch, y, &grad);
        critic_opt.step(model.critic().parameters(), grad);
        for (std::size_t i = 0; i < k; ++i) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(model.actors()[i].parameter_count());
            model.actor_objective(i, batch, &g);
            actor_opt[i].step(model.actors()[i].parameters(), g);
        }
        model.soft_update(params.tau);
        ++updates;
    };

    for (int episode = 0; episode < params.episodes; ++episode) {
        const double sigma = noise_schedule(episode, params.episodes, params.noise_start, params.noise_end);
        auto obs = env.reset(derive_seed(seed, fmt::format("episode/{}", episode)));
        env.set_weights(weights);

        EpisodeTrace trace;
        trace.policy_id = "learned";
        trace.weights = weights;
        Eigen::VectorXd s = joint_features(obs, l0);
        while (true) {
            Eigen::VectorXd a = model.act(s);
            for (Eigen::Index n = 0; n < a.size(); ++n) {
                a[n] = std::clamp(a[n] + noise_rng.normal(0.0, sigma), 0.0, 1.0);
            }
            Eigen::MatrixXd q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (Eigen::Index i = 0; i < q.rows(); ++i) {
                q.row(i) = a.segment(i * q.cols(), q.cols()).transpose();
            }
            QuotaMatrix quota(env.day(), q);
            StepOutcome out = env.step({quota});
            ++trace.steps;
            ++env_steps;

            double mean_reward = 0.0;
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
                mean_reward += out.rewards[i];
            }
            mean_reward /= static_cast<double>(k);

            Eigen::VectorXd s_next = joint_features(out.observations, l0);
            agent.push({s, a, mean_reward, s_next, out.terminated()});
            s = std::move(s_next);

            if (env_steps % params.update_every == 0 && expert.size() + agent.size() >= static_cast<std::size_t>(params.batch)) {
                update();
            }
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

        const CurvePoint point{episode, trace.episode_return(),
                               rho_schedule(updates, params.rho0, params.rho_decrement, params.rho_interval), sigma};
        result.curve.push_back(point);
        result.episodes.push_back(summarize(trace));
        if (params.adaptive_weights) {
            weights = weights_from_trace(trace, k);
        }
        if (progress) {
            progress(point);
        }
    }
    result.updates = updates;
    return result;
}

std::string format_curve_csv(const std::vector<CurvePoint>& curve) {
    std::string out = kCurveHeader;
    for (const auto& p : curve) {
        out += fmt::format("{},{},{},{}\n", p.episode, io::format_double(p.mean_return), io::format_double(p.rho),
                           io::format_double(p.noise_sigma));
    }
    return out;
}

}  // namespace epiquota
