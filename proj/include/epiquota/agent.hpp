#pragma once

#include "epiquota/env.hpp"
#include "epiquota/nn.hpp"
#include "epiquota/rng.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace epiquota {

// Per-agent input features: position, compartment shares and log counts,
// squashed day-over-day changes, scaled loss and mean demand.
inline constexpr int kObservationFeatures = 11;

Eigen::VectorXd observation_features(const AgentObservation& obs, std::size_t divisions, double l0);
// Agents' features stacked in index order.
Eigen::VectorXd joint_features(const std::vector<AgentObservation>& obs, double l0);

struct Experience {
    Eigen::VectorXd s;       // joint features
    Eigen::VectorXd a;       // joint action, agent rows in order
    double r = 0.0;          // mean agent reward
    Eigen::VectorXd s_next;
    bool done = false;
};

enum class ReplaySource { agent, expert };

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, ReplaySource source);

    void push(Experience e);
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return entries_.empty(); }
    ReplaySource source() const noexcept { return source_; }
    const Experience& at(std::size_t i) const { return entries_.at(i); }
    const Experience& sample(RandomStream& rng) const;

private:
    std::size_t capacity_;
    ReplaySource source_;
    std::deque<Experience> entries_;
};

// Each item comes from the expert buffer with probability rho (from the
// other buffer when one is empty). `expert_items` receives the expert count.
std::vector<const Experience*> sample_mixed(const ReplayBuffer& expert, const ReplayBuffer& agent, double rho,
                                            std::size_t n, RandomStream& rng, std::size_t* expert_items = nullptr);

// rho0 lowered by `decrement` after every `interval` updates, floored at 0.
double rho_schedule(long long update_step, double rho0 = 0.5, double decrement = 0.1, int interval = 200);
// Linear decay from `start` at the first episode to `end` at the last.
double noise_schedule(int episode, int episodes, double start = 0.2, double end = 0.01);

struct TrainParams {
    int episodes = 500;
    double actor_lr = 1e-4;
    double critic_lr = 1e-4;
    double eta = 0.9;   // discount
    double tau = 0.01;  // soft update
    double rho0 = 0.5;
    double rho_decrement = 0.1;
    int rho_interval = 200;
    int batch = 64;
    std::size_t capacity = 100000;
    double noise_start = 0.2;
    double noise_end = 0.01;
    int expert_episodes = 20;
    int update_every = 1;     // environment steps between updates
    double reward_scale = 1.0;  // applied to rewards inside the critic target
    bool adaptive_weights = true;  // false keeps 0.5/0.5 for every episode
    int actor_hidden = 64;
    int critic_hidden = 128;

    void validate() const;
};

struct Batch {
    Eigen::MatrixXd s;       // (K*F) x B
    Eigen::MatrixXd a;       // (K*K) x B
    Eigen::RowVectorXd r;    // 1 x B
    Eigen::MatrixXd s_next;  // (K*F) x B
    Eigen::RowVectorXd done; // 1 x B, 1 for terminal transitions

    static Batch from(const std::vector<const Experience*>& items);
};

// Per-agent deterministic actors over local features and one critic over the
// joint features and joint action, each with a delayed target copy.
class ActorCritic {
public:
    ActorCritic() = default;
    ActorCritic(std::size_t agents, int actor_hidden = 64, int critic_hidden = 128);

    void initialize(RandomStream& rng);

    std::size_t agents() const noexcept { return agents_; }
    int critic_input_size() const;

    // Joint action (agent rows stacked) for joint features; columns are a batch.
    Eigen::MatrixXd act(const Eigen::MatrixXd& s) const;
    Eigen::MatrixXd target_act(const Eigen::MatrixXd& s) const;
    Eigen::RowVectorXd value(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const;

    // y = scale * r + eta * (1 - done) * Q'(s', mu'(s'))
    Eigen::RowVectorXd targets(const Batch& batch, double eta, double reward_scale) const;

    // Mean squared TD error against fixed targets; adds dLoss/dω into `grad`.
    double critic_loss(const Batch& batch, const Eigen::RowVectorXd& targets, Eigen::VectorXd* grad) const;

    // -mean Q(s, a with agent i's part replaced by mu_i(s_i)); adds the
    // gradient wrt agent i's actor parameters into `grad`.
    double actor_objective(std::size_t i, const Batch& batch, Eigen::VectorXd* grad) const;

    void soft_update(double tau);

    std::vector<nn::Mlp>& actors() noexcept { return actors_; }
    const std::vector<nn::Mlp>& actors() const noexcept { return actors_; }
    const std::vector<nn::Mlp>& target_actors() const noexcept { return target_actors_; }
    nn::Mlp& critic() noexcept { return critic_; }
    const nn::Mlp& critic() const noexcept { return critic_; }
    const nn::Mlp& target_critic() const noexcept { return target_critic_; }

    std::string descriptor() const;
    void save(const std::filesystem::path& path) const;
    static ActorCritic load(const std::filesystem::path& path);

private:
    Eigen::MatrixXd agent_slice(const Eigen::MatrixXd& s, std::size_t i) const;
    Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const;

    std::size_t agents_ = 0;
    std::vector<nn::Mlp> actors_;
    std::vector<nn::Mlp> target_actors_;
    nn::Mlp critic_;
    nn::Mlp target_critic_;
};

inline constexpr std::uint32_t kParameterFileVersion = 1;

// Actor outputs as quota rows, optionally with clipped Gaussian exploration noise.
class LearnedPolicy final : public Policy {
public:
    explicit LearnedPolicy(std::shared_ptr<const ActorCritic> model, double noise_sigma = 0.0);

    std::string id() const override { return "learned"; }
    void reset(const Scenario& scenario, std::uint64_t seed) override;
    QuotaMatrix act(const std::vector<AgentObservation>& obs, int day) override;

private:
    std::shared_ptr<const ActorCritic> model_;
    double noise_sigma_;
    double l0_ = 64.0;
    std::optional<RandomStream> rng_;
};

struct CurvePoint {
    int episode = 0;
    double mean_return = 0.0;
    double rho = 0.0;
    double noise_sigma = 0.0;
};

struct TrainResult {
    ActorCritic model;
    std::vector<CurvePoint> curve;
    std::vector<EpisodeMetrics> episodes;  // per training episode
    long long updates = 0;
};

TrainResult train(const Scenario& scenario, const TrainParams& params, std::uint64_t seed,
                  const std::function<void(const CurvePoint&)>& progress = {});

inline constexpr const char* kCurveHeader = "episode,mean_return,rho,noise_sigma\n";
std::string format_curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace epiquota
