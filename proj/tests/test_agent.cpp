#include "epiquota/agent.hpp"
#include "epiquota/io.hpp"

#include "fixtures.hpp"
#include "grad_check.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace epiquota;

TEST_CASE("observation features") {
    AgentObservation o;
    o.position_code = 1;
    o.state = {900, 50, 10, 40};
    o.delta_state = {-5, 3, 1, 1};
    o.accumulated_loss = 32.0;
    o.mean_demand = 99.0;
    const Eigen::VectorXd f = observation_features(o, 4, 64.0);
    REQUIRE(f.size() == kObservationFeatures);
    CHECK(f[0] == 0.25);
    CHECK(f[1] == doctest::Approx(0.9));
    CHECK(f[2] == doctest::Approx(std::log(51.0) / 10.0));
    CHECK(f[9] == 0.5);
    CHECK(f[10] == doctest::Approx(std::log(100.0) / 10.0));
    const Eigen::VectorXd joint = joint_features({o, o, o}, 64.0);
    CHECK(joint.size() == 3 * kObservationFeatures);
    CHECK(joint[kObservationFeatures] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("replay buffer is FIFO at capacity") {
    ReplayBuffer buf(3, ReplaySource::agent);
    CHECK_THROWS_AS(ReplayBuffer(0, ReplaySource::agent), InputError);
    RandomStream rng(1, "buf");
    CHECK_THROWS_AS(buf.sample(rng), InvariantBreach);
    for (int n = 0; n < 5; ++n) {
        Experience e;
        e.r = n;
        buf.push(e);
    }
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).r == 2.0);
    CHECK(buf.at(2).r == 4.0);
}

TEST_CASE("mixed sampling draws the expert share rho") {
    ReplayBuffer expert(10, ReplaySource::expert);
    ReplayBuffer agent(10, ReplaySource::agent);
    Experience e;
    e.r = 1.0;
    expert.push(e);
    e.r = 2.0;
    agent.push(e);
    RandomStream rng(3, "mix");
    std::size_t from_expert = 0;
    const auto items = sample_mixed(expert, agent, 0.5, 20000, rng, &from_expert);
    const double share = static_cast<double>(from_expert) / 20000.0;
    CHECK(share >= 0.48);
    CHECK(share <= 0.52);
    std::size_t counted = 0;
    for (const auto* p : items) {
        counted += p->r == 1.0 ? 1 : 0;
    }
    CHECK(counted == from_expert);

    // an empty buffer hands its share to the other one
    ReplayBuffer empty(4, ReplaySource::expert);
    sample_mixed(empty, agent, 1.0, 50, rng, &from_expert);
    CHECK(from_expert == 0);
    CHECK_THROWS_AS(sample_mixed(empty, ReplayBuffer(4, ReplaySource::agent), 0.5, 1, rng), InvariantBreach);
    CHECK_THROWS_AS(sample_mixed(expert, agent, 1.5, 1, rng), InputError);
}

TEST_CASE("rho and noise schedules") {
    CHECK(rho_schedule(0) == 0.5);
    CHECK(rho_schedule(199) == 0.5);
    CHECK(rho_schedule(200) == doctest::Approx(0.4));
    CHECK(rho_schedule(999) == doctest::Approx(0.1));
    CHECK(rho_schedule(1000) == 0.0);
    CHECK(rho_schedule(50000) == 0.0);
    CHECK_THROWS_AS(rho_schedule(1, 0.5, 0.1, 0), InputError);

    CHECK(noise_schedule(0, 11) == 0.2);
    CHECK(noise_schedule(10, 11) == doctest::Approx(0.01));
    CHECK(noise_schedule(5, 11) == doctest::Approx(0.105));
    CHECK(noise_schedule(0, 1) == 0.2);
}

TEST_CASE("training parameters are validated") {
    TrainParams p;
    CHECK_NOTHROW(p.validate());
    p.eta = 1.5;
    CHECK_THROWS_AS(p.validate(), InputError);
    p = TrainParams{};
    p.tau = 0.0;
    CHECK_THROWS_AS(p.validate(), InputError);
    p = TrainParams{};
    p.batch = 0;
    CHECK_THROWS_AS(p.validate(), InputError);
}

TEST_CASE("actor and critic gradients match central differences") {
    RandomStream rng(11, "ac-grad");
    for (int trial = 0; trial < 6; ++trial) {
        ActorCritic model(2, 8, 12);
        model.initialize(rng);
        grad_check::perturb(model, rng, 0.3);
        const Batch batch = grad_check::random_batch(rng, 2, 5);
        const Eigen::RowVectorXd y = model.targets(batch, 0.9, 1.0);
        CHECK(grad_check::critic_error(model, batch, y) < 1e-6);
        CHECK(grad_check::actor_error(model, 0, batch) < 1e-6);
        CHECK(grad_check::actor_error(model, 1, batch) < 1e-6);
    }
}

TEST_CASE("critic targets") {
    RandomStream rng(12, "targets");
    ActorCritic model(2, 4, 6);
    model.initialize(rng);
    grad_check::perturb(model, rng, 0.3);
    Batch batch = grad_check::random_batch(rng, 2, 4);
    batch.done << 1, 0, 1, 0;
    const Eigen::RowVectorXd y = model.targets(batch, 0.9, 2.0);
    const Eigen::RowVectorXd next = model.target_critic().forward(
        (Eigen::MatrixXd(batch.s_next.rows() + 4, 4) << batch.s_next, model.target_act(batch.s_next)).finished());
    CHECK(y[0] == doctest::Approx(2.0 * batch.r[0]));
    CHECK(y[1] == doctest::Approx(2.0 * batch.r[1] + 0.9 * next[1]));
    CHECK(y[3] == doctest::Approx(2.0 * batch.r[3] + 0.9 * next[3]));
}

TEST_CASE("parameter file round trip and corruption") {
    RandomStream rng(2, "save");
    ActorCritic model(3, 6, 10);
    model.initialize(rng);
    const auto dir = std::filesystem::temp_directory_path() / "epiquota-agent-test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "params.bin";
    model.save(path);
    const ActorCritic back = ActorCritic::load(path);
    CHECK(back.descriptor() == model.descriptor());
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.actors()[i].parameters() == model.actors()[i].parameters());
        CHECK(back.target_actors()[i].parameters() == model.actors()[i].parameters());
    }
    CHECK(back.critic().parameters() == model.critic().parameters());

    const std::string bytes = io::read_file(path);
    io::write_file(path, bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(ActorCritic::load(path), InputError);
    io::write_file(path, bytes + "x");
    CHECK_THROWS_AS(ActorCritic::load(path), InputError);
    io::write_file(path, "NOTPARAM" + bytes.substr(8));
    CHECK_THROWS_AS(ActorCritic::load(path), InputError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    io::write_file(path, bad_version);
    CHECK_THROWS_AS(ActorCritic::load(path), InputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("learned policy clamps noisy actions and checks the agent count") {
    RandomStream rng(5, "learned");
    auto model = std::make_shared<ActorCritic>(2, 4, 4);
    model->initialize(rng);
    LearnedPolicy policy(model, 5.0);
    CHECK_THROWS_AS(policy.reset(fixtures::line_city(3), 1), InputError);
    const Scenario s = fixtures::line_city(2);
    policy.reset(s, 1);
    Environment env(s);
    const auto q = policy.act(env.reset(1), 0);
    CHECK((q.quotas.array() >= 0.0).all());
    CHECK((q.quotas.array() <= 1.0).all());
    CHECK(((q.quotas.array() == 0.0) || (q.quotas.array() == 1.0)).any());

    // without noise the near-zero output layer gives one half everywhere
    LearnedPolicy quiet(model);
    quiet.reset(s, 1);
    CHECK(quiet.act(env.reset(1), 0).quotas.isApproxToConstant(0.5, 1e-2));
    CHECK_THROWS_AS(LearnedPolicy(nullptr), InputError);
}

TEST_CASE("training is deterministic in the seed") {
    const Scenario s = fixtures::line_city(2);
    TrainParams p;
    p.episodes = 3;
    p.expert_episodes = 1;
    p.batch = 8;
    p.actor_hidden = 8;
    p.critic_hidden = 8;
    const TrainResult a = train(s, p, 4);
    const TrainResult b = train(s, p, 4);
    CHECK(a.updates > 0);
    REQUIRE(a.curve.size() == 3);
    CHECK(format_curve_csv(a.curve) == format_curve_csv(b.curve));
    CHECK(a.model.critic().parameters() == b.model.critic().parameters());
    CHECK(format_curve_csv(a.curve).rfind(kCurveHeader, 0) == 0);
    const TrainResult c = train(s, p, 5);
    CHECK(a.model.critic().parameters() != c.model.critic().parameters());
}
