#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "relevagan/data.hpp"
#include "relevagan/drl.hpp"

using namespace relevagan;

namespace {

data::ActionFeatureMap identity_map() {
    data::ActionFeatureMap map;
    for (std::size_t a = 0; a < data::kActionSpaceSize; ++a) {
        map.names.push_back(data::kActionFeatureNames[a]);
        map.indices.push_back(a);
    }
    return map;
}

data::DeltaVector ramp_deltas() {
    data::DeltaVector dv;
    for (std::size_t a = 0; a < data::kActionSpaceSize; ++a)
        dv.values.push_back(0.01 * static_cast<double>(a + 1));
    return dv;
}

std::vector<double> random_state(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(data::kActionSpaceSize);
    for (double& v : s) v = u(rng);
    return s;
}

drl::DrlConfig small_cfg() {
    drl::DrlConfig cfg;
    cfg.hidden = {8, 8};
    cfg.warmup = 8;
    cfg.minibatch = 4;
    cfg.replay_capacity = 64;
    return cfg;
}

// Zero every parameter, then plant the output-layer bias so the net emits
// exactly `q` for any input.
void plant_q_table(nn::Network& net, const std::vector<double>& q) {
    std::vector<double> p(net.param_count(), 0.0);
    std::copy(q.begin(), q.end(), p.end() - q.size());
    net.set_flat_params(p);
}

}  // namespace

TEST_CASE("env reset copies the seed and clears the turn counter") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    std::vector<double> seed = random_state(1);
    std::vector<double> s = env.reset(seed);
    CHECK(s == seed);
    CHECK(env.turn() == 0);
    CHECK(!env.done());

    std::vector<double> seed2 = random_state(2);
    CHECK(env.reset(seed2) == seed2);
    CHECK(env.reset(seed2) != seed);
}

TEST_CASE("env rejects seeds narrower than the action map") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    std::vector<double> narrow(5, 0.0);
    CHECK_THROWS_AS(env.reset(narrow), std::invalid_argument);
}

TEST_CASE("env step perturbs exactly one feature by its delta") {
    data::DeltaVector dv = ramp_deltas();
    drl::EvasionEnv env(dv, identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    std::vector<double> seed = random_state(3);
    for (std::size_t a = 0; a < data::kActionSpaceSize; ++a) {
        env.reset(seed);
        drl::EvasionEnv::StepResult r = env.step(a);
        for (std::size_t k = 0; k < seed.size(); ++k) {
            if (k == a)
                CHECK(r.next_state[k] == seed[k] + dv.values[a]);
            else
                CHECK(r.next_state[k] == seed[k]);
        }
    }
}

TEST_CASE("confident detector ends the episode with reward 1") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.6;
    });
    env.reset(random_state(4));
    drl::EvasionEnv::StepResult r = env.step(0);
    CHECK(r.reward == 1);
    CHECK(r.done);
    CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("an unconvinced detector runs the episode to the 13-turn cap") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.4;
    });
    env.reset(random_state(5));
    std::size_t steps = 0;
    while (!env.done()) {
        drl::EvasionEnv::StepResult r = env.step(steps % data::kActionSpaceSize);
        CHECK(r.reward == 0);
        ++steps;
    }
    CHECK(steps == 13);
    CHECK(env.turn() == 13);
}

TEST_CASE("a C of exactly 0.5 is not an evasion") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.5;
    });
    env.reset(random_state(6));
    CHECK(env.step(0).reward == 0);
}

TEST_CASE("env rejects out-of-range actions") {
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    env.reset(random_state(7));
    CHECK_THROWS_AS(env.step(13), std::invalid_argument);
}

TEST_CASE("equal Q values explore uniformly over the 13 actions") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    plant_q_table(agent.online(), std::vector<double>(13, 0.0));
    std::vector<double> s = random_state(8);

    std::vector<double> p = agent.action_probabilities(s);
    double sum = 0.0;
    for (double v : p) {
        CHECK(v == doctest::Approx(1.0 / 13.0).epsilon(1e-12));
        sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);

    std::vector<std::size_t> counts(13, 0);
    for (int i = 0; i < 10000; ++i)
        counts[agent.select_action(s, drl::PolicyMode::explore)] += 1;
    double chi2 = 0.0;
    const double expect = 10000.0 / 13.0;
    for (std::size_t c : counts)
        chi2 += (static_cast<double>(c) - expect) * (static_cast<double>(c) - expect) /
                expect;
    CHECK(chi2 < 26.217);  // chi-square, 12 dof, p = 0.01
}

TEST_CASE("greedy mode picks the planted one-hot maximum") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    std::vector<double> q(13, 0.0);
    q[9] = 1000.0;
    plant_q_table(agent.online(), q);
    CHECK(agent.select_action(random_state(9), drl::PolicyMode::greedy) == 9);
}

TEST_CASE("boltzmann hand value: Q = [1, 0, ...] gives P(0) = e / (e + 12)") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    std::vector<double> q(13, 0.0);
    q[0] = 1.0;
    plant_q_table(agent.online(), q);
    std::vector<double> p = agent.action_probabilities(random_state(10));
    const double e = std::exp(1.0);
    CHECK(p[0] == doctest::Approx(e / (e + 12.0)).epsilon(1e-12));
    for (std::size_t a = 1; a < 13; ++a)
        CHECK(p[a] == doctest::Approx(1.0 / (e + 12.0)).epsilon(1e-12));
}

TEST_CASE("boltzmann probabilities normalize and survive extreme Q values") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    std::vector<double> q(13, 0.0);
    q[0] = 1e9;  // clipped to 500 pre-softmax
    q[1] = -1e9;
    plant_q_table(agent.online(), q);
    std::vector<double> p = agent.action_probabilities(random_state(11));
    double sum = 0.0;
    for (double v : p) {
        CHECK(std::isfinite(v));
        sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
}

TEST_CASE("dqn_target hand cases") {
    std::vector<double> qo = {0.1, 0.9, 0.3};
    std::vector<double> qt = {5.0, 7.0, 11.0};
    drl::Transition t;

    t.terminal = true;
    t.reward = 1;
    CHECK(drl::dqn_target(t, qo, qt, 0.99) == 1.0);

    t.terminal = false;
    t.reward = 0;
    CHECK(drl::dqn_target(t, qo, qt, 0.0) == 0.0);
    // Online net argmax is index 1; the target net values it at 7.
    CHECK(drl::dqn_target(t, qo, qt, 0.99) == doctest::Approx(0.99 * 7.0).epsilon(1e-12));
    t.reward = 1;
    CHECK(drl::dqn_target(t, qo, qt, 0.99) ==
          doctest::Approx(1.0 + 0.99 * 7.0).epsilon(1e-12));
}

TEST_CASE("double-DQN targets match a straight-line oracle on random nets") {
    drl::DrlConfig cfg = small_cfg();
    cfg.seed = 77;
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    // Push online and target apart so the double-DQN indirection matters.
    for (int i = 0; i < 5; ++i) {
        std::vector<drl::Transition> batch;
        for (int j = 0; j < 4; ++j) {
            drl::Transition t;
            t.state = random_state(100 + i * 10 + j);
            t.next_state = random_state(200 + i * 10 + j);
            t.action = static_cast<std::size_t>(j) % 13;
            t.reward = j % 2;
            t.terminal = j == 3;
            batch.push_back(t);
        }
        agent.train_step(batch);
    }

    for (int trial = 0; trial < 50; ++trial) {
        drl::Transition t;
        t.state = random_state(300 + trial);
        t.next_state = random_state(400 + trial);
        t.reward = trial % 2;
        t.terminal = trial % 7 == 0;

        std::vector<double> qo = agent.q_values(t.next_state);
        std::vector<double> qt = agent.target_q_values(t.next_state);
        double got = drl::dqn_target(t, qo, qt, 0.99);

        double want;
        if (t.terminal) {
            want = t.reward;
        } else {
            std::size_t best = 0;
            for (std::size_t a = 1; a < qo.size(); ++a)
                if (qo[a] > qo[best]) best = a;
            want = static_cast<double>(t.reward) + 0.99 * qt[best];
        }
        CHECK(got == want);
    }
}

TEST_CASE("train_step rejects an empty minibatch and applies the soft update") {
    drl::DrlConfig cfg = small_cfg();
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    CHECK_THROWS_AS(agent.train_step({}), std::invalid_argument);

    std::vector<double> target_before = agent.target().flat_state();
    std::vector<drl::Transition> batch;
    for (int j = 0; j < 4; ++j) {
        drl::Transition t;
        t.state = random_state(500 + j);
        t.next_state = random_state(600 + j);
        t.action = static_cast<std::size_t>(j);
        t.reward = 1;
        t.terminal = true;
        batch.push_back(t);
    }
    double loss = agent.train_step(batch);
    CHECK(loss >= 0.0);

    std::vector<double> online_after = agent.online().flat_state();
    std::vector<double> target_after = agent.target().flat_state();
    for (std::size_t i = 0; i < target_after.size(); ++i) {
        double want = (1.0 - cfg.target_tau) * target_before[i] +
                      cfg.target_tau * online_after[i];
        CHECK(target_after[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("train_from_replay is a no-op before warmup") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    for (int j = 0; j < 7; ++j) {  // warmup is 8
        drl::Transition t;
        t.state = random_state(j);
        t.next_state = random_state(50 + j);
        t.reward = 0;
        agent.remember(t);
    }
    CHECK(!agent.train_from_replay().has_value());
    drl::Transition t;
    t.state = random_state(7);
    t.next_state = random_state(57);
    agent.remember(t);
    CHECK(agent.train_from_replay().has_value());
}

TEST_CASE("replay evicts the oldest transition first") {
    drl::DrlConfig cfg = small_cfg();
    cfg.replay_capacity = 3;
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    for (std::size_t j = 0; j < 5; ++j) {
        drl::Transition t;
        t.state = random_state(j);
        t.next_state = t.state;
        t.action = j % 13;
        agent.remember(t);
    }
    CHECK(agent.replay_size() == 3);
    CHECK(agent.replay()[0].action == 2);
    CHECK(agent.replay()[2].action == 4);

    drl::Transition bad;
    bad.state = random_state(9);
    bad.next_state = bad.state;
    bad.action = 13;
    CHECK_THROWS_AS(agent.remember(bad), std::invalid_argument);
}

TEST_CASE("attack session against a blind detector: no evasions, full episodes") {
    drl::DrlConfig cfg = small_cfg();
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    Matrix bots(4, data::kActionSpaceSize);
    for (std::size_t r = 0; r < 4; ++r) {
        std::vector<double> s = random_state(700 + r);
        std::copy(s.begin(), s.end(), bots.row(r).begin());
    }
    drl::AttackSessionReport rep = drl::run_attack_session(agent, env, bots, 10);
    CHECK(rep.evasion_count == 0);
    CHECK(rep.evasions.empty());
    CHECK(rep.mean_episode_length == 13.0);
    CHECK(rep.steps == 130);
    CHECK(agent.replay_size() == std::min<std::size_t>(130, cfg.replay_capacity));
}

TEST_CASE("attack session against a gullible detector: every round evades in one turn") {
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 1.0;
    });
    Matrix bots(3, data::kActionSpaceSize);
    for (std::size_t r = 0; r < 3; ++r) {
        std::vector<double> s = random_state(800 + r);
        std::copy(s.begin(), s.end(), bots.row(r).begin());
    }
    drl::AttackSessionReport rep = drl::run_attack_session(agent, env, bots, 9);
    CHECK(rep.evasion_count == 9);
    CHECK(rep.mean_episode_length == 1.0);
    CHECK(rep.steps == 9);
    // Rounds cycle through the batch; evasion k grew from bot row k mod 3.
    for (std::size_t k = 0; k < rep.evasions.size(); ++k) {
        std::span<const double> seed = bots.row(k % 3);
        for (std::size_t j = 0; j < seed.size(); ++j)
            CHECK(rep.evasion_seeds[k][j] == seed[j]);
    }
}

TEST_CASE("evasion perturbations are additive, on-map and budget bounded") {
    data::DeltaVector dv = ramp_deltas();
    // Deterministic detector that flips on a state-sum threshold, so some
    // episodes evade late and some never do.
    auto detector = [](std::span<const double> s) {
        double sum = 0.0;
        for (double v : s) sum += v;
        return sum > 7.0 ? 1.0 : 0.0;
    };
    drl::DqnAgent agent(data::kActionSpaceSize, small_cfg());
    drl::EvasionEnv env(dv, identity_map(), detector);
    Matrix bots(6, data::kActionSpaceSize);
    for (std::size_t r = 0; r < 6; ++r) {
        std::vector<double> s = random_state(900 + r);
        std::copy(s.begin(), s.end(), bots.row(r).begin());
    }
    drl::AttackSessionReport rep = drl::run_attack_session(agent, env, bots, 40);
    REQUIRE(rep.evasions.size() == rep.evasion_seeds.size());
    for (std::size_t k = 0; k < rep.evasions.size(); ++k) {
        for (std::size_t j = 0; j < data::kActionSpaceSize; ++j) {
            double diff = rep.evasions[k][j] - rep.evasion_seeds[k][j];
            CHECK(diff >= 0.0);
            CHECK(diff <= 13.0 * dv.values[j] + 1e-12);
        }
    }
    CHECK(rep.evasion_count <= 40);
}

TEST_CASE("session leaves weights untouched when replay never reaches warmup") {
    drl::DrlConfig cfg = small_cfg();
    cfg.warmup = 100000;
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    std::vector<double> before = agent.online().flat_state();

    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    Matrix bots(2, data::kActionSpaceSize);
    for (std::size_t r = 0; r < 2; ++r) {
        std::vector<double> s = random_state(950 + r);
        std::copy(s.begin(), s.end(), bots.row(r).begin());
    }
    drl::run_attack_session(agent, env, bots, 5);
    std::vector<double> after = agent.online().flat_state();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
}

TEST_CASE("replay and weights persist across sessions") {
    drl::DrlConfig cfg = small_cfg();
    drl::DqnAgent agent(data::kActionSpaceSize, cfg);
    drl::EvasionEnv env(ramp_deltas(), identity_map(), [](std::span<const double>) {
        return 0.0;
    });
    Matrix bots(2, data::kActionSpaceSize);
    for (std::size_t r = 0; r < 2; ++r) {
        std::vector<double> s = random_state(970 + r);
        std::copy(s.begin(), s.end(), bots.row(r).begin());
    }
    drl::run_attack_session(agent, env, bots, 2);
    std::size_t replay_after_first = agent.replay_size();
    std::vector<double> between = agent.online().flat_state();

    drl::run_attack_session(agent, env, bots, 2);
    CHECK(agent.replay_size() > replay_after_first);
    // The second session trains (warmup met), so weights moved from the
    // snapshot taken between sessions.
    bool moved = false;
    std::vector<double> after = agent.online().flat_state();
    for (std::size_t i = 0; i < after.size(); ++i)
        if (after[i] != between[i]) moved = true;
    CHECK(moved);
}
