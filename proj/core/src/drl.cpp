#include "relevagan/drl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relevagan::drl {

using nn::Activation;
using nn::Mode;
using nn::Network;

EvasionEnv::EvasionEnv(data::DeltaVector deltas, data::ActionFeatureMap action_map,
                       DetectorFn detector, std::size_t max_turns)
    : deltas_(std::move(deltas)), map_(std::move(action_map)),
      detector_(std::move(detector)), max_turns_(max_turns) {
    if (deltas_.values.size() != map_.indices.size())
        throw std::invalid_argument("EvasionEnv: delta/action-map length mismatch");
    double max_delta = 0.0;
    for (double d : deltas_.values) max_delta = std::max(max_delta, d);
    state_cap_ = 1.0 + static_cast<double>(max_turns_) * max_delta;
}

std::vector<double> EvasionEnv::reset(std::span<const double> seed_sample) {
    if (!seed_.empty() && seed_sample.size() != seed_.size())
        throw std::invalid_argument("env_reset: sample width " +
                                    std::to_string(seed_sample.size()) +
                                    " != " + std::to_string(seed_.size()));
    for (std::size_t col : map_.indices)
        if (col >= seed_sample.size())
            throw std::invalid_argument("env_reset: sample narrower than action map");
    seed_.assign(seed_sample.begin(), seed_sample.end());
    state_ = seed_;
    turn_ = 0;
    done_ = false;
    return state_;
}

EvasionEnv::StepResult EvasionEnv::step(std::size_t action) {
    if (done_) throw std::logic_error("env_step: episode already done");
    if (action >= map_.indices.size())
        throw std::invalid_argument("env_step: action " + std::to_string(action) +
                                    " out of range");
    const std::size_t col = map_.indices[action];
    state_[col] = std::min(state_[col] + deltas_.values[action], state_cap_);
    turn_ += 1;

    StepResult r;
    const double c = detector_(state_);
    r.reward = c > 0.5 ? 1 : 0;
    done_ = r.reward == 1 || turn_ >= max_turns_;
    r.done = done_;
    r.next_state = state_;
    return r;
}

namespace {

Network build_q_net(std::size_t obs_dim, const DrlConfig& cfg, std::mt19937_64& rng) {
    Network net;
    std::size_t in = obs_dim;
    for (std::size_t h : cfg.hidden) {
        net.add(nn::make_dense(in, h, Activation::linear, rng));
        net.add(nn::BatchNormLayer(h));
        net.add(nn::ActivationLayer{Activation::relu});
        in = h;
    }
    net.add(nn::make_dense(in, data::kActionSpaceSize, Activation::linear, rng));
    return net;
}

}  // namespace

DqnAgent::DqnAgent(std::size_t obs_dim, const DrlConfig& cfg)
    : cfg_(cfg), rng_(cfg.seed) {
    std::mt19937_64 init_rng(cfg.seed);
    online_ = build_q_net(obs_dim, cfg, init_rng);
    target_ = online_;  // identical initial copy
    opt_ = nn::AdamState(online_.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2);
}

std::vector<double> DqnAgent::q_values(std::span<const double> state) {
    Matrix m(1, state.size());
    std::copy(state.begin(), state.end(), m.data.begin());
    online_.set_mode(Mode::inference);
    return online_.forward(m).data;
}

std::vector<double> DqnAgent::target_q_values(std::span<const double> state) {
    Matrix m(1, state.size());
    std::copy(state.begin(), state.end(), m.data.begin());
    target_.set_mode(Mode::inference);
    return target_.forward(m).data;
}

std::vector<double> DqnAgent::action_probabilities(std::span<const double> state) {
    std::vector<double> q = q_values(state);
    double maxq = -1e300;
    for (double& v : q) {
        v = std::clamp(v, -500.0, 500.0) / cfg_.temperature;
        maxq = std::max(maxq, v);
    }
    double z = 0.0;
    for (double& v : q) {
        v = std::exp(v - maxq);
        z += v;
    }
    for (double& v : q) v /= z;
    return q;
}

std::size_t DqnAgent::select_action(std::span<const double> state, PolicyMode mode) {
    if (mode == PolicyMode::greedy) {
        std::vector<double> q = q_values(state);
        return static_cast<std::size_t>(
            std::max_element(q.begin(), q.end()) - q.begin());
    }
    std::vector<double> p = action_probabilities(state);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng_);
    double acc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        acc += p[a];
        if (r <= acc) return a;
    }
    return p.size() - 1;
}

void DqnAgent::remember(Transition t) {
    if (t.action >= action_count())
        throw std::invalid_argument("remember: action out of range");
    replay_.push_back(std::move(t));
    while (replay_.size() > cfg_.replay_capacity) replay_.pop_front();  // FIFO evict
}

double dqn_target(const Transition& t, std::span<const double> q_online_next,
                  std::span<const double> q_target_next, double gamma) {
    if (t.terminal) return static_cast<double>(t.reward);
    std::size_t best = static_cast<std::size_t>(
        std::max_element(q_online_next.begin(), q_online_next.end()) -
        q_online_next.begin());
    return static_cast<double>(t.reward) + gamma * q_target_next[best];
}

double DqnAgent::train_step(std::span<const Transition> minibatch) {
    if (minibatch.empty()) throw std::invalid_argument("dqn_train_step: empty minibatch");
    const std::size_t n = minibatch.size();
    const std::size_t obs = minibatch[0].state.size();
    const std::size_t actions = action_count();

    Matrix states(n, obs);
    Matrix next_states(n, obs);
    for (std::size_t i = 0; i < n; ++i) {
        if (minibatch[i].state.size() != obs || minibatch[i].next_state.size() != obs)
            throw std::invalid_argument("dqn_train_step: transition width mismatch");
        std::copy_n(minibatch[i].state.begin(), obs, states.row(i).begin());
        std::copy_n(minibatch[i].next_state.begin(), obs, next_states.row(i).begin());
    }

    // Bootstrap targets before the training-mode pass.
    online_.set_mode(Mode::inference);
    Matrix q_online_next = online_.forward(next_states);
    target_.set_mode(Mode::inference);
    Matrix q_target_next = target_.forward(next_states);

    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i)
        targets[i] = dqn_target(minibatch[i], q_online_next.row(i),
                                q_target_next.row(i), cfg_.gamma);

    online_.set_mode(Mode::training);
    Matrix q = online_.forward(states);

    double loss = 0.0;
    Matrix dq(n, actions, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double err = q(i, minibatch[i].action) - targets[i];
        loss += err * err;
        dq(i, minibatch[i].action) = 2.0 * err / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    Network::Gradients g = online_.backward(dq);
    nn::adam_step_networks({&online_}, g.params, opt_);

    nn::soft_update(target_, online_, cfg_.target_tau);
    return loss;
}

std::optional<double> DqnAgent::train_from_replay() {
    if (replay_.size() < cfg_.warmup) return std::nullopt;
    std::uniform_int_distribution<std::size_t> u(0, replay_.size() - 1);
    std::vector<Transition> batch;
    batch.reserve(cfg_.minibatch);
    for (std::size_t i = 0; i < cfg_.minibatch; ++i) batch.push_back(replay_[u(rng_)]);
    return train_step(batch);
}

AttackSessionReport run_attack_session(DqnAgent& agent, EvasionEnv& env,
                                       const Matrix& bot_batch, std::size_t rounds) {
    if (bot_batch.rows == 0)
        throw std::invalid_argument("run_attack_session: empty bot batch");
    AttackSessionReport rep;
    rep.rounds = rounds;
    std::size_t total_len = 0;
    for (std::size_t round = 0; round < rounds; ++round) {
        std::span<const double> seed = bot_batch.row(round % bot_batch.rows);
        std::vector<double> state = env.reset(seed);
        std::size_t len = 0;
        int final_reward = 0;
        while (!env.done()) {
            std::size_t a = agent.select_action(state, PolicyMode::explore);
            EvasionEnv::StepResult sr = env.step(a);
            agent.remember({state, a, sr.reward, sr.next_state, sr.done});
            rep.steps += 1;
            len += 1;
            if (rep.steps % agent.config().train_every == 0)
                agent.train_from_replay();
            state = sr.next_state;
            final_reward = sr.reward;
        }
        total_len += len;
        if (final_reward == 1) {
            rep.evasions.push_back(env.state());
            rep.evasion_seeds.emplace_back(env.seed_sample());
        }
    }
    rep.evasion_count = rep.evasions.size();
    rep.mean_episode_length =
        rounds > 0 ? static_cast<double>(total_len) / static_cast<double>(rounds) : 0.0;
    return rep;
}

}  // namespace relevagan::drl
