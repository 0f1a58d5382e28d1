#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "relevagan/data.hpp"
#include "relevagan/gan.hpp"
#include "relevagan/nn.hpp"

namespace relevagan::drl {

/// Read-only detector interface the attacker queries; returns the class-head
/// probability P(normal | sample).
using DetectorFn = std::function<double(std::span<const double>)>;

struct DrlConfig {
    std::size_t max_turns = 13;
    std::size_t rounds = 256;          // episodes per attack session
    double gamma = 0.99;
    double temperature = 1.0;          // Boltzmann tau
    double target_tau = 1e-3;          // soft target update
    std::size_t replay_capacity = 10000;
    std::size_t warmup = 64;
    std::size_t minibatch = 32;
    std::size_t train_every = 1;       // env steps between DQN updates
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::vector<std::size_t> hidden = {64, 128};
    std::uint64_t seed = 0;
};

/// MDP over one bot seed sample: actions add the per-feature delta quantum,
/// the episode ends on evasion (class head > 0.5) or after max_turns.
class EvasionEnv {
  public:
    EvasionEnv(data::DeltaVector deltas, data::ActionFeatureMap action_map,
               DetectorFn detector, std::size_t max_turns = 13);

    std::vector<double> reset(std::span<const double> seed_sample);

    struct StepResult {
        std::vector<double> next_state;
        int reward = 0;
        bool done = false;
    };
    StepResult step(std::size_t action);

    const std::vector<double>& state() const { return state_; }
    const std::vector<double>& seed_sample() const { return seed_; }
    std::size_t turn() const { return turn_; }
    bool done() const { return done_; }
    std::size_t action_count() const { return map_.indices.size(); }

  private:
    data::DeltaVector deltas_;
    data::ActionFeatureMap map_;
    DetectorFn detector_;
    std::size_t max_turns_;
    std::vector<double> seed_;
    std::vector<double> state_;
    std::size_t turn_ = 0;
    bool done_ = true;
    double state_cap_ = 0.0;  // upper guard: 1 + max_turns * max delta
};

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    int reward = 0;
    std::vector<double> next_state;
    bool terminal = false;
};

enum class PolicyMode { explore, greedy };

/// Double-DQN agent with Boltzmann exploration and a FIFO replay memory.
class DqnAgent {
  public:
    DqnAgent(std::size_t obs_dim, const DrlConfig& cfg);

    std::size_t select_action(std::span<const double> state, PolicyMode mode);

    /// Action probabilities under the Boltzmann policy (Q clipped to
    /// [-500, 500] before the softmax).
    std::vector<double> action_probabilities(std::span<const double> state);

    void remember(Transition t);
    std::size_t replay_size() const { return replay_.size(); }
    const std::deque<Transition>& replay() const { return replay_; }

    /// Double-DQN TD update on a minibatch; returns the mean squared TD
    /// error. Applies the soft target update afterwards.
    double train_step(std::span<const Transition> minibatch);

    /// Sample a minibatch from replay and train; no-op (returns nullopt)
    /// before warmup.
    std::optional<double> train_from_replay();

    std::vector<double> q_values(std::span<const double> state);
    std::vector<double> target_q_values(std::span<const double> state);

    nn::Network& online() { return online_; }
    nn::Network& target() { return target_; }
    const DrlConfig& config() const { return cfg_; }
    std::size_t action_count() const { return online_.output_width(); }

  private:
    DrlConfig cfg_;
    nn::Network online_;
    nn::Network target_;
    nn::AdamState opt_;
    std::deque<Transition> replay_;
    std::mt19937_64 rng_;
};

struct AttackSessionReport {
    std::size_t rounds = 0;
    std::vector<std::vector<double>> evasions;
    std::vector<std::vector<double>> evasion_seeds;  // seed sample per evasion
    std::size_t evasion_count = 0;
    std::size_t steps = 0;
    double mean_episode_length = 0.0;
};

/// One per-batch attack session: `rounds` episodes cycling through the bot
/// batch, exploring with the Boltzmann policy, training the DQN online.
/// Agent weights persist across sessions.
AttackSessionReport run_attack_session(DqnAgent& agent, EvasionEnv& env,
                                       const Matrix& bot_batch, std::size_t rounds);

/// Straight-line double-DQN target for one transition: r for terminal,
/// r + gamma * Q_target(s', argmax_a Q_online(s', a)) otherwise.
double dqn_target(const Transition& t, std::span<const double> q_online_next,
                  std::span<const double> q_target_next, double gamma);

}  // namespace relevagan::drl
