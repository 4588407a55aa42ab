#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pongdqn/network.hpp"
#include "pongdqn/optimizer.hpp"
#include "pongdqn/replay.hpp"

namespace pongdqn {

static_assert(kQValues == kNumActions, "network head must cover the action set");

enum class Mode { Train, Eval };

// Exploration rate: linear anneal from start to end over anneal_steps during
// training, a fixed small value during evaluation.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::uint64_t anneal_steps = 100000;
  double eval_epsilon = 0.01;

  void validate() const {
    if (!(start >= 0 && start <= 1) || !(end >= 0 && end <= 1) ||
        !(eval_epsilon >= 0 && eval_epsilon <= 1))
      throw ConfigError("epsilon values must lie in [0, 1]");
    if (end > start) throw ConfigError("epsilon schedule must be non-increasing");
    if (anneal_steps < 1) throw ConfigError("anneal_steps must be positive");
  }
  bool operator==(const EpsilonSchedule&) const = default;
};

double epsilon_at(const EpsilonSchedule& s, std::uint64_t step, Mode mode);

struct AgentConfig {
  Architecture arch = Architecture::desk_default();
  EpsilonSchedule schedule;
  RmsPropConfig rmsprop;
  double gamma = 0.99;
  std::size_t buffer_capacity = 50000;
  std::size_t batch_size = 32;
  std::uint64_t target_sync_every = 1000;
  std::size_t warmup = 5000;  // transitions required before training starts

  void validate() const {
    arch.validate();
    schedule.validate();
    rmsprop.validate();
    if (!(gamma >= 0 && gamma < 1)) throw ConfigError("gamma must lie in [0, 1)");
    if (buffer_capacity < 1) throw ConfigError("replay capacity must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (batch_size > buffer_capacity)
      throw ConfigError("batch size exceeds replay capacity");
    if (target_sync_every < 1) throw ConfigError("target_sync_every must be positive");
  }
  bool operator==(const AgentConfig&) const = default;
};

// Argmax over the four Q-values, ties broken by lowest action index.
inline AgentAction greedy_action(const float* q) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (q[a] > q[best]) best = a;
  return static_cast<AgentAction>(best);
}

// Shared epsilon-greedy rule: one uniform draw decides exploration; only an
// exploring step consumes a second draw.
AgentAction epsilon_greedy(const float* q, double epsilon, Rng& rng);

// One independent Q-learning agent: online and target networks, replay
// buffer, and its own RNG stream.
class DqnAgent {
 public:
  DqnAgent(const AgentConfig& cfg, std::uint64_t seed);

  AgentAction select_action(const ObsStack& obs, double epsilon);
  void store(Transition t) { buffer_.store(std::move(t)); }

  // y_i = r_i for terminal transitions, else r_i + gamma * max_a Q_target.
  std::vector<float> bellman_targets(const std::vector<const Transition*>& batch) const;

  struct TrainResult {
    bool trained = false;
    double loss = 0;
  };
  // One optimizer update over a uniform sample. Not-ready (untrained result)
  // while the buffer holds fewer than batch_size transitions.
  TrainResult train_step(std::size_t batch_size);
  TrainResult train_step() { return train_step(cfg_.batch_size); }

  void sync_target() { target_ = online_; }

  const AgentConfig& config() const { return cfg_; }
  Network<float>& online() { return online_; }
  const Network<float>& online() const { return online_; }
  Network<float>& target() { return target_; }
  const Network<float>& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  RmsProp<float>& optimizer() { return opt_; }
  std::uint64_t train_steps() const { return step_; }
  Rng& rng() { return rng_; }

  // Restores the online/target parameters from a snapshot (resume path).
  void load_online(Network<float> net);

 private:
  Tensor<float> stack_batch(const std::vector<const ObsStack*>& stacks) const;

  AgentConfig cfg_;
  Network<float> online_;
  Network<float> target_;
  ReplayBuffer buffer_;
  RmsProp<float> opt_;
  Rng rng_;
  std::uint64_t step_ = 0;
};

}  // namespace pongdqn
