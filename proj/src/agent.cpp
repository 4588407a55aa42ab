#include "pongdqn/agent.hpp"

#include <cmath>

namespace pongdqn {

double epsilon_at(const EpsilonSchedule& s, std::uint64_t step, Mode mode) {
  if (mode == Mode::Eval) return s.eval_epsilon;
  if (step >= s.anneal_steps) return s.end;
  const double frac = static_cast<double>(step) / static_cast<double>(s.anneal_steps);
  return s.start + (s.end - s.start) * frac;
}

AgentAction epsilon_greedy(const float* q, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon)
    return static_cast<AgentAction>(rng.uniform_int(kNumActions));
  return greedy_action(q);
}

DqnAgent::DqnAgent(const AgentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      online_(cfg.arch, derive_seed(seed, 0)),
      target_(online_),
      buffer_(cfg.buffer_capacity),
      opt_(cfg.rmsprop),
      rng_(derive_seed(seed, 1)) {
  cfg_.validate();
}

Tensor<float> DqnAgent::stack_batch(const std::vector<const ObsStack*>& stacks) const {
  const ObsStack& first = *stacks.front();
  Tensor<float> batch({stacks.size(), static_cast<std::size_t>(first.frames()),
                       static_cast<std::size_t>(first.height()),
                       static_cast<std::size_t>(first.width())});
  const std::size_t stride =
      static_cast<std::size_t>(first.frames()) * first.height() * first.width();
  for (std::size_t i = 0; i < stacks.size(); ++i)
    stacks[i]->write_into(batch.data() + i * stride);
  return batch;
}

AgentAction DqnAgent::select_action(const ObsStack& obs, double epsilon) {
  if (!(epsilon >= 0 && epsilon <= 1))
    throw ContractViolation("epsilon " + std::to_string(epsilon) + " outside [0, 1]");
  // Exploring steps skip the forward pass entirely; the draw order stays
  // fixed so trajectories are reproducible.
  if (rng_.uniform() < epsilon)
    return static_cast<AgentAction>(rng_.uniform_int(kNumActions));
  Tensor<float> batch = stack_batch({&obs});
  Tensor<float> q = online_.forward(batch);
  return greedy_action(q.data());
}

std::vector<float> DqnAgent::bellman_targets(
    const std::vector<const Transition*>& batch) const {
  if (batch.empty()) throw ContractViolation("bellman_targets needs a non-empty batch");
  std::vector<const ObsStack*> next;
  next.reserve(batch.size());
  for (const Transition* t : batch) next.push_back(&t->next_obs);
  Tensor<float> q = target_.forward(stack_batch(next));

  std::vector<float> y(batch.size());
  const float gamma = static_cast<float>(cfg_.gamma);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    float best = q[i * kNumActions];
    for (int a = 1; a < kNumActions; ++a)
      best = std::max(best, q[i * kNumActions + a]);
    if (!std::isfinite(best))
      throw DivergenceError("target network produced a non-finite Q-value");
    y[i] = batch[i]->terminal ? batch[i]->reward : batch[i]->reward + gamma * best;
  }
  return y;
}

DqnAgent::TrainResult DqnAgent::train_step(std::size_t batch_size) {
  if (batch_size < 1) throw ContractViolation("batch size must be positive");
  if (buffer_.size() < batch_size) return {};

  std::vector<const Transition*> batch(batch_size);
  for (auto& slot : batch) slot = &buffer_.sample(rng_);

  const std::vector<float> y = bellman_targets(batch);

  std::vector<const ObsStack*> obs;
  obs.reserve(batch_size);
  for (const Transition* t : batch) obs.push_back(&t->obs);
  ForwardCache<float> cache;
  Tensor<float> q = online_.forward(stack_batch(obs), cache);

  Tensor<float> dloss({batch_size, static_cast<std::size_t>(kNumActions)});
  double loss = 0;
  const float inv_b = 1.0f / static_cast<float>(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const int a = static_cast<int>(batch[i]->action);
    float dpred = 0;
    loss += huber(q[i * kNumActions + a] - y[i], dpred);
    dloss[i * kNumActions + a] = dpred * inv_b;
  }
  loss *= inv_b;
  if (!std::isfinite(loss)) throw DivergenceError("training loss is non-finite");

  Gradients<float> grads = online_.backward(dloss, cache);
  opt_.step(online_.params(), grads);

  ++step_;
  online_.set_train_steps(step_);
  if (step_ % cfg_.target_sync_every == 0) sync_target();
  return {true, loss};
}

void DqnAgent::load_online(Network<float> net) {
  if (!(net.arch() == cfg_.arch))
    throw SnapshotError("snapshot architecture does not match the agent configuration");
  step_ = net.train_steps();
  online_ = std::move(net);
  target_ = online_;
}

}  // namespace pongdqn
