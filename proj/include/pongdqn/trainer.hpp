#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pongdqn/config.hpp"
#include "pongdqn/metrics.hpp"

namespace pongdqn {

// Observation stacks set aside before training; Q-values are monitored on
// this fixed set across all epochs of a run.
struct HeldOutStates {
  std::vector<ObsStack> stacks;
};

struct EpochReport {
  int epoch = 0;  // 1-based, contiguous
  std::array<double, 2> avg_max_q{0, 0};
  std::array<double, 2> train_reward{0, 0};
  BehavioralStats eval;
  std::array<std::string, 2> snapshots;

  bool operator==(const EpochReport&) const = default;
};

// Uniform-random play, sampling stacks at evenly spaced decision windows so
// the set mixes rallies and serve phases. Deterministic per seed.
HeldOutStates collect_heldout(const EnvConfig& env_cfg, std::uint64_t seed, int n = 500,
                              int frame_skip = 4, int frame_stack = 4);

// Mean over the held-out set of the best online Q-value per state.
double monitor_q(const DqnAgent& agent, const HeldOutStates& states);

// One decision: both agents pick an action from the shared stack, the pair is
// held for frame_skip frames, rewards are summed then clamped to [-1, 1], and
// each agent gets its own transition over the pre/post stacks.
struct FrameSkipResult {
  std::array<double, 2> reward{0, 0};
  bool terminal = false;
  std::array<Transition, 2> transitions;
};
FrameSkipResult run_frame_skip_step(PongEnv& env, DqnAgent& left, DqnAgent& right,
                                    const RewardMatrix& rewards, int frame_skip,
                                    ObsStack& stack, double eps_left, double eps_right);

std::string snapshot_name(int epoch, int agent_idx);

// Per-run driver: the epoch loop with dual training, Q monitoring, evaluation
// and snapshotting. File layout under cfg.run_dir(): run.cfg, reports.csv,
// stats.csv, epoch_<k>_agent<i>.dqn.
class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  // Restores both agents from the epoch's snapshots; the continued run picks
  // up at epoch + 1. Replay buffers restart empty.
  static Trainer resume(const ExperimentConfig& cfg, int epoch);

  // Runs epochs next_epoch()..cfg.epochs, persisting artifacts incrementally;
  // on_epoch (optional) fires after each epoch's files are on disk.
  std::vector<EpochReport> run(
      const std::function<void(const EpochReport&)>& on_epoch = {});

  int next_epoch() const { return next_epoch_; }
  const ExperimentConfig& config() const { return cfg_; }
  const DqnAgent& agent(int i) const { return i == 0 ? left_ : right_; }
  DqnAgent& agent_mut(int i) { return i == 0 ? left_ : right_; }
  const HeldOutStates& heldout() const { return heldout_; }

 private:
  EpochReport run_epoch(int epoch);
  void new_game();

  ExperimentConfig cfg_;
  RewardMatrix rewards_;
  HeldOutStates heldout_;
  PongEnv env_;
  ObsStack stack_;
  DqnAgent left_;
  DqnAgent right_;
  std::uint64_t global_step_ = 0;
  std::uint64_t game_counter_ = 0;
  int next_epoch_ = 1;
};

std::vector<EpochReport> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const EpochReport&)>& on_epoch = {});

void write_reports_header(std::ostream& os);
void write_report_row(std::ostream& os, const EpochReport& r);

}  // namespace pongdqn
