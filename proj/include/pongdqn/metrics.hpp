#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "pongdqn/agent.hpp"
#include "pongdqn/env.hpp"
#include "pongdqn/replay.hpp"

namespace pongdqn {

// A policy maps the current observation stack to an action.
using PolicyFn = std::function<AgentAction(const ObsStack&)>;

struct EvalConfig {
  int n_games = 10;
  double epsilon = 0.01;  // exploration used by the network overload
  std::uint64_t rally_frame_cap = 20000;  // frames allowed per point
  int frame_skip = 4;
  int frame_stack = 4;

  void validate() const {
    if (n_games < 1) throw ConfigError("evaluation needs at least one game");
    if (!(epsilon >= 0 && epsilon <= 1))
      throw ConfigError("eval epsilon must lie in [0, 1]");
    if (rally_frame_cap < 1) throw ConfigError("rally frame cap must be positive");
    if (frame_skip < 1) throw ConfigError("frame skip must be positive");
    if (frame_stack < 1) throw ConfigError("frame stack must be positive");
  }
  bool operator==(const EvalConfig&) const = default;
};

struct GameRecord {
  int game = 0;
  EventCounters counters;
  bool capped = false;  // the per-point frame cap aborted this game
};

struct MetricStat {
  double mean = 0;
  double sd = 0;
  bool low_sample = false;  // denominator was empty; mean forced to 0

  bool operator==(const MetricStat&) const = default;
};

struct BehavioralStats {
  MetricStat paddle_bounces_per_point;
  MetricStat wall_bounces_per_paddle_bounce;
  MetricStat serving_time_per_point;  // frames
  std::size_t games = 0;
  std::uint64_t total_points = 0;
  bool any_capped = false;

  bool operator==(const BehavioralStats&) const = default;
};

struct EvalResult {
  BehavioralStats stats;
  std::vector<GameRecord> games;
};

// Steps up to frame_skip frames with both actions held fixed, accumulating
// rewards, pushing each rendered frame onto the shared stack. Stops early at
// game end.
struct SkipOutcome {
  double reward_left = 0;
  double reward_right = 0;
  bool terminal = false;
  bool scored = false;
  int frames = 0;
};
SkipOutcome skip_frames(PongEnv& env, AgentAction left, AgentAction right,
                        const RewardMatrix& rewards, int frame_skip, ObsStack& stack);

// Ratio-of-sums means with population sd across per-game ratios.
BehavioralStats stats_from_counters(const std::vector<GameRecord>& games);

// Plays n_games full games with frozen policies; the per-point frame cap
// converts never-ending rallies (or never-served points) into flagged data.
EvalResult evaluate(const PolicyFn& left, const PolicyFn& right, const EnvConfig& env_cfg,
                    const RewardMatrix& rewards, const EvalConfig& eval_cfg,
                    const std::vector<std::uint64_t>& seeds);

// Epsilon-greedy wrapper over a frozen network; rng must outlive the policy.
PolicyFn greedy_policy(const Network<float>& net, double epsilon, Rng& rng);

// Network convenience overload: derives per-game env seeds and per-agent
// exploration streams from one master seed.
EvalResult evaluate(const Network<float>& left, const Network<float>& right,
                    const EnvConfig& env_cfg, const RewardMatrix& rewards,
                    const EvalConfig& eval_cfg, std::uint64_t seed);

// Per-game rows: rho,epoch,game,paddle_bounces,wall_bounces,points_left,
// points_right,serve_frames,capped
void write_stats_header(std::ostream& os);
void write_stats_rows(std::ostream& os, double rho, int epoch,
                      const std::vector<GameRecord>& games);

// Fixed two-decimal "mean ± sd" cell.
std::string format_stat(const MetricStat& s);

// Text table over (rho, stats) entries, ordered by descending rho.
std::string sweep_table(std::vector<std::pair<double, BehavioralStats>> entries);

// Aggregate CSV mirroring the table columns.
void write_sweep_csv(std::ostream& os,
                     const std::vector<std::pair<double, BehavioralStats>>& entries);

}  // namespace pongdqn
