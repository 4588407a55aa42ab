#include "pongdqn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pongdqn/snapshot.hpp"

namespace pongdqn {

namespace {

ExperimentConfig checked(ExperimentConfig cfg) {
  cfg.validate();
  return cfg;
}

void prime_stack(ObsStack& stack, const PongEnv& env, int frame_stack) {
  const Observation first = env.render();
  for (int i = 0; i < frame_stack; ++i) stack.push_frame(first);
}

void csv_f64(std::ostream& os, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, end - buf);
}

}  // namespace

HeldOutStates collect_heldout(const EnvConfig& env_cfg, std::uint64_t seed, int n,
                              int frame_skip, int frame_stack) {
  if (n < 1) throw ContractViolation("collect_heldout: need at least one state");
  if (frame_skip < 1 || frame_stack < 1)
    throw ContractViolation("collect_heldout: frame parameters must be positive");
  env_cfg.validate();

  const RewardMatrix rewards(0.0);
  Rng rng(derive_seed(seed, 7));
  std::uint64_t game = 0;
  PongEnv env(env_cfg, derive_seed(seed, 5000 + game));
  ObsStack stack(frame_stack, env_cfg.obs_height, env_cfg.obs_width);
  prime_stack(stack, env, frame_stack);

  constexpr int kSpacing = 7;  // windows between kept samples
  HeldOutStates out;
  out.stacks.reserve(static_cast<std::size_t>(n));
  std::uint64_t window = 0;
  while (out.stacks.size() < static_cast<std::size_t>(n)) {
    const auto left = static_cast<AgentAction>(rng.uniform_int(kNumActions));
    const auto right = static_cast<AgentAction>(rng.uniform_int(kNumActions));
    const SkipOutcome so = skip_frames(env, left, right, rewards, frame_skip, stack);
    ++window;
    if (window % kSpacing == 0) out.stacks.push_back(stack);
    if (so.terminal) {
      ++game;
      env.reset(derive_seed(seed, 5000 + game));
      prime_stack(stack, env, frame_stack);
    }
  }
  return out;
}

double monitor_q(const DqnAgent& agent, const HeldOutStates& states) {
  if (states.stacks.empty())
    throw ContractViolation("monitor_q: held-out set is empty");
  const Network<float>& net = agent.online();
  Tensor<float> in(net.input_shape(1));
  double sum = 0;
  for (const ObsStack& s : states.stacks) {
    s.write_into(in.data());
    const Tensor<float> q = net.forward(in);
    float best = q.data()[0];
    for (int a = 1; a < kQValues; ++a) best = std::max(best, q.data()[a]);
    if (!std::isfinite(best))
      throw DivergenceError("monitor_q: non-finite Q-value on held-out state");
    sum += best;
  }
  return sum / static_cast<double>(states.stacks.size());
}

FrameSkipResult run_frame_skip_step(PongEnv& env, DqnAgent& left, DqnAgent& right,
                                    const RewardMatrix& rewards, int frame_skip,
                                    ObsStack& stack, double eps_left, double eps_right) {
  if (env.terminal())
    throw ContractViolation("run_frame_skip_step: game already finished");
  if (frame_skip < 1) throw ContractViolation("frame_skip must be positive");

  FrameSkipResult res;
  const ObsStack pre = stack;
  const AgentAction al = left.select_action(stack, eps_left);
  const AgentAction ar = right.select_action(stack, eps_right);
  const SkipOutcome out = skip_frames(env, al, ar, rewards, frame_skip, stack);
  res.reward[0] = std::clamp(out.reward_left, -1.0, 1.0);
  res.reward[1] = std::clamp(out.reward_right, -1.0, 1.0);
  res.terminal = out.terminal;
  for (int i = 0; i < 2; ++i) {
    Transition& t = res.transitions[i];
    t.obs = pre;
    t.action = i == 0 ? al : ar;
    t.reward = static_cast<float>(res.reward[i]);
    t.next_obs = stack;
    t.terminal = out.terminal;
  }
  return res;
}

std::string snapshot_name(int epoch, int agent_idx) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "epoch_%d_agent%d.dqn", epoch, agent_idx);
  return buf;
}

Trainer::Trainer(const ExperimentConfig& cfg)
    : cfg_(checked(cfg)),
      rewards_(cfg.rho),
      heldout_(collect_heldout(cfg.env, derive_seed(cfg.seed, 2), cfg.heldout_states,
                               cfg.frame_skip, cfg.agent.arch.in_c)),
      env_(cfg.env, derive_seed(cfg.seed, 1000)),
      stack_(cfg.agent.arch.in_c, cfg.env.obs_height, cfg.env.obs_width),
      left_(cfg.agent, derive_seed(cfg.seed, 10)),
      right_(cfg.agent, derive_seed(cfg.seed, 11)),
      game_counter_(1) {
  prime_stack(stack_, env_, cfg_.agent.arch.in_c);
}

Trainer Trainer::resume(const ExperimentConfig& cfg, int epoch) {
  if (epoch < 1 || epoch > cfg.epochs)
    throw ConfigError("resume epoch out of range");
  Trainer t(cfg);
  const auto dir = cfg.run_dir();
  for (int i = 0; i < 2; ++i) {
    const auto path = dir / snapshot_name(epoch, i);
    if (!std::filesystem::exists(path))
      throw SnapshotError("missing snapshot " + path.string());
    t.agent_mut(i).load_online(load_snapshot_file<float>(path.string()));
  }
  t.next_epoch_ = epoch + 1;
  t.global_step_ = static_cast<std::uint64_t>(epoch) *
                   static_cast<std::uint64_t>(cfg.steps_per_epoch);
  return t;
}

void Trainer::new_game() {
  env_.reset(derive_seed(cfg_.seed, 1000 + game_counter_++));
  prime_stack(stack_, env_, cfg_.agent.arch.in_c);
}

EpochReport Trainer::run_epoch(int epoch) {
  EpochReport rep;
  rep.epoch = epoch;
  for (int s = 0; s < cfg_.steps_per_epoch; ++s) {
    const double eps = epsilon_at(cfg_.agent.schedule, global_step_, Mode::Train);
    FrameSkipResult r = run_frame_skip_step(env_, left_, right_, rewards_,
                                            cfg_.frame_skip, stack_, eps, eps);
    left_.store(std::move(r.transitions[0]));
    right_.store(std::move(r.transitions[1]));
    rep.train_reward[0] += r.reward[0];
    rep.train_reward[1] += r.reward[1];
    ++global_step_;
    if (global_step_ > cfg_.agent.warmup) {
      left_.train_step();
      right_.train_step();
    }
    if (r.terminal) new_game();
  }
  rep.avg_max_q = {monitor_q(left_, heldout_), monitor_q(right_, heldout_)};
  return rep;
}

std::vector<EpochReport> Trainer::run(
    const std::function<void(const EpochReport&)>& on_epoch) {
  const auto dir = cfg_.run_dir();
  std::filesystem::create_directories(dir);
  save_config_file(cfg_, dir / "run.cfg");

  const bool fresh = next_epoch_ == 1;
  const auto mode = std::ios::binary | (fresh ? std::ios::trunc : std::ios::app);
  std::ofstream reports(dir / "reports.csv", mode);
  std::ofstream stats(dir / "stats.csv", mode);
  if (!reports || !stats)
    throw SnapshotError("cannot open report files under " + dir.string());
  if (fresh) {
    write_reports_header(reports);
    write_stats_header(stats);
  }

  EvalConfig ec;
  ec.n_games = cfg_.eval_games;
  ec.epsilon = cfg_.agent.schedule.eval_epsilon;
  ec.rally_frame_cap = cfg_.rally_frame_cap;
  ec.frame_skip = cfg_.frame_skip;
  ec.frame_stack = cfg_.agent.arch.in_c;

  std::vector<EpochReport> out;
  for (int epoch = next_epoch_; epoch <= cfg_.epochs; ++epoch) {
    EpochReport rep;
    try {
      rep = run_epoch(epoch);
    } catch (const DivergenceError& err) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": " + err.what());
    }

    const EvalResult eval =
        evaluate(left_.online(), right_.online(), cfg_.env, rewards_, ec,
                 derive_seed(cfg_.seed, 3000 + static_cast<std::uint64_t>(epoch)));
    rep.eval = eval.stats;

    for (int i = 0; i < 2; ++i) {
      const std::string name = snapshot_name(epoch, i);
      save_snapshot_file(agent(i).online(), (dir / name).string());
      rep.snapshots[i] = name;
    }

    write_report_row(reports, rep);
    reports.flush();
    write_stats_rows(stats, cfg_.rho, epoch, eval.games);
    stats.flush();

    out.push_back(rep);
    next_epoch_ = epoch + 1;
    if (on_epoch) on_epoch(rep);
  }
  return out;
}

std::vector<EpochReport> run_experiment(
    const ExperimentConfig& cfg, const std::function<void(const EpochReport&)>& on_epoch) {
  Trainer t(cfg);
  return t.run(on_epoch);
}

void write_reports_header(std::ostream& os) {
  os << "epoch,avg_max_q_left,avg_max_q_right,train_reward_left,train_reward_right,"
        "paddle_bounces_per_point_mean,paddle_bounces_per_point_sd,"
        "wall_bounces_per_paddle_bounce_mean,wall_bounces_per_paddle_bounce_sd,"
        "serving_time_per_point_mean,serving_time_per_point_sd,"
        "eval_games,eval_points,capped,low_sample,snapshot_left,snapshot_right\n";
}

void write_report_row(std::ostream& os, const EpochReport& r) {
  const bool low = r.eval.paddle_bounces_per_point.low_sample ||
                   r.eval.wall_bounces_per_paddle_bounce.low_sample ||
                   r.eval.serving_time_per_point.low_sample;
  os << r.epoch << ',';
  csv_f64(os, r.avg_max_q[0]);
  os << ',';
  csv_f64(os, r.avg_max_q[1]);
  os << ',';
  csv_f64(os, r.train_reward[0]);
  os << ',';
  csv_f64(os, r.train_reward[1]);
  os << ',';
  csv_f64(os, r.eval.paddle_bounces_per_point.mean);
  os << ',';
  csv_f64(os, r.eval.paddle_bounces_per_point.sd);
  os << ',';
  csv_f64(os, r.eval.wall_bounces_per_paddle_bounce.mean);
  os << ',';
  csv_f64(os, r.eval.wall_bounces_per_paddle_bounce.sd);
  os << ',';
  csv_f64(os, r.eval.serving_time_per_point.mean);
  os << ',';
  csv_f64(os, r.eval.serving_time_per_point.sd);
  os << ',' << r.eval.games << ',' << r.eval.total_points << ','
     << (r.eval.any_capped ? 1 : 0) << ',' << (low ? 1 : 0) << ',' << r.snapshots[0]
     << ',' << r.snapshots[1] << '\n';
}

}  // namespace pongdqn
