#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include "pongdqn/snapshot.hpp"
#include "pongdqn/trainer.hpp"

using namespace pongdqn;
namespace fs = std::filesystem;

namespace {

Architecture flat_arch() {
  Architecture a;
  a.in_c = 4;
  a.in_h = 32;
  a.in_w = 32;
  a.layers = {DenseSpec{8}, ReluSpec{}, DenseSpec{4}};
  return a;
}

AgentConfig tiny_agent_config() {
  AgentConfig a;
  a.arch = flat_arch();
  a.schedule = {1.0, 0.1, 400, 0.1};
  a.gamma = 0.95;
  a.buffer_capacity = 512;
  a.batch_size = 8;
  a.target_sync_every = 64;
  a.warmup = 32;
  return a;
}

ExperimentConfig tiny_experiment(const std::string& out_dir) {
  ExperimentConfig c;
  c.rho = -0.25;
  c.epochs = 2;
  c.steps_per_epoch = 150;
  c.seed = 77;
  c.eval_games = 2;
  c.heldout_states = 24;
  c.rally_frame_cap = 3000;
  c.out_dir = out_dir;
  c.agent = tiny_agent_config();
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pongdqn_" + name);
  fs::remove_all(p);
  return p;
}

void zero_params(Network<float>& net) {
  for (Tensor<float>* t : net.params()) t->fill(0.0f);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("held-out collection is sized and seeded") {
  EnvConfig ec;
  auto a = collect_heldout(ec, 42, 40);
  CHECK(a.stacks.size() == 40);
  auto b = collect_heldout(ec, 42, 40);
  REQUIRE(b.stacks.size() == a.stacks.size());
  for (std::size_t i = 0; i < a.stacks.size(); ++i) CHECK(a.stacks[i] == b.stacks[i]);

  auto c = collect_heldout(ec, 43, 40);
  bool all_equal = true;
  for (std::size_t i = 0; i < a.stacks.size(); ++i)
    all_equal = all_equal && a.stacks[i] == c.stacks[i];
  CHECK_FALSE(all_equal);

  CHECK(collect_heldout(ec, 1, 1).stacks.size() == 1);
  CHECK_THROWS_AS(collect_heldout(ec, 1, 0), ContractViolation);
}

TEST_CASE("q monitor averages the per-state maxima") {
  DqnAgent agent(tiny_agent_config(), 5);
  auto states = collect_heldout(EnvConfig{}, 9, 24);

  zero_params(agent.online());
  CHECK(monitor_q(agent, states) == 0.0);

  // constant head: zero weights, output bias (0.2, 0.1, 0, 0)
  Tensor<float>* bias = agent.online().params().back();
  REQUIRE(bias->numel() == 4);
  bias->data()[0] = 0.2f;
  bias->data()[1] = 0.1f;
  CHECK(monitor_q(agent, states) == static_cast<double>(0.2f));

  DqnAgent rnd(tiny_agent_config(), 6);
  Tensor<float> in(rnd.online().input_shape(1));
  double sum = 0;
  for (const ObsStack& s : states.stacks) {
    s.write_into(in.data());
    const Tensor<float> q = rnd.online().forward(in);
    float best = q.data()[0];
    for (int a = 1; a < kNumActions; ++a) best = std::max(best, q.data()[a]);
    sum += best;
  }
  CHECK(monitor_q(rnd, states) == sum / static_cast<double>(states.stacks.size()));

  bias->data()[2] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(monitor_q(agent, states), DivergenceError);

  CHECK_THROWS_AS(monitor_q(rnd, HeldOutStates{}), ContractViolation);
}

TEST_CASE("frame-skip step holds actions and routes rewards") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  DqnAgent left(tiny_agent_config(), 1), right(tiny_agent_config(), 2);
  zero_params(left.online());
  zero_params(right.online());

  PongEnv env(ec, 50), twin(ec, 50);
  ObsStack stack(4, ec.obs_height, ec.obs_width), twin_stack(4, ec.obs_height, ec.obs_width);
  const Observation first = env.render();
  for (int i = 0; i < 4; ++i) {
    stack.push_frame(first);
    twin_stack.push_frame(first);
  }
  const ObsStack pre = stack;

  // zero networks play greedily as action 0 (Up)
  auto r = run_frame_skip_step(env, left, right, rm, 4, stack, 0.0, 0.0);
  CHECK(r.reward[0] == 0.0);
  CHECK(r.reward[1] == 0.0);
  CHECK_FALSE(r.terminal);
  CHECK(r.transitions[0].action == AgentAction::Up);
  CHECK(r.transitions[1].action == AgentAction::Up);
  CHECK(r.transitions[0].obs == pre);
  CHECK(r.transitions[1].obs == pre);

  for (int i = 0; i < 4; ++i) {
    twin.step(AgentAction::Up, AgentAction::Up, rm);
    twin_stack.push_frame(twin.render());
  }
  CHECK(env.state() == twin.state());
  CHECK(r.transitions[0].next_obs == twin_stack);
  CHECK(stack == twin_stack);
}

TEST_CASE("a point inside the window lands as clamped reward and terminal flag") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  DqnAgent left(tiny_agent_config(), 1), right(tiny_agent_config(), 2);
  zero_params(left.online());
  zero_params(right.online());

  PongEnv env(ec, 3);
  GameState s = env.state();
  s.phase = Phase::InPlay;
  s.scores = {20, 0};
  s.ball_x = 78.5;
  s.ball_y = 40.0;
  s.ball_vx = 1.3;
  s.ball_vy = 0.0;
  s.speed = 1.3;
  env.set_state(s);

  ObsStack stack(4, ec.obs_height, ec.obs_width);
  const Observation first = env.render();
  for (int i = 0; i < 4; ++i) stack.push_frame(first);

  auto r = run_frame_skip_step(env, left, right, rm, 4, stack, 0.0, 0.0);
  CHECK(r.reward[0] == 1.0);
  CHECK(r.reward[1] == -1.0);
  CHECK(r.terminal);
  CHECK(r.transitions[0].reward == 1.0f);
  CHECK(r.transitions[1].reward == -1.0f);
  CHECK(r.transitions[0].terminal);
  CHECK(r.transitions[1].terminal);
  CHECK(env.terminal());
  CHECK_THROWS_AS(run_frame_skip_step(env, left, right, rm, 4, stack, 0.0, 0.0),
                  ContractViolation);
}

TEST_CASE("frame_skip=1 degenerates to per-frame control") {
  EnvConfig ec;
  RewardMatrix rm(0.0);
  DqnAgent left(tiny_agent_config(), 1), right(tiny_agent_config(), 2);
  zero_params(left.online());
  zero_params(right.online());

  PongEnv env(ec, 8), twin(ec, 8);
  ObsStack stack(4, ec.obs_height, ec.obs_width);
  const Observation first = env.render();
  for (int i = 0; i < 4; ++i) stack.push_frame(first);

  run_frame_skip_step(env, left, right, rm, 1, stack, 0.0, 0.0);
  twin.step(AgentAction::Up, AgentAction::Up, rm);
  CHECK(env.state() == twin.state());
}

TEST_CASE("agent rewards reconstruct from event counters") {
  EnvConfig ec;
  const double rho = -0.5;
  RewardMatrix rm(rho);
  DqnAgent left(tiny_agent_config(), 21), right(tiny_agent_config(), 22);

  PongEnv env(ec, 900);
  ObsStack stack(4, ec.obs_height, ec.obs_width);
  const Observation first = env.render();
  for (int i = 0; i < 4; ++i) stack.push_frame(first);

  double sum_left = 0, sum_right = 0;
  std::uint64_t pts_left = 0, pts_right = 0;
  std::uint64_t game = 0;
  EventCounters prev;
  for (int w = 0; w < 1500; ++w) {
    auto r = run_frame_skip_step(env, left, right, rm, 4, stack, 1.0, 1.0);
    sum_left += r.reward[0];
    sum_right += r.reward[1];
    const EventCounters& cur = env.state().counters;
    pts_left += cur.points[0] - prev.points[0];
    pts_right += cur.points[1] - prev.points[1];
    prev = cur;
    if (r.terminal) {
      env.reset(1234 + ++game);
      const Observation fresh = env.render();
      for (int i = 0; i < 4; ++i) stack.push_frame(fresh);
      prev = EventCounters{};
    }
  }
  REQUIRE(pts_left + pts_right >= 10);
  CHECK(sum_left == rho * static_cast<double>(pts_left) - static_cast<double>(pts_right));
  CHECK(sum_right == rho * static_cast<double>(pts_right) - static_cast<double>(pts_left));
}

TEST_CASE("experiment artifacts, reports, and bitwise reruns") {
  const fs::path dir = scratch_dir("trainer_smoke");
  ExperimentConfig cfg = tiny_experiment(dir.string());

  auto reports = run_experiment(cfg);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].epoch == 1);
  CHECK(reports[1].epoch == 2);
  for (const EpochReport& r : reports) {
    CHECK(std::isfinite(r.avg_max_q[0]));
    CHECK(std::isfinite(r.avg_max_q[1]));
    CHECK(r.eval.games == 2);
    CHECK(r.snapshots[0] == snapshot_name(r.epoch, 0));
  }

  const fs::path run = cfg.run_dir();
  CHECK(fs::exists(run / "run.cfg"));
  CHECK(fs::exists(run / "reports.csv"));
  CHECK(fs::exists(run / "stats.csv"));
  for (int e = 1; e <= 2; ++e)
    for (int i = 0; i < 2; ++i) CHECK(fs::exists(run / snapshot_name(e, i)));

  // the resolved copy reproduces the config (architecture lives in code)
  const ExperimentConfig reread = load_config_file(run / "run.cfg", cfg);
  CHECK(reread == cfg);

  const std::string reports_bytes = slurp(run / "reports.csv");
  const std::string stats_bytes = slurp(run / "stats.csv");
  CHECK(line_count(reports_bytes) == 3);   // header + one row per epoch
  CHECK(line_count(stats_bytes) == 5);     // header + 2 epochs x 2 games

  auto reports2 = run_experiment(cfg);
  CHECK(reports2 == reports);
  CHECK(slurp(run / "reports.csv") == reports_bytes);
  CHECK(slurp(run / "stats.csv") == stats_bytes);
  fs::remove_all(dir);
}

TEST_CASE("training starts after warmup and counts updates") {
  const fs::path dir = scratch_dir("trainer_warmup");
  ExperimentConfig cfg = tiny_experiment(dir.string());
  Trainer t(cfg);
  t.run();
  // one window per step; updates begin once the global step passes warmup
  const std::uint64_t total =
      static_cast<std::uint64_t>(cfg.epochs) * static_cast<std::uint64_t>(cfg.steps_per_epoch);
  CHECK(t.agent(0).train_steps() == total - cfg.agent.warmup);
  CHECK(t.agent(1).train_steps() == total - cfg.agent.warmup);
  CHECK(t.next_epoch() == cfg.epochs + 1);
  fs::remove_all(dir);
}

TEST_CASE("resume restores the nets and continues the epoch sequence") {
  const fs::path dir = scratch_dir("trainer_resume");
  ExperimentConfig first = tiny_experiment(dir.string());
  first.epochs = 1;
  run_experiment(first);

  ExperimentConfig cont = first;
  cont.epochs = 2;
  Trainer t = Trainer::resume(cont, 1);
  CHECK(t.next_epoch() == 2);
  const auto snap = load_snapshot_file<float>(
      (cont.run_dir() / snapshot_name(1, 0)).string());
  CHECK(t.agent(0).online() == snap);
  CHECK(t.agent(0).train_steps() == snap.train_steps());

  auto more = t.run();
  REQUIRE(more.size() == 1);
  CHECK(more[0].epoch == 2);
  CHECK(line_count(slurp(cont.run_dir() / "reports.csv")) == 3);

  CHECK_THROWS_AS(Trainer::resume(cont, 9), ConfigError);
  fs::remove_all(dir);

  ExperimentConfig missing = tiny_experiment(scratch_dir("trainer_missing").string());
  try {
    Trainer::resume(missing, 1);
    FAIL("expected a snapshot error");
  } catch (const SnapshotError& e) {
    CHECK(std::string(e.what()).find(snapshot_name(1, 0)) != std::string::npos);
  }
  fs::remove_all(scratch_dir("trainer_missing"));
}

TEST_CASE("config text round-trips and rejects junk") {
  ExperimentConfig cfg;
  cfg.rho = -0.75;
  cfg.seed = 12345;
  cfg.env.ball_speed = 1.75;
  cfg.agent.schedule.eval_epsilon = 0.02;
  const std::string text = serialize_config(cfg);
  CHECK(parse_config_text(text) == cfg);

  CHECK(parse_config_text("") == ExperimentConfig{});
  CHECK(parse_config_text("# only a comment\n\n") == ExperimentConfig{});

  auto has_line = [](const std::string& msg, const char* needle) {
    return msg.find(needle) != std::string::npos;
  };
  try {
    parse_config_text("[experiment]\nrho = 1\nwobble = 3\n");
    FAIL("expected unknown-key rejection");
  } catch (const ConfigError& e) {
    CHECK(has_line(e.what(), "line 3"));
    CHECK(has_line(e.what(), "experiment.wobble"));
  }
  try {
    parse_config_text("[env]\nball_speed = fast\n");
    FAIL("expected type rejection");
  } catch (const ConfigError& e) {
    CHECK(has_line(e.what(), "line 2"));
    CHECK(has_line(e.what(), "env.ball_speed"));
  }
  CHECK_THROWS_AS(parse_config_text("rho = 1\n"), ConfigError);         // no section
  CHECK_THROWS_AS(parse_config_text("[experiment\nrho = 1\n"), ConfigError);

  ExperimentConfig o;
  apply_override(o, "experiment.rho", "0.5");
  CHECK(o.rho == 0.5);
  apply_override(o, "schedule.eval_epsilon", "0.05");
  CHECK(o.agent.schedule.eval_epsilon == 0.05);
  CHECK_THROWS_AS(apply_override(o, "experiment.nope", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(o, "rho", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(o, "experiment.rho", "two"), ConfigError);

  ExperimentConfig bad;
  bad.rho = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("run directory name encodes rho and seed") {
  ExperimentConfig cfg;
  cfg.out_dir = "runs";
  cfg.rho = -0.25;
  cfg.seed = 9;
  CHECK(cfg.run_dir().filename().string() == "run_rho-0.25_seed9");
  cfg.rho = 1.0;
  CHECK(cfg.run_dir().filename().string() == "run_rho+1.00_seed9");
  cfg.rho = 0.0;
  CHECK(cfg.run_dir().filename().string() == "run_rho+0.00_seed9");
}

}  // TEST_SUITE
