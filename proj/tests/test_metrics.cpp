#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include "pongdqn/metrics.hpp"

using namespace pongdqn;

namespace {

PolicyFn constant_policy(AgentAction a) {
  return [a](const ObsStack&) { return a; };
}

GameRecord record(std::uint64_t paddle, std::uint64_t wall, std::uint64_t pts_left,
                  std::uint64_t pts_right, std::uint64_t serve, bool capped = false) {
  GameRecord g;
  g.counters.paddle_bounces = paddle;
  g.counters.wall_bounces = wall;
  g.counters.points = {pts_left, pts_right};
  g.counters.serve_frames = serve;
  g.capped = capped;
  return g;
}

// Frame-event tallies kept by the test itself, derived from state kinematics
// and step results rather than the environment's counters.
struct EventLog {
  std::uint64_t paddle = 0, wall = 0, serve = 0;
  std::array<std::uint64_t, 2> pts{0, 0};
};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ratio of sums over a single game") {
  auto s = stats_from_counters({record(42, 21, 11, 10, 84)});
  CHECK(s.paddle_bounces_per_point.mean == 2.0);
  CHECK(s.paddle_bounces_per_point.sd == 0.0);
  CHECK_FALSE(s.paddle_bounces_per_point.low_sample);
  CHECK(s.wall_bounces_per_paddle_bounce.mean == 0.5);
  CHECK(s.serving_time_per_point.mean == 4.0);
  CHECK(s.games == 1);
  CHECK(s.total_points == 21);
  CHECK_FALSE(s.any_capped);
}

TEST_CASE("mean pools counts, sd spreads across games") {
  auto s = stats_from_counters({record(10, 0, 3, 2, 0), record(20, 0, 1, 4, 0)});
  CHECK(s.paddle_bounces_per_point.mean == 3.0);
  CHECK(s.paddle_bounces_per_point.sd == 1.0);
  CHECK(s.total_points == 10);
}

TEST_CASE("zero paddle bounces degrade the wall ratio, not the rest") {
  auto s = stats_from_counters({record(0, 7, 2, 1, 12)});
  CHECK(s.wall_bounces_per_paddle_bounce.mean == 0.0);
  CHECK(s.wall_bounces_per_paddle_bounce.low_sample);
  CHECK(s.paddle_bounces_per_point.mean == 0.0);
  CHECK_FALSE(s.paddle_bounces_per_point.low_sample);
  CHECK(s.serving_time_per_point.mean == 4.0);
}

TEST_CASE("games without points drop out of the spread only") {
  auto s = stats_from_counters(
      {record(0, 0, 0, 0, 500, true), record(6, 0, 2, 3, 100)});
  CHECK(s.serving_time_per_point.mean == 120.0);
  CHECK(s.serving_time_per_point.sd == 0.0);
  CHECK_FALSE(s.serving_time_per_point.low_sample);
  CHECK(s.any_capped);
  CHECK(s.total_points == 5);
}

TEST_CASE("no games is a caller bug") {
  CHECK_THROWS_AS(stats_from_counters({}), ContractViolation);
}

TEST_CASE("skip_frames holds actions for the window and mirrors plain stepping") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  PongEnv a(ec, 9), b(ec, 9);
  ObsStack sa(4, ec.obs_height, ec.obs_width), sb(4, ec.obs_height, ec.obs_width);

  auto out = skip_frames(a, AgentAction::Fire, AgentAction::Still, rm, 4, sa);
  for (int i = 0; i < 4; ++i) {
    b.step(AgentAction::Fire, AgentAction::Still, rm);
    sb.push_frame(b.render());
  }
  CHECK(out.frames == 4);
  CHECK_FALSE(out.terminal);
  CHECK(out.reward_left == 0.0);
  CHECK(out.reward_right == 0.0);
  CHECK(a.state() == b.state());
  CHECK(sa == sb);
}

TEST_CASE("skip_frames stops at game end") {
  EnvConfig ec;
  RewardMatrix rm(0.5);
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
  auto out = skip_frames(env, AgentAction::Still, AgentAction::Still, rm, 4, stack);
  CHECK(out.terminal);
  CHECK(out.scored);
  CHECK(out.frames == 1);
  CHECK(out.reward_left == 0.5);
  CHECK(out.reward_right == -1.0);
  CHECK(env.terminal());
}

TEST_CASE("counters agree with an independent frame-event log") {
  const std::uint64_t seed = 777;
  EnvConfig ec;
  RewardMatrix rm(1.0);
  EvalConfig cfg;
  cfg.n_games = 1;

  auto res = evaluate(constant_policy(AgentAction::Fire),
                      constant_policy(AgentAction::Still), ec, rm, cfg, {seed});
  REQUIRE(res.games.size() == 1);

  // Replay the identical trajectory, logging events from kinematics: a wall
  // bounce is a predicted fold of the unfolded y, a paddle bounce a horizontal
  // reversal, points and serve frames come from step results and phase.
  PongEnv env(ec, seed);
  EventLog log;
  std::uint64_t frames_since = 0;
  bool capped = false;
  const double lo = ec.ball_half, hi = ec.field_height - ec.ball_half;
  while (!env.terminal()) {
    if (frames_since >= cfg.rally_frame_cap) {
      capped = true;
      break;
    }
    bool scored_window = false;
    std::uint64_t stepped = 0;
    for (int i = 0; i < cfg.frame_skip; ++i) {
      const GameState& pre = env.state();
      const bool in_play = pre.phase == Phase::InPlay;
      const double vx_pre = pre.ball_vx;
      const double y_unfolded = pre.ball_y + pre.ball_vy;
      if (pre.phase == Phase::AwaitingServe) ++log.serve;
      if (in_play && (y_unfolded < lo || y_unfolded > hi)) ++log.wall;
      const StepResult r = env.step(AgentAction::Fire, AgentAction::Still, rm);
      ++stepped;
      if (r.scored) {
        ++log.pts[r.scorer == PlayerId::Left ? 0 : 1];
        scored_window = true;
      } else if (in_play && env.state().phase == Phase::InPlay &&
                 std::signbit(env.state().ball_vx) != std::signbit(vx_pre)) {
        ++log.paddle;
      }
      if (r.terminal) break;
    }
    frames_since = scored_window ? 0 : frames_since + stepped;
  }

  const EventCounters& c = res.games[0].counters;
  CHECK(c.paddle_bounces == log.paddle);
  CHECK(c.wall_bounces == log.wall);
  CHECK(c.serve_frames == log.serve);
  CHECK(c.points[0] == log.pts[0]);
  CHECK(c.points[1] == log.pts[1]);
  CHECK(res.games[0].capped == capped);

  const std::uint64_t pts = log.pts[0] + log.pts[1];
  if (pts > 0) {
    CHECK(res.stats.paddle_bounces_per_point.mean ==
          static_cast<double>(log.paddle) / static_cast<double>(pts));
    CHECK(res.stats.serving_time_per_point.mean ==
          static_cast<double>(log.serve) / static_cast<double>(pts));
  }
  // the game either ran to the winning score or was cut by the cap
  const bool finished = c.points[0] == 21 || c.points[1] == 21;
  CHECK((finished || res.games[0].capped));
}

TEST_CASE("a rally that never starts hits the frame cap") {
  EnvConfig ec;
  RewardMatrix rm(-1.0);
  EvalConfig cfg;
  cfg.n_games = 2;
  cfg.rally_frame_cap = 500;

  auto still = constant_policy(AgentAction::Still);
  auto res = evaluate(still, still, ec, rm, cfg, {1, 2});
  for (const GameRecord& g : res.games) {
    CHECK(g.capped);
    CHECK(g.counters.total_points() == 0);
    CHECK(g.counters.serve_frames == 500);
    CHECK(g.counters.paddle_bounces == 0);
    CHECK(g.counters.wall_bounces == 0);
  }
  CHECK(res.stats.any_capped);
  CHECK(res.stats.paddle_bounces_per_point.low_sample);
  CHECK(res.stats.wall_bounces_per_paddle_bounce.low_sample);
  CHECK(res.stats.serving_time_per_point.low_sample);
  CHECK(res.stats.total_points == 0);
}

TEST_CASE("always-fire pairs serve as soon as the respawn pause ends") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  EvalConfig cfg;
  cfg.n_games = 2;

  auto fire = constant_policy(AgentAction::Fire);
  auto res = evaluate(fire, fire, ec, rm, cfg, {41, 42});
  CHECK_FALSE(res.stats.any_capped);
  CHECK(res.stats.serving_time_per_point.mean ==
        static_cast<double>(ec.serve_delay_frames + 1));
  CHECK(res.stats.serving_time_per_point.sd == 0.0);
  CHECK(res.stats.serving_time_per_point.mean >= cfg.frame_skip);
}

TEST_CASE("random play barely sustains rallies") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  EvalConfig cfg;
  cfg.n_games = 3;

  Rng lr(2024), rr(4048);
  PolicyFn left = [&lr](const ObsStack&) {
    return static_cast<AgentAction>(lr.uniform_int(kNumActions));
  };
  PolicyFn right = [&rr](const ObsStack&) {
    return static_cast<AgentAction>(rr.uniform_int(kNumActions));
  };
  auto res = evaluate(left, right, ec, rm, cfg, {11, 22, 33});
  CHECK_FALSE(res.stats.any_capped);
  CHECK(res.stats.total_points >= 63);  // three finished games
  CHECK(res.stats.paddle_bounces_per_point.mean < 0.5);
  CHECK(res.stats.serving_time_per_point.mean >= cfg.frame_skip);
}

TEST_CASE("serve wait matches the geometric closed form") {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  EvalConfig cfg;
  cfg.n_games = 6;

  // Each decision fires with probability eps/4, so the expected wait is
  // frame_skip / (eps/4) frames.
  const double eps = 0.25;
  Rng lr(71), rr(72);
  auto lazy = [eps](Rng& rng) {
    return PolicyFn([&rng, eps](const ObsStack&) {
      if (rng.uniform() < eps)
        return static_cast<AgentAction>(rng.uniform_int(kNumActions));
      return AgentAction::Still;
    });
  };
  auto res = evaluate(lazy(lr), lazy(rr), ec, rm, cfg, {1, 2, 3, 4, 5, 6});
  const double expected = cfg.frame_skip / (eps / kNumActions);
  CHECK(res.stats.total_points >= 100);
  CHECK(std::abs(res.stats.serving_time_per_point.mean - expected) < 0.3 * expected);
}

TEST_CASE("evaluate rejects malformed seed lists") {
  EnvConfig ec;
  RewardMatrix rm(0.0);
  EvalConfig cfg;
  cfg.n_games = 3;
  auto still = constant_policy(AgentAction::Still);
  CHECK_THROWS_AS(evaluate(still, still, ec, rm, cfg, {1, 2}), ConfigError);
  CHECK_THROWS_AS(evaluate(still, still, ec, rm, cfg, {1, 2, 2}), ConfigError);
  EvalConfig bad = cfg;
  bad.n_games = 0;
  CHECK_THROWS_AS(evaluate(still, still, ec, rm, bad, {}), ConfigError);
  bad = cfg;
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(evaluate(still, still, ec, rm, bad, {1, 2, 3}), ConfigError);
}

TEST_CASE("network evaluation is reproducible from the master seed") {
  Architecture arch;
  arch.in_c = 4;
  arch.in_h = 32;
  arch.in_w = 32;
  arch.layers = {DenseSpec{16}, ReluSpec{}, DenseSpec{4}};
  arch.validate();
  Network<float> left(arch, 5), right(arch, 6);

  EnvConfig ec;
  RewardMatrix rm(1.0);
  EvalConfig cfg;
  cfg.n_games = 2;
  cfg.epsilon = 0.05;

  auto r1 = evaluate(left, right, ec, rm, cfg, 99);
  auto r2 = evaluate(left, right, ec, rm, cfg, 99);
  CHECK(r1.stats == r2.stats);
  REQUIRE(r1.games.size() == r2.games.size());
  for (std::size_t i = 0; i < r1.games.size(); ++i) {
    CHECK(r1.games[i].counters == r2.games[i].counters);
    CHECK(r1.games[i].capped == r2.games[i].capped);
  }
  CHECK((r1.stats.total_points >= 21 || r1.stats.any_capped));
}

TEST_CASE("per-game csv rows") {
  std::ostringstream os;
  write_stats_header(os);
  GameRecord a = record(12, 30, 21, 4, 125);
  a.game = 0;
  GameRecord b = record(0, 0, 0, 0, 500, true);
  b.game = 1;
  write_stats_rows(os, -0.25, 3, {a, b});
  CHECK(os.str() ==
        "rho,epoch,game,paddle_bounces,wall_bounces,points_left,points_right,"
        "serve_frames,capped\n"
        "-0.25,3,0,12,30,21,4,125,0\n"
        "-0.25,3,1,0,0,0,0,500,1\n");
}

TEST_CASE("stat cells use fixed two-decimal form") {
  CHECK(format_stat({7.15, 1.01, false}) == "7.15 \xc2\xb1 1.01");
  CHECK(format_stat({654.664, 542.669, false}) == "654.66 \xc2\xb1 542.67");
  CHECK(format_stat({0.0, 0.0, true}) == "0.00 \xc2\xb1 0.00");
}

TEST_CASE("sweep table orders rows by descending rho and marks caps") {
  BehavioralStats sa;
  sa.paddle_bounces_per_point = {7.15, 1.01, false};
  sa.wall_bounces_per_paddle_bounce = {0.87, 0.08, false};
  sa.serving_time_per_point = {113.87, 40.30, false};
  sa.games = 10;
  sa.total_points = 210;

  BehavioralStats sb;
  sb.paddle_bounces_per_point = {654.66, 542.67, false};
  sb.wall_bounces_per_paddle_bounce = {0.01, 0.0, false};
  sb.serving_time_per_point = {393.34, 138.63, false};
  sb.games = 10;
  sb.total_points = 188;
  sb.any_capped = true;

  const std::string table = sweep_table({{-1.0, sb}, {1.0, sa}});
  std::vector<std::string> lines;
  std::istringstream is(table);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].find("rho") != std::string::npos);
  CHECK(lines[0].find("paddle_bounces_per_point") != std::string::npos);
  CHECK(lines[1].find("-1.00") == std::string::npos);
  CHECK(lines[1].find("1.00") != std::string::npos);
  CHECK(lines[1].find("7.15 \xc2\xb1 1.01") != std::string::npos);
  CHECK(lines[1].find("capped") == std::string::npos);
  CHECK(lines[2].find("-1.00") != std::string::npos);
  CHECK(lines[2].find("654.66 \xc2\xb1 542.67") != std::string::npos);
  CHECK(lines[2].find("capped") != std::string::npos);

  std::ostringstream csv;
  write_sweep_csv(csv, {{-1.0, sb}, {1.0, sa}});
  const std::string text = csv.str();
  CHECK(text.find("rho,paddle_bounces_per_point_mean") == 0);
  CHECK(text.find("\n1,7.15,1.01,") != std::string::npos);
  CHECK(text.find("\n-1,654.66,542.67,") != std::string::npos);
  CHECK(text.find("1,0\n") != std::string::npos);  // capped flag on the rho=-1 row
}

}  // TEST_SUITE
