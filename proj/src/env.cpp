#include "pongdqn/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pongdqn {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

int clamp_int(int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); }

void draw_rect(Observation& obs, const EnvConfig& cfg, double cx, double cy,
               double half_w, double half_h) {
  const double sx = cfg.obs_width / cfg.field_width;
  const double sy = cfg.obs_height / cfg.field_height;
  // Fixed pixel footprint per object so the lit-pixel count does not depend
  // on sub-pixel position.
  const int pw = std::max(1, static_cast<int>(std::lround(2.0 * half_w * sx)));
  const int ph = std::max(1, static_cast<int>(std::lround(2.0 * half_h * sy)));
  int c0 = static_cast<int>(std::lround(cx * sx - pw / 2.0));
  int r0 = static_cast<int>(std::lround((cfg.field_height - cy) * sy - ph / 2.0));
  c0 = clamp_int(c0, 0, cfg.obs_width - pw);
  r0 = clamp_int(r0, 0, cfg.obs_height - ph);
  for (int r = r0; r < r0 + ph; ++r)
    for (int c = c0; c < c0 + pw; ++c)
      obs.px[static_cast<std::size_t>(r) * cfg.obs_width + c] = 1.0f;
}

}  // namespace

void EnvConfig::validate() const {
  if (field_width <= 0 || field_height <= 0)
    throw ConfigError("field dimensions must be positive");
  if (obs_width <= 0 || obs_height <= 0)
    throw ConfigError("observation dimensions must be positive");
  if (paddle_half_len <= 0 || paddle_speed < 0 || paddle_width <= 0 || ball_half <= 0)
    throw ConfigError("paddle and ball dimensions must be positive");
  if (2.0 * paddle_half_len >= field_height)
    throw ConfigError("paddle length must be smaller than the field height");
  if (ball_speed <= 0 || speedup_factor < 1.0 || speedup_every < 1 || max_speed_factor < 1.0)
    throw ConfigError("ball speed parameters out of range");
  if (max_deflect_deg <= 0 || max_deflect_deg >= 90)
    throw ConfigError("max_deflect_deg must lie in (0, 90)");
  if (serve_angle_deg < 0 || serve_angle_deg >= 90)
    throw ConfigError("serve_angle_deg must lie in [0, 90)");
  if (serve_delay_frames < 0)
    throw ConfigError("serve_delay_frames must be non-negative");
  if (points_to_win < 1) throw ConfigError("points_to_win must be at least 1");
  if (contact_plane(PlayerId::Left) >= contact_plane(PlayerId::Right))
    throw ConfigError("field too narrow for the configured paddles and ball");
}

std::uint64_t state_hash(const GameState& s) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  auto mixd = [&](double d) {
    std::uint64_t b;
    std::memcpy(&b, &d, sizeof(b));
    mix(b);
  };
  mixd(s.ball_x);
  mixd(s.ball_y);
  mixd(s.ball_vx);
  mixd(s.ball_vy);
  mixd(s.speed);
  mixd(s.paddle_y[0]);
  mixd(s.paddle_y[1]);
  mix(static_cast<std::uint64_t>(s.scores[0]) << 32 | static_cast<std::uint32_t>(s.scores[1]));
  mix(static_cast<std::uint64_t>(s.phase) << 8 | static_cast<std::uint64_t>(s.server));
  mix(s.frame_count);
  mix(s.serve_phase_frames);
  mix(s.rally_paddle_bounces);
  mix(s.counters.paddle_bounces);
  mix(s.counters.wall_bounces);
  mix(s.counters.points[0]);
  mix(s.counters.points[1]);
  mix(s.counters.serve_frames);
  Rng probe = s.rng;
  mix(probe.next());
  return h;
}

GameState new_game(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  GameState s;
  s.paddle_y = {config.field_height / 2.0, config.field_height / 2.0};
  s.ball_x = config.field_width / 2.0;
  s.ball_y = config.field_height / 2.0;
  s.ball_vx = s.ball_vy = 0;
  s.speed = config.ball_speed;
  s.phase = Phase::AwaitingServe;
  s.server = ServeRight::Either;
  s.rng = Rng(seed);
  return s;
}

Observation render(const EnvConfig& cfg, const GameState& s) {
  Observation obs;
  obs.height = cfg.obs_height;
  obs.width = cfg.obs_width;
  obs.px.assign(static_cast<std::size_t>(cfg.obs_height) * cfg.obs_width, 0.0f);
  draw_rect(obs, cfg, cfg.paddle_center_x(PlayerId::Left), s.paddle_y[0],
            cfg.paddle_width / 2.0, cfg.paddle_half_len);
  draw_rect(obs, cfg, cfg.paddle_center_x(PlayerId::Right), s.paddle_y[1],
            cfg.paddle_width / 2.0, cfg.paddle_half_len);
  if (s.phase == Phase::InPlay)
    draw_rect(obs, cfg, s.ball_x, s.ball_y, cfg.ball_half, cfg.ball_half);
  return obs;
}

PongEnv::PongEnv(const EnvConfig& config, std::uint64_t seed) : cfg_(config) {
  state_ = new_game(cfg_, seed);
}

void PongEnv::reset(std::uint64_t seed) { state_ = new_game(cfg_, seed); }

bool PongEnv::terminal() const {
  return std::max(state_.scores[0], state_.scores[1]) >= cfg_.points_to_win;
}

bool PongEnv::serve(PlayerId who) {
  if (state_.phase != Phase::AwaitingServe) return false;
  // Respawn pause: Fire is ignored until the ball is back on the paddle.
  if (state_.serve_phase_frames <= static_cast<std::uint64_t>(cfg_.serve_delay_frames))
    return false;
  if (state_.server != ServeRight::Either &&
      state_.server != static_cast<ServeRight>(who))
    return false;
  const double ang = state_.rng.uniform(-deg2rad(cfg_.serve_angle_deg),
                                        deg2rad(cfg_.serve_angle_deg));
  const double dir = who == PlayerId::Left ? 1.0 : -1.0;
  state_.speed = cfg_.ball_speed;
  state_.ball_x = cfg_.contact_plane(who);
  state_.ball_y = state_.paddle_y[static_cast<int>(who)];
  state_.ball_vx = dir * state_.speed * std::cos(ang);
  state_.ball_vy = state_.speed * std::sin(ang);
  state_.phase = Phase::InPlay;
  state_.serve_phase_frames = 0;
  state_.rally_paddle_bounces = 0;
  return true;
}

void PongEnv::deflect(PlayerId side) {
  GameState& s = state_;
  const int i = static_cast<int>(side);
  const double reach = cfg_.paddle_half_len + cfg_.ball_half;
  const double offset = std::clamp((s.ball_y - s.paddle_y[i]) / reach, -1.0, 1.0);
  s.rally_paddle_bounces += 1;
  s.counters.paddle_bounces += 1;
  if (s.rally_paddle_bounces % static_cast<std::uint64_t>(cfg_.speedup_every) == 0)
    s.speed = std::min(s.speed * cfg_.speedup_factor,
                       cfg_.ball_speed * cfg_.max_speed_factor);
  const double ang = offset * deg2rad(cfg_.max_deflect_deg);
  const double dir = side == PlayerId::Left ? 1.0 : -1.0;
  s.ball_vx = dir * s.speed * std::cos(ang);
  s.ball_vy = s.speed * std::sin(ang);
  s.ball_x = cfg_.contact_plane(side);
}

void PongEnv::score_point(PlayerId scorer) {
  GameState& s = state_;
  const int i = static_cast<int>(scorer);
  s.scores[i] += 1;
  s.counters.points[i] += 1;
  s.phase = Phase::AwaitingServe;
  s.server = static_cast<ServeRight>(scorer);
  s.serve_phase_frames = 0;
  s.rally_paddle_bounces = 0;
  s.speed = cfg_.ball_speed;
  // Park the ball at the upcoming serve position; it is not rendered.
  s.ball_x = cfg_.contact_plane(scorer);
  s.ball_y = s.paddle_y[i];
  s.ball_vx = s.ball_vy = 0;
}

StepResult PongEnv::step(AgentAction left, AgentAction right,
                         const RewardMatrix& rewards) {
  if (terminal())
    throw ContractViolation("step called on a finished game");

  GameState& s = state_;
  s.frame_count += 1;

  const AgentAction acts[2] = {left, right};
  const double y_lo = cfg_.paddle_half_len;
  const double y_hi = cfg_.field_height - cfg_.paddle_half_len;
  for (int i = 0; i < 2; ++i) {
    if (acts[i] == AgentAction::Up)
      s.paddle_y[i] = std::min(s.paddle_y[i] + cfg_.paddle_speed, y_hi);
    else if (acts[i] == AgentAction::Down)
      s.paddle_y[i] = std::max(s.paddle_y[i] - cfg_.paddle_speed, y_lo);
  }

  StepResult result;

  if (s.phase == Phase::AwaitingServe) {
    s.counters.serve_frames += 1;
    s.serve_phase_frames += 1;
    if (left == AgentAction::Fire && serve(PlayerId::Left)) return result;
    if (right == AgentAction::Fire) serve(PlayerId::Right);
    return result;
  }

  const double prev_x = s.ball_x;
  s.ball_x += s.ball_vx;
  s.ball_y += s.ball_vy;

  const double wall_lo = cfg_.ball_half;
  const double wall_hi = cfg_.field_height - cfg_.ball_half;
  if (s.ball_y < wall_lo) {
    s.ball_y = 2.0 * wall_lo - s.ball_y;
    s.ball_vy = -s.ball_vy;
    s.counters.wall_bounces += 1;
  } else if (s.ball_y > wall_hi) {
    s.ball_y = 2.0 * wall_hi - s.ball_y;
    s.ball_vy = -s.ball_vy;
    s.counters.wall_bounces += 1;
  }

  const double plane_l = cfg_.contact_plane(PlayerId::Left);
  const double plane_r = cfg_.contact_plane(PlayerId::Right);
  const double reach = cfg_.paddle_half_len + cfg_.ball_half;
  if (s.ball_vx < 0 && prev_x > plane_l && s.ball_x <= plane_l) {
    if (std::abs(s.ball_y - s.paddle_y[0]) <= reach) deflect(PlayerId::Left);
  } else if (s.ball_vx > 0 && prev_x < plane_r && s.ball_x >= plane_r) {
    if (std::abs(s.ball_y - s.paddle_y[1]) <= reach) deflect(PlayerId::Right);
  }

  if (s.ball_x < cfg_.ball_half) {
    result.scored = true;
    result.scorer = PlayerId::Right;
  } else if (s.ball_x > cfg_.field_width - cfg_.ball_half) {
    result.scored = true;
    result.scorer = PlayerId::Left;
  }
  if (result.scored) {
    score_point(result.scorer);
    auto [rl, rr] = rewards.on_score(result.scorer);
    result.reward_left = rl;
    result.reward_right = rr;
    result.terminal = terminal();
  }
  return result;
}

const char* action_name(AgentAction a) {
  switch (a) {
    case AgentAction::Up: return "up";
    case AgentAction::Down: return "down";
    case AgentAction::Still: return "still";
    case AgentAction::Fire: return "fire";
  }
  return "?";
}

}  // namespace pongdqn
