#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "pongdqn/errors.hpp"
#include "pongdqn/rng.hpp"

namespace pongdqn {

// Action set shared by both players; indices are fixed everywhere
// (network outputs, replay records, bindings).
enum class AgentAction : std::uint8_t { Up = 0, Down = 1, Still = 2, Fire = 3 };
inline constexpr int kNumActions = 4;

enum class PlayerId : std::uint8_t { Left = 0, Right = 1 };

enum class Phase : std::uint8_t { InPlay = 0, AwaitingServe = 1 };

// Who may put the ball back into play. At 0-0 either player's Fire serves;
// after a point only the scorer's.
enum class ServeRight : std::uint8_t { Left = 0, Right = 1, Either = 2 };

// Per-point reward pair as a function of rho, the scorer's reward.
// rho = +1 is the classical zero-sum game, rho = -1 penalizes both players.
// The conceding player's reward is fixed at -1.
struct RewardMatrix {
  double rho = 1.0;
  static constexpr double concede = -1.0;

  explicit RewardMatrix(double rho_value) : rho(rho_value) {
    if (!(rho >= -1.0 && rho <= 1.0))
      throw ConfigError("rho must lie in [-1, 1], got " + std::to_string(rho));
  }

  // (left reward, right reward) for a scoring event.
  std::pair<double, double> on_score(PlayerId scorer) const {
    return scorer == PlayerId::Left ? std::make_pair(rho, concede)
                                    : std::make_pair(concede, rho);
  }
};

struct EventCounters {
  std::uint64_t paddle_bounces = 0;
  std::uint64_t wall_bounces = 0;
  std::array<std::uint64_t, 2> points{0, 0};
  std::uint64_t serve_frames = 0;

  std::uint64_t total_points() const { return points[0] + points[1]; }
  bool operator==(const EventCounters&) const = default;
};

struct EnvConfig {
  double field_width = 80.0;
  double field_height = 80.0;
  int obs_width = 32;
  int obs_height = 32;
  double paddle_half_len = 7.0;
  double paddle_speed = 2.0;
  double paddle_width = 2.0;
  double paddle_inset = 2.0;   // gap between field edge and paddle back face
  double ball_half = 1.0;      // ball is a square of side 2*ball_half
  double ball_speed = 1.5;     // base speed, units per frame
  double speedup_factor = 1.1; // applied every speedup_every rally bounces
  int speedup_every = 4;
  double max_speed_factor = 2.0;
  double max_deflect_deg = 60.0; // outgoing angle at the paddle tip
  double serve_angle_deg = 45.0; // serve angle drawn uniformly in +-this
  int serve_delay_frames = 4;    // respawn pause before Fire is honored
  int points_to_win = 21;

  void validate() const;

  // x coordinate of the ball center when touching a paddle face.
  double contact_plane(PlayerId side) const {
    const double front = paddle_inset + paddle_width + ball_half;
    return side == PlayerId::Left ? front : field_width - front;
  }
  double paddle_center_x(PlayerId side) const {
    const double c = paddle_inset + paddle_width / 2.0;
    return side == PlayerId::Left ? c : field_width - c;
  }

  bool operator==(const EnvConfig&) const = default;
};

struct GameState {
  double ball_x = 0, ball_y = 0;
  double ball_vx = 0, ball_vy = 0;
  double speed = 0;  // current rally speed; |(vx,vy)| == speed while in play
  std::array<double, 2> paddle_y{0, 0};
  std::array<int, 2> scores{0, 0};
  Phase phase = Phase::AwaitingServe;
  ServeRight server = ServeRight::Either;
  std::uint64_t frame_count = 0;
  std::uint64_t serve_phase_frames = 0; // frames spent in the current serve phase
  std::uint64_t rally_paddle_bounces = 0;
  EventCounters counters;
  Rng rng;

  bool operator==(const GameState&) const = default;
};

// Order-insensitive digest of the full state, for determinism checks.
std::uint64_t state_hash(const GameState& s);

// Grayscale frame, row 0 at the top of the field, values in {0, 1}.
struct Observation {
  int height = 0, width = 0;
  std::vector<float> px;

  float at(int row, int col) const { return px[static_cast<std::size_t>(row) * width + col]; }
  bool operator==(const Observation&) const = default;
};

struct StepResult {
  double reward_left = 0;
  double reward_right = 0;
  bool terminal = false;
  bool scored = false;
  PlayerId scorer = PlayerId::Left;  // valid when scored
};

// Fresh game: counters zeroed, scores 0-0, either player may serve.
GameState new_game(const EnvConfig& config, std::uint64_t seed);

// Pure function of (config, state): paddles always drawn, ball only in play.
Observation render(const EnvConfig& cfg, const GameState& s);

// Pong on a continuous field with first-class event counters.
// Deterministic: identical seed and action sequence reproduce the state
// trajectory bit for bit. Instances are independent and movable between
// threads; a single instance is not thread-safe.
class PongEnv {
 public:
  PongEnv(const EnvConfig& config, std::uint64_t seed);

  void reset(std::uint64_t seed);

  // Advance one frame. Throws ContractViolation on a finished game.
  StepResult step(AgentAction left, AgentAction right, const RewardMatrix& rewards);

  // Launch the ball if `who` currently holds the serve; otherwise a no-op.
  // Returns whether the serve happened.
  bool serve(PlayerId who);

  bool terminal() const;

  const EnvConfig& config() const { return cfg_; }
  const GameState& state() const { return state_; }
  void set_state(const GameState& s) { state_ = s; }

  Observation render() const { return pongdqn::render(cfg_, state_); }

 private:
  void score_point(PlayerId scorer);
  void deflect(PlayerId side);

  EnvConfig cfg_;
  GameState state_;
};

const char* action_name(AgentAction a);

}  // namespace pongdqn
