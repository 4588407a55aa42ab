#include "pongdqn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "pongdqn/tensor.hpp"

namespace pongdqn {

SkipOutcome skip_frames(PongEnv& env, AgentAction left, AgentAction right,
                        const RewardMatrix& rewards, int frame_skip, ObsStack& stack) {
  SkipOutcome out;
  for (int i = 0; i < frame_skip; ++i) {
    const StepResult r = env.step(left, right, rewards);
    out.reward_left += r.reward_left;
    out.reward_right += r.reward_right;
    out.scored = out.scored || r.scored;
    ++out.frames;
    stack.push_frame(env.render());
    if (r.terminal) {
      out.terminal = true;
      break;
    }
  }
  return out;
}

namespace {

MetricStat ratio_stat(const std::vector<GameRecord>& games,
                      std::uint64_t (*num)(const EventCounters&),
                      std::uint64_t (*den)(const EventCounters&)) {
  MetricStat stat;
  std::uint64_t num_sum = 0, den_sum = 0;
  std::vector<double> ratios;
  ratios.reserve(games.size());
  for (const GameRecord& g : games) {
    num_sum += num(g.counters);
    den_sum += den(g.counters);
    if (den(g.counters) > 0)
      ratios.push_back(static_cast<double>(num(g.counters)) /
                       static_cast<double>(den(g.counters)));
  }
  if (den_sum == 0) {
    stat.low_sample = true;
    return stat;
  }
  stat.mean = static_cast<double>(num_sum) / static_cast<double>(den_sum);
  if (!ratios.empty()) {
    double m = 0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    double var = 0;
    for (double r : ratios) var += (r - m) * (r - m);
    stat.sd = std::sqrt(var / static_cast<double>(ratios.size()));
  }
  return stat;
}

std::uint64_t paddle_bounces(const EventCounters& c) { return c.paddle_bounces; }
std::uint64_t wall_bounces(const EventCounters& c) { return c.wall_bounces; }
std::uint64_t serve_frames(const EventCounters& c) { return c.serve_frames; }
std::uint64_t points(const EventCounters& c) { return c.total_points(); }

}  // namespace

BehavioralStats stats_from_counters(const std::vector<GameRecord>& games) {
  if (games.empty())
    throw ContractViolation("stats_from_counters: no games provided");
  BehavioralStats s;
  s.games = games.size();
  for (const GameRecord& g : games) {
    s.total_points += g.counters.total_points();
    s.any_capped = s.any_capped || g.capped;
  }
  s.paddle_bounces_per_point = ratio_stat(games, paddle_bounces, points);
  s.wall_bounces_per_paddle_bounce = ratio_stat(games, wall_bounces, paddle_bounces);
  s.serving_time_per_point = ratio_stat(games, serve_frames, points);
  return s;
}

EvalResult evaluate(const PolicyFn& left, const PolicyFn& right, const EnvConfig& env_cfg,
                    const RewardMatrix& rewards, const EvalConfig& eval_cfg,
                    const std::vector<std::uint64_t>& seeds) {
  eval_cfg.validate();
  env_cfg.validate();
  if (!left || !right) throw ContractViolation("evaluate: empty policy");
  if (seeds.size() != static_cast<std::size_t>(eval_cfg.n_games))
    throw ConfigError("evaluate: need one seed per game");
  std::unordered_set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size())
    throw ConfigError("evaluate: game seeds must be distinct");

  EvalResult result;
  result.games.reserve(seeds.size());
  for (int g = 0; g < eval_cfg.n_games; ++g) {
    PongEnv env(env_cfg, seeds[static_cast<std::size_t>(g)]);
    ObsStack stack(eval_cfg.frame_stack, env_cfg.obs_height, env_cfg.obs_width);
    const Observation first = env.render();
    for (int i = 0; i < eval_cfg.frame_stack; ++i) stack.push_frame(first);

    GameRecord rec;
    rec.game = g;
    std::uint64_t frames_since_point = 0;
    while (!env.terminal()) {
      if (frames_since_point >= eval_cfg.rally_frame_cap) {
        rec.capped = true;
        break;
      }
      const AgentAction al = left(stack);
      const AgentAction ar = right(stack);
      const SkipOutcome out =
          skip_frames(env, al, ar, rewards, eval_cfg.frame_skip, stack);
      frames_since_point =
          out.scored ? 0 : frames_since_point + static_cast<std::uint64_t>(out.frames);
    }
    rec.counters = env.state().counters;
    result.games.push_back(rec);
  }
  result.stats = stats_from_counters(result.games);
  return result;
}

PolicyFn greedy_policy(const Network<float>& net, double epsilon, Rng& rng) {
  if (!(epsilon >= 0 && epsilon <= 1))
    throw ContractViolation("greedy_policy: epsilon outside [0, 1]");
  return [&net, epsilon, &rng](const ObsStack& stack) {
    if (rng.uniform() < epsilon)
      return static_cast<AgentAction>(rng.uniform_int(kNumActions));
    Tensor<float> in(net.input_shape(1));
    stack.write_into(in.data());
    const Tensor<float> q = net.forward(in);
    return static_cast<AgentAction>(greedy_action(q.data()));
  };
}

EvalResult evaluate(const Network<float>& left, const Network<float>& right,
                    const EnvConfig& env_cfg, const RewardMatrix& rewards,
                    const EvalConfig& eval_cfg, std::uint64_t seed) {
  Rng left_rng(derive_seed(seed, 101));
  Rng right_rng(derive_seed(seed, 102));
  const PolicyFn lp = greedy_policy(left, eval_cfg.epsilon, left_rng);
  const PolicyFn rp = greedy_policy(right, eval_cfg.epsilon, right_rng);
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(eval_cfg.n_games));
  for (int g = 0; g < eval_cfg.n_games; ++g)
    seeds.push_back(derive_seed(seed, 200 + static_cast<std::uint64_t>(g)));
  return evaluate(lp, rp, env_cfg, rewards, eval_cfg, seeds);
}

void write_stats_header(std::ostream& os) {
  os << "rho,epoch,game,paddle_bounces,wall_bounces,points_left,points_right,"
        "serve_frames,capped\n";
}

void write_stats_rows(std::ostream& os, double rho, int epoch,
                      const std::vector<GameRecord>& games) {
  for (const GameRecord& g : games) {
    os << rho << ',' << epoch << ',' << g.game << ',' << g.counters.paddle_bounces
       << ',' << g.counters.wall_bounces << ',' << g.counters.points[0] << ','
       << g.counters.points[1] << ',' << g.counters.serve_frames << ','
       << (g.capped ? 1 : 0) << '\n';
  }
}

std::string format_stat(const MetricStat& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xc2\xb1 %.2f", s.mean, s.sd);
  return buf;
}

namespace {

// Pads on the left to a display width; the plus-minus sign is two bytes but
// one column.
std::string pad_left(const std::string& cell, std::size_t width) {
  std::size_t display = cell.size();
  for (char c : cell)
    if (static_cast<unsigned char>(c) == 0xc2) --display;
  if (display >= width) return cell;
  return std::string(width - display, ' ') + cell;
}

std::string flags_of(const BehavioralStats& s) {
  std::string f;
  auto add = [&f](const char* tag) {
    if (!f.empty()) f += ',';
    f += tag;
  };
  if (s.any_capped) add("capped");
  if (s.paddle_bounces_per_point.low_sample ||
      s.wall_bounces_per_paddle_bounce.low_sample ||
      s.serving_time_per_point.low_sample)
    add("low-sample");
  return f;
}

}  // namespace

std::string sweep_table(std::vector<std::pair<double, BehavioralStats>> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const char* headers[] = {"rho", "paddle_bounces_per_point",
                           "wall_bounces_per_paddle_bounce", "serving_time_per_point",
                           "points", "flags"};
  std::string out;
  std::size_t widths[6];
  for (int i = 0; i < 6; ++i) widths[i] = std::string(headers[i]).size();

  std::vector<std::array<std::string, 6>> rows;
  for (const auto& [rho, stats] : entries) {
    char rho_buf[32];
    std::snprintf(rho_buf, sizeof rho_buf, "%.2f", rho);
    std::array<std::string, 6> row = {
        rho_buf,
        format_stat(stats.paddle_bounces_per_point),
        format_stat(stats.wall_bounces_per_paddle_bounce),
        format_stat(stats.serving_time_per_point),
        std::to_string(stats.total_points),
        flags_of(stats)};
    for (int i = 0; i < 6; ++i) {
      std::size_t display = row[static_cast<std::size_t>(i)].size();
      for (char c : row[static_cast<std::size_t>(i)])
        if (static_cast<unsigned char>(c) == 0xc2) --display;
      widths[i] = std::max(widths[i], display);
    }
    rows.push_back(std::move(row));
  }

  for (int i = 0; i < 6; ++i) {
    if (i) out += "  ";
    out += pad_left(headers[i], widths[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (int i = 0; i < 6; ++i) {
      if (i) out += "  ";
      out += pad_left(row[static_cast<std::size_t>(i)], widths[i]);
    }
    out += '\n';
  }
  return out;
}

void write_sweep_csv(std::ostream& os,
                     const std::vector<std::pair<double, BehavioralStats>>& entries) {
  std::vector<std::pair<double, BehavioralStats>> sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  os << "rho,paddle_bounces_per_point_mean,paddle_bounces_per_point_sd,"
        "wall_bounces_per_paddle_bounce_mean,wall_bounces_per_paddle_bounce_sd,"
        "serving_time_per_point_mean,serving_time_per_point_sd,games,total_points,"
        "capped,low_sample\n";
  for (const auto& [rho, s] : sorted) {
    const bool low = s.paddle_bounces_per_point.low_sample ||
                     s.wall_bounces_per_paddle_bounce.low_sample ||
                     s.serving_time_per_point.low_sample;
    os << rho << ',' << s.paddle_bounces_per_point.mean << ','
       << s.paddle_bounces_per_point.sd << ',' << s.wall_bounces_per_paddle_bounce.mean
       << ',' << s.wall_bounces_per_paddle_bounce.sd << ','
       << s.serving_time_per_point.mean << ',' << s.serving_time_per_point.sd << ','
       << s.games << ',' << s.total_points << ',' << (s.any_capped ? 1 : 0) << ','
       << (low ? 1 : 0) << '\n';
  }
}

}  // namespace pongdqn
