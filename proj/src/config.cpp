#include "pongdqn/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace pongdqn {

void ExperimentConfig::validate() const {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw ConfigError("rho must lie in [-1, 1], got " + std::to_string(rho));
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be positive");
  if (frame_skip < 1) throw ConfigError("frame_skip must be positive");
  if (eval_games < 1) throw ConfigError("eval_games must be positive");
  if (heldout_states < 1) throw ConfigError("heldout_states must be positive");
  if (rally_frame_cap < 1) throw ConfigError("rally_frame_cap must be positive");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  env.validate();
  agent.validate();
  if (agent.arch.in_h != env.obs_height || agent.arch.in_w != env.obs_width)
    throw ConfigError("network input plane does not match the observation size");
}

std::filesystem::path ExperimentConfig::run_dir() const {
  const double r = rho == 0.0 ? 0.0 : rho;  // avoid a -0.00 directory
  char buf[64];
  std::snprintf(buf, sizeof buf, "run_rho%+.2f_seed%" PRIu64, r, seed);
  return std::filesystem::path(out_dir) / buf;
}

namespace {

enum class FieldKind { F64, I32, U64, SZ, STR };

struct FieldRef {
  const char* section;
  const char* key;
  FieldKind kind;
  void* p;
};

std::vector<FieldRef> field_table(ExperimentConfig& c) {
  using K = FieldKind;
  return {
      {"experiment", "rho", K::F64, &c.rho},
      {"experiment", "epochs", K::I32, &c.epochs},
      {"experiment", "steps_per_epoch", K::I32, &c.steps_per_epoch},
      {"experiment", "frame_skip", K::I32, &c.frame_skip},
      {"experiment", "seed", K::U64, &c.seed},
      {"experiment", "eval_games", K::I32, &c.eval_games},
      {"experiment", "heldout_states", K::I32, &c.heldout_states},
      {"experiment", "rally_frame_cap", K::U64, &c.rally_frame_cap},
      {"experiment", "out_dir", K::STR, &c.out_dir},
      {"env", "field_width", K::F64, &c.env.field_width},
      {"env", "field_height", K::F64, &c.env.field_height},
      {"env", "obs_width", K::I32, &c.env.obs_width},
      {"env", "obs_height", K::I32, &c.env.obs_height},
      {"env", "paddle_half_len", K::F64, &c.env.paddle_half_len},
      {"env", "paddle_speed", K::F64, &c.env.paddle_speed},
      {"env", "paddle_width", K::F64, &c.env.paddle_width},
      {"env", "paddle_inset", K::F64, &c.env.paddle_inset},
      {"env", "ball_half", K::F64, &c.env.ball_half},
      {"env", "ball_speed", K::F64, &c.env.ball_speed},
      {"env", "speedup_factor", K::F64, &c.env.speedup_factor},
      {"env", "speedup_every", K::I32, &c.env.speedup_every},
      {"env", "max_speed_factor", K::F64, &c.env.max_speed_factor},
      {"env", "max_deflect_deg", K::F64, &c.env.max_deflect_deg},
      {"env", "serve_angle_deg", K::F64, &c.env.serve_angle_deg},
      {"env", "serve_delay_frames", K::I32, &c.env.serve_delay_frames},
      {"env", "points_to_win", K::I32, &c.env.points_to_win},
      {"agent", "gamma", K::F64, &c.agent.gamma},
      {"agent", "buffer_capacity", K::SZ, &c.agent.buffer_capacity},
      {"agent", "batch_size", K::SZ, &c.agent.batch_size},
      {"agent", "target_sync_every", K::U64, &c.agent.target_sync_every},
      {"agent", "warmup", K::SZ, &c.agent.warmup},
      {"schedule", "epsilon_start", K::F64, &c.agent.schedule.start},
      {"schedule", "epsilon_end", K::F64, &c.agent.schedule.end},
      {"schedule", "anneal_steps", K::U64, &c.agent.schedule.anneal_steps},
      {"schedule", "eval_epsilon", K::F64, &c.agent.schedule.eval_epsilon},
      {"rmsprop", "lr", K::F64, &c.agent.rmsprop.lr},
      {"rmsprop", "decay", K::F64, &c.agent.rmsprop.decay},
      {"rmsprop", "eps", K::F64, &c.agent.rmsprop.eps},
  };
}

std::string format_value(const FieldRef& f) {
  char buf[64];
  switch (f.kind) {
    case FieldKind::F64: {
      auto [end, ec] =
          std::to_chars(buf, buf + sizeof buf, *static_cast<double*>(f.p));
      return std::string(buf, end);
    }
    case FieldKind::I32:
      return std::to_string(*static_cast<int*>(f.p));
    case FieldKind::U64:
      return std::to_string(*static_cast<std::uint64_t*>(f.p));
    case FieldKind::SZ:
      return std::to_string(*static_cast<std::size_t*>(f.p));
    case FieldKind::STR:
      return *static_cast<std::string*>(f.p);
  }
  return {};
}

void assign_value(const FieldRef& f, const std::string& raw, const std::string& where) {
  const char* b = raw.data();
  const char* e = raw.data() + raw.size();
  auto fail = [&] {
    throw ConfigError(where + ": invalid value '" + raw + "' for " + f.section + "." +
                      f.key);
  };
  if (raw.empty() && f.kind != FieldKind::STR) fail();
  switch (f.kind) {
    case FieldKind::F64: {
      double v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || p != e) fail();
      *static_cast<double*>(f.p) = v;
      break;
    }
    case FieldKind::I32: {
      int v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || p != e) fail();
      *static_cast<int*>(f.p) = v;
      break;
    }
    case FieldKind::U64: {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || p != e) fail();
      *static_cast<std::uint64_t*>(f.p) = v;
      break;
    }
    case FieldKind::SZ: {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || p != e) fail();
      *static_cast<std::size_t*>(f.p) = static_cast<std::size_t>(v);
      break;
    }
    case FieldKind::STR:
      *static_cast<std::string*>(f.p) = raw;
      break;
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  auto table = field_table(const_cast<ExperimentConfig&>(cfg));
  std::string out;
  const char* section = "";
  for (const FieldRef& f : table) {
    if (std::string(section) != f.section) {
      if (!out.empty()) out += '\n';
      out += '[';
      out += f.section;
      out += "]\n";
      section = f.section;
    }
    out += f.key;
    out += " = ";
    out += format_value(f);
    out += '\n';
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
  auto table = field_table(base);
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno);
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(where + ": malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError(where + ": key '" + key + "' appears before any section");
    bool found = false;
    for (const FieldRef& f : table) {
      if (section == f.section && key == f.key) {
        assign_value(f, value, where);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
  }
  return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const std::size_t dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key '" + dotted_key + "' must be section.key");
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  auto table = field_table(cfg);
  for (const FieldRef& f : table) {
    if (section == f.section && key == f.key) {
      assign_value(f, value, "override " + dotted_key);
      return;
    }
  }
  throw ConfigError("unknown key '" + dotted_key + "'");
}

void save_config_file(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << serialize_config(cfg);
  if (!out) throw ConfigError("failed writing config file " + path.string());
}

}  // namespace pongdqn
