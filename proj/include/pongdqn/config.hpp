#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pongdqn/agent.hpp"
#include "pongdqn/env.hpp"

namespace pongdqn {

// Everything a run needs, with working defaults for every field. The same
// struct backs config files, flag overrides, and the run.cfg copy written
// next to the artifacts.
struct ExperimentConfig {
  double rho = 1.0;
  int epochs = 20;
  int steps_per_epoch = 25000;
  int frame_skip = 4;
  std::uint64_t seed = 1;
  int eval_games = 10;
  int heldout_states = 500;
  std::uint64_t rally_frame_cap = 20000;
  std::string out_dir = "runs";
  EnvConfig env;
  AgentConfig agent;

  void validate() const;

  // runs/run_rho+1.00_seed1 style per-run directory
  std::filesystem::path run_dir() const;

  bool operator==(const ExperimentConfig&) const = default;
};

using RunConfig = ExperimentConfig;

// Flat sectioned key=value text. Unknown keys and malformed values are
// errors naming the offending line.
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config_text(const std::string& text,
                                   ExperimentConfig base = ExperimentConfig{});
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  ExperimentConfig base = ExperimentConfig{});

// Applies one "section.key" override on top of a parsed config; flag
// precedence is implemented by applying these last.
void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

void save_config_file(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace pongdqn
