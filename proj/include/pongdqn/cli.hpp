#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pongdqn/config.hpp"

namespace pongdqn {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitVerify = 3;

// The default sweep grid of rho values, descending.
std::vector<double> default_sweep_rhos();

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_eval(const std::string& snapshot_left, const std::string& snapshot_right,
             const RunConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& rhos, std::ostream& out,
              std::ostream& err);

// Fast self-check suite; perturb flips a deliberate fault into the gradient
// check to prove the suite can fail.
int cmd_verify(std::ostream& out, std::ostream& err, bool perturb = false);

}  // namespace pongdqn
