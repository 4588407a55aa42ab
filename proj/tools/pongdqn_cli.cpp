#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "pongdqn/cli.hpp"

using namespace pongdqn;

int main(int argc, char** argv) {
  CLI::App app{"two-player pixel pong with independently learning Q-agents"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  double rho = 0;
  int epochs = 0, steps = 0, games = 0;
  std::string out_dir;
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (sectioned key = value)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--rho", rho, "scorer reward in [-1, 1]");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--steps", steps, "decision steps per epoch");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--games", games, "evaluation games");
  };

  CLI::App* train = app.add_subcommand("train", "train a pair of agents for one rho");
  add_shared(train);

  std::string snap_left, snap_right;
  CLI::App* eval = app.add_subcommand("eval", "play games between two snapshots");
  eval->add_option("left", snap_left, "left agent snapshot")->required();
  eval->add_option("right", snap_right, "right agent snapshot")->required();
  add_shared(eval);

  std::vector<double> rhos;
  CLI::App* sweep = app.add_subcommand("sweep", "train across the rho grid");
  sweep->add_option("--rhos", rhos, "rho values (default: the nine-value grid)");
  add_shared(sweep);

  bool perturb = false;
  CLI::App* verify = app.add_subcommand("verify", "run the fast self-check suite");
  verify->add_flag("--perturb", perturb)->group("");  // negative-control hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (verify->parsed()) return cmd_verify(std::cout, std::cerr, perturb);

  RunConfig cfg;
  CLI::App* active = train->parsed() ? train : eval->parsed() ? eval : sweep;
  try {
    if (active->count("--config")) cfg = load_config_file(config_path);
    if (active->count("--seed")) cfg.seed = seed;
    if (active->count("--rho")) cfg.rho = rho;
    if (active->count("--epochs")) cfg.epochs = epochs;
    if (active->count("--steps")) cfg.steps_per_epoch = steps;
    if (active->count("--out")) cfg.out_dir = out_dir;
    if (active->count("--games")) cfg.eval_games = games;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (train->parsed()) return cmd_train(cfg, std::cout, std::cerr);
  if (eval->parsed()) return cmd_eval(snap_left, snap_right, cfg, std::cout, std::cerr);
  return cmd_sweep(cfg, rhos.empty() ? default_sweep_rhos() : rhos, std::cout,
                   std::cerr);
}
