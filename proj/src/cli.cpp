#include "pongdqn/cli.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "pongdqn/snapshot.hpp"
#include "pongdqn/trainer.hpp"

namespace fs = std::filesystem;

namespace pongdqn {

std::vector<double> default_sweep_rhos() {
  return {1.0, 0.75, 0.5, 0.25, 0.0, -0.25, -0.5, -0.75, -1.0};
}

namespace {

void print_epoch_line(std::ostream& out, const ExperimentConfig& cfg,
                      const EpochReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch %3d/%d  q=(%+.3f, %+.3f)  reward=(%+.1f, %+.1f)  "
                "bounces/pt=%.2f  serve/pt=%.1f%s",
                r.epoch, cfg.epochs, r.avg_max_q[0], r.avg_max_q[1],
                r.train_reward[0], r.train_reward[1],
                r.eval.paddle_bounces_per_point.mean,
                r.eval.serving_time_per_point.mean,
                r.eval.any_capped ? "  [capped]" : "");
  out << buf << '\n';
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    out << "training rho=" << cfg.rho << " seed=" << cfg.seed << " -> "
        << cfg.run_dir().string() << '\n';
    const auto reports = run_experiment(
        cfg, [&](const EpochReport& r) { print_epoch_line(out, cfg, r); });
    out << "finished " << reports.size() << " epochs\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_eval(const std::string& snapshot_left, const std::string& snapshot_right,
             const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.env.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const auto left = load_snapshot_file<float>(snapshot_left);
    const auto right = load_snapshot_file<float>(snapshot_right);
    if (!(left.arch() == right.arch())) {
      err << "snapshot architectures differ between " << snapshot_left << " and "
          << snapshot_right << '\n';
      return kExitRuntime;
    }
    if (left.arch().in_h != cfg.env.obs_height || left.arch().in_w != cfg.env.obs_width) {
      err << "snapshot input plane does not match the observation size\n";
      return kExitRuntime;
    }

    EvalConfig ec;
    ec.n_games = cfg.eval_games;
    ec.epsilon = cfg.agent.schedule.eval_epsilon;
    ec.rally_frame_cap = cfg.rally_frame_cap;
    ec.frame_skip = cfg.frame_skip;
    ec.frame_stack = left.arch().in_c;
    const EvalResult res =
        evaluate(left, right, cfg.env, RewardMatrix(cfg.rho), ec, cfg.seed);

    out << sweep_table({{cfg.rho, res.stats}});
    out << res.stats.games << " games, " << res.stats.total_points << " points\n";

    fs::create_directories(cfg.out_dir);
    const fs::path stats_path = fs::path(cfg.out_dir) / "stats.csv";
    std::ofstream stats(stats_path, std::ios::binary | std::ios::trunc);
    if (!stats) {
      err << "cannot write " << stats_path.string() << '\n';
      return kExitRuntime;
    }
    write_stats_header(stats);
    write_stats_rows(stats, cfg.rho, 0, res.games);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "evaluation failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& rhos, std::ostream& out,
              std::ostream& err) {
  if (rhos.empty()) {
    err << "config error: empty rho list\n";
    return kExitConfig;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<std::pair<double, BehavioralStats>> entries;
  int failures = 0;
  for (double rho : rhos) {
    RunConfig c = cfg;
    c.rho = rho;
    try {
      c.validate();
      out << "sweep rho=" << rho << " -> " << c.run_dir().string() << '\n';
      const auto reports = run_experiment(
          c, [&](const EpochReport& r) { print_epoch_line(out, c, r); });
      entries.emplace_back(rho, reports.back().eval);
    } catch (const std::exception& e) {
      ++failures;
      err << "run rho=" << rho << " failed: " << e.what() << '\n';
    }
  }

  if (!entries.empty()) {
    out << sweep_table(entries);
    fs::create_directories(cfg.out_dir);
    const fs::path csv_path = fs::path(cfg.out_dir) / "sweep.csv";
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) {
      err << "cannot write " << csv_path.string() << '\n';
      return kExitRuntime;
    }
    write_sweep_csv(csv, entries);
  }
  return failures == 0 ? kExitOk : kExitRuntime;
}

namespace {

// ---- verify checks: small, self-contained oracles ----

// Central differences straddle a ReLU kink whenever a pre-activation sits
// within h of zero, so instances are re-rolled until every kink has margin.
bool relu_margin_ok(const Network<double>& net, const Tensor<double>& x, double margin) {
  ForwardCache<double> cache;
  net.forward(x, cache);
  const auto& layers = net.arch().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!std::holds_alternative<ReluSpec>(layers[i])) continue;
    const Tensor<double>& pre = cache.acts[i];
    for (std::size_t j = 0; j < pre.numel(); ++j)
      if (std::abs(pre.data()[j]) < margin) return false;
  }
  return true;
}

bool check_gradients(std::ostream& diag, bool perturb) {
  Architecture arch;
  arch.in_c = 2;
  arch.in_h = 6;
  arch.in_w = 6;
  arch.layers = {ConvSpec{3, 3, 3, 2}, ReluSpec{}, DenseSpec{6}, ReluSpec{},
                 DenseSpec{4}};

  Rng rng(7);
  Network<double> net(arch, 99);
  Tensor<double> x(net.input_shape(2));
  for (int attempt = 0;; ++attempt) {
    if (attempt > 50) {
      diag << "    no kink-free instance found\n";
      return false;
    }
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    if (relu_margin_ok(net, x, 1e-3)) break;
    net = Network<double>(arch, 100 + static_cast<std::uint64_t>(attempt));
  }
  Tensor<double> coeff({2, 4});
  for (std::size_t i = 0; i < coeff.numel(); ++i)
    coeff.data()[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;

  auto loss = [&] {
    const Tensor<double> y = net.forward(x);
    double l = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) l += coeff.data()[i] * y.data()[i];
    return l;
  };

  ForwardCache<double> cache;
  net.forward(x, cache);
  Gradients<double> grads = net.backward(coeff, cache);
  if (perturb) grads.tensors[0].data()[0] += 1e-3;

  const double h = 1e-5;
  double worst = 0;
  auto params = net.params();
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor<double>* p = params[t];
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double keep = p->data()[i];
      p->data()[i] = keep + h;
      const double up = loss();
      p->data()[i] = keep - h;
      const double dn = loss();
      p->data()[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = grads.tensors[t].data()[i];
      // the 1e-3 floor keeps finite-difference roundoff on near-zero
      // gradients from masquerading as relative error
      const double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  diag << "    max relative gradient error " << worst << '\n';
  return worst < 1e-4;
}

bool check_convolution(std::ostream& diag) {
  Rng rng(123);
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int in_c = 1 + static_cast<int>(rng.uniform_int(3));
    const int kh = 1 + static_cast<int>(rng.uniform_int(3));
    const int kw = 1 + static_cast<int>(rng.uniform_int(3));
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int in_h = kh + static_cast<int>(rng.uniform_int(5));
    const int in_w = kw + static_cast<int>(rng.uniform_int(5));
    const int filters = 1 + static_cast<int>(rng.uniform_int(4));

    ConvLayer<double> layer(in_c, in_h, in_w, ConvSpec{filters, kh, kw, stride}, rng);
    Tensor<double> in({2, static_cast<std::size_t>(in_c), static_cast<std::size_t>(in_h),
                       static_cast<std::size_t>(in_w)});
    for (std::size_t i = 0; i < in.numel(); ++i) in.data()[i] = rng.uniform(-2.0, 2.0);
    const Tensor<double> got = layer.forward(in);

    const int oh = (in_h - kh) / stride + 1;
    const int ow = (in_w - kw) / stride + 1;
    const double* w = layer.weights().data();
    const double* b = layer.bias().data();
    for (int n = 0; n < 2; ++n)
      for (int f = 0; f < filters; ++f)
        for (int y = 0; y < oh; ++y)
          for (int xo = 0; xo < ow; ++xo) {
            double acc = b[f];
            for (int c = 0; c < in_c; ++c)
              for (int dy = 0; dy < kh; ++dy)
                for (int dx = 0; dx < kw; ++dx) {
                  const int iy = y * stride + dy;
                  const int ix = xo * stride + dx;
                  acc += in.data()[((static_cast<std::size_t>(n) * in_c + c) * in_h + iy) *
                                       in_w +
                                   ix] *
                         w[((static_cast<std::size_t>(f) * in_c + c) * kh + dy) * kw + dx];
                }
            const double ref = got.data()[((static_cast<std::size_t>(n) * filters + f) * oh +
                                           y) *
                                              ow +
                                          xo];
            worst = std::max(worst, std::abs(acc - ref));
          }
  }
  diag << "    max convolution deviation " << worst << '\n';
  return worst < 1e-12;
}

bool check_replay(std::ostream& diag) {
  ReplayBuffer buf(50);
  for (int i = 0; i < 50; ++i) {
    ObsStack s(1, 1, 1);
    s.push_frame(Observation{1, 1, {1.0f}});
    Transition t;
    t.obs = s;
    t.next_obs = s;
    t.action = AgentAction::Still;
    t.reward = 0.0f;
    buf.store(std::move(t));
  }
  Rng rng(4242);
  std::array<int, 50> counts{};
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++counts[buf.sample_index(rng)];
  const double expected = draws / 50.0;
  double chi2 = 0;
  for (int c : counts) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  diag << "    replay chi-square " << chi2 << " (df 49)\n";
  return chi2 < 85.35;  // p = 0.001
}

bool check_reflection(std::ostream& diag) {
  EnvConfig ec;
  RewardMatrix rm(1.0);
  Rng rng(31);
  const double lo = ec.ball_half, hi = ec.field_height - ec.ball_half;
  int folds = 0;
  for (int trial = 0; trial < 200; ++trial) {
    PongEnv env(ec, 1);
    GameState s = env.state();
    s.phase = Phase::InPlay;
    const bool top = trial % 2 == 0;
    s.ball_x = 40.0;
    s.ball_y = top ? rng.uniform(lo, lo + 4.0) : rng.uniform(hi - 4.0, hi);
    s.ball_vy = top ? -rng.uniform(0.2, 5.0) : rng.uniform(0.2, 5.0);
    s.ball_vx = 0.4;
    s.speed = std::hypot(s.ball_vx, s.ball_vy);
    s.paddle_y = {40.0, 40.0};
    env.set_state(s);
    env.step(AgentAction::Still, AgentAction::Still, rm);

    const double unfolded = s.ball_y + s.ball_vy;
    double want = unfolded;
    if (unfolded < lo)
      want = 2.0 * lo - unfolded;
    else if (unfolded > hi)
      want = 2.0 * hi - unfolded;
    else
      continue;  // no wall contact drawn this trial
    ++folds;
    if (env.state().ball_y != want) {
      diag << "    reflection mismatch at y=" << s.ball_y << " vy=" << s.ball_vy << '\n';
      return false;
    }
    if (std::hypot(env.state().ball_vx, env.state().ball_vy) != s.speed) {
      diag << "    speed not conserved across fold\n";
      return false;
    }
  }
  diag << "    " << folds << " folds verified exactly\n";
  return folds > 50;
}

bool check_micro_mdp(std::ostream& diag) {
  // 6-state chain: Up moves right, Down moves left (floor 0), Still/Fire stay;
  // entering state 5 pays +1 and ends, every other move pays -0.1.
  constexpr int kStates = 6;
  constexpr double kGamma = 0.9;
  auto next_state = [](int s, int a) {
    if (a == 0) return s + 1;
    if (a == 1) return std::max(s - 1, 0);
    return s;
  };
  auto reward = [&](int s, int a) { return next_state(s, a) == 5 ? 1.0 : -0.1; };

  double q[kStates - 1][kNumActions] = {};
  for (int sweep = 0; sweep < 1000; ++sweep) {
    for (int s = 0; s < kStates - 1; ++s)
      for (int a = 0; a < kNumActions; ++a) {
        const int n = next_state(s, a);
        double v = 0;
        if (n != 5) {
          v = q[n][0];
          for (int b = 1; b < kNumActions; ++b) v = std::max(v, q[n][b]);
        }
        q[s][a] = reward(s, a) + kGamma * v;
      }
  }

  auto one_hot = [](int s) {
    ObsStack st(4, 1, kStates);
    Observation o;
    o.height = 1;
    o.width = kStates;
    o.px.assign(kStates, 0.0f);
    o.px[static_cast<std::size_t>(s)] = 1.0f;
    for (int i = 0; i < 4; ++i) st.push_frame(o);
    return st;
  };

  AgentConfig cfg;
  cfg.arch.in_c = 4;
  cfg.arch.in_h = 1;
  cfg.arch.in_w = kStates;
  cfg.arch.layers = {DenseSpec{64}, ReluSpec{}, DenseSpec{4}};
  cfg.gamma = kGamma;
  cfg.buffer_capacity = 1000;
  cfg.batch_size = 16;
  cfg.target_sync_every = 100;
  cfg.rmsprop.lr = 0.005;

  DqnAgent agent(cfg, 17);
  for (int copy = 0; copy < 5; ++copy)
    for (int s = 0; s < kStates - 1; ++s)
      for (int a = 0; a < kNumActions; ++a) {
        Transition t;
        t.obs = one_hot(s);
        t.action = static_cast<AgentAction>(a);
        t.reward = static_cast<float>(reward(s, a));
        t.next_obs = one_hot(next_state(s, a));
        t.terminal = next_state(s, a) == 5;
        agent.store(std::move(t));
      }
  for (int step = 0; step < 4000; ++step) agent.train_step();

  double worst = 0;
  Tensor<float> in(agent.online().input_shape(1));
  for (int s = 0; s < kStates - 1; ++s) {
    one_hot(s).write_into(in.data());
    const Tensor<float> pred = agent.online().forward(in);
    for (int a = 0; a < kNumActions; ++a)
      worst = std::max(worst, std::abs(static_cast<double>(pred.data()[a]) - q[s][a]));
  }
  diag << "    max |Q - Q*| " << worst << '\n';
  return worst < 0.1;
}

}  // namespace

int cmd_verify(std::ostream& out, std::ostream& err, bool perturb) {
  struct Check {
    const char* name;
    std::function<bool(std::ostream&)> fn;
  };
  const Check checks[] = {
      {"gradient finite-difference", [&](std::ostream& d) { return check_gradients(d, perturb); }},
      {"convolution reference", check_convolution},
      {"replay uniformity", check_replay},
      {"wall reflection", check_reflection},
      {"micro-mdp tabular match", check_micro_mdp},
  };
  int failed = 0;
  for (const Check& c : checks) {
    std::ostringstream diag;
    bool ok = false;
    try {
      ok = c.fn(diag);
    } catch (const std::exception& e) {
      diag << "    exception: " << e.what() << '\n';
    }
    out << (ok ? "[ ok ] " : "[FAIL] ") << c.name << '\n' << diag.str();
    if (!ok) ++failed;
  }
  if (failed) {
    err << failed << " check(s) failed\n";
    return kExitVerify;
  }
  out << "all checks passed\n";
  return kExitOk;
}

}  // namespace pongdqn
