#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pongdqn/agent.hpp"
#include "pongdqn/cli.hpp"
#include "pongdqn/config.hpp"
#include "pongdqn/env.hpp"
#include "pongdqn/metrics.hpp"
#include "pongdqn/snapshot.hpp"
#include "pongdqn/trainer.hpp"

namespace py = pybind11;
using namespace pongdqn;

namespace {

Architecture dense_arch(int in_c, int in_h, int in_w, int hidden) {
  Architecture a;
  a.in_c = in_c;
  a.in_h = in_h;
  a.in_w = in_w;
  a.layers = {DenseSpec{hidden}, ReluSpec{}, DenseSpec{kQValues}};
  return a;
}

EvalResult eval_snapshots(const std::string& left_path, const std::string& right_path,
                          const RunConfig& cfg) {
  const auto left = load_snapshot_file<float>(left_path);
  const auto right = load_snapshot_file<float>(right_path);
  if (!(left.arch() == right.arch()))
    throw SnapshotError("snapshot architectures differ");
  EvalConfig ec;
  ec.n_games = cfg.eval_games;
  ec.epsilon = cfg.agent.schedule.eval_epsilon;
  ec.rally_frame_cap = cfg.rally_frame_cap;
  ec.frame_skip = cfg.frame_skip;
  ec.frame_stack = left.arch().in_c;
  return evaluate(left, right, cfg.env, RewardMatrix(cfg.rho), ec, cfg.seed);
}

}  // namespace

PYBIND11_MODULE(_pongdqn, m) {
  m.doc() = "Two-paddle pixel pong with independent deep Q-learners";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<SnapshotError>(m, "SnapshotError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::enum_<AgentAction>(m, "AgentAction")
      .value("Up", AgentAction::Up)
      .value("Down", AgentAction::Down)
      .value("Still", AgentAction::Still)
      .value("Fire", AgentAction::Fire);
  py::enum_<PlayerId>(m, "PlayerId")
      .value("Left", PlayerId::Left)
      .value("Right", PlayerId::Right);
  m.attr("NUM_ACTIONS") = kNumActions;

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("field_width", &EnvConfig::field_width)
      .def_readwrite("field_height", &EnvConfig::field_height)
      .def_readwrite("obs_width", &EnvConfig::obs_width)
      .def_readwrite("obs_height", &EnvConfig::obs_height)
      .def_readwrite("paddle_half_len", &EnvConfig::paddle_half_len)
      .def_readwrite("paddle_speed", &EnvConfig::paddle_speed)
      .def_readwrite("paddle_width", &EnvConfig::paddle_width)
      .def_readwrite("paddle_inset", &EnvConfig::paddle_inset)
      .def_readwrite("ball_half", &EnvConfig::ball_half)
      .def_readwrite("ball_speed", &EnvConfig::ball_speed)
      .def_readwrite("speedup_factor", &EnvConfig::speedup_factor)
      .def_readwrite("speedup_every", &EnvConfig::speedup_every)
      .def_readwrite("max_speed_factor", &EnvConfig::max_speed_factor)
      .def_readwrite("max_deflect_deg", &EnvConfig::max_deflect_deg)
      .def_readwrite("serve_angle_deg", &EnvConfig::serve_angle_deg)
      .def_readwrite("serve_delay_frames", &EnvConfig::serve_delay_frames)
      .def_readwrite("points_to_win", &EnvConfig::points_to_win)
      .def("validate", &EnvConfig::validate);

  py::class_<RewardMatrix>(m, "RewardMatrix")
      .def(py::init<double>(), py::arg("rho"))
      .def_readonly("rho", &RewardMatrix::rho)
      .def("on_score", &RewardMatrix::on_score, py::arg("scorer"));

  py::class_<EventCounters>(m, "EventCounters")
      .def_readonly("paddle_bounces", &EventCounters::paddle_bounces)
      .def_readonly("wall_bounces", &EventCounters::wall_bounces)
      .def_readonly("points", &EventCounters::points)
      .def_readonly("serve_frames", &EventCounters::serve_frames)
      .def("total_points", &EventCounters::total_points);

  py::class_<Observation>(m, "Observation")
      .def_readonly("height", &Observation::height)
      .def_readonly("width", &Observation::width)
      .def_readonly("px", &Observation::px)
      .def("at", &Observation::at, py::arg("row"), py::arg("col"));

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("reward_left", &StepResult::reward_left)
      .def_readonly("reward_right", &StepResult::reward_right)
      .def_readonly("terminal", &StepResult::terminal)
      .def_readonly("scored", &StepResult::scored)
      .def_readonly("scorer", &StepResult::scorer);

  py::class_<PongEnv>(m, "PongEnv")
      .def(py::init<const EnvConfig&, std::uint64_t>(), py::arg("config"),
           py::arg("seed"))
      .def("reset", &PongEnv::reset, py::arg("seed"))
      .def("step", &PongEnv::step, py::arg("left"), py::arg("right"),
           py::arg("rewards"))
      .def("terminal", &PongEnv::terminal)
      .def("render", &PongEnv::render)
      .def_property_readonly(
          "counters", [](const PongEnv& e) { return e.state().counters; })
      .def_property_readonly(
          "scores", [](const PongEnv& e) { return e.state().scores; });

  py::class_<EpsilonSchedule>(m, "EpsilonSchedule")
      .def(py::init<>())
      .def_readwrite("start", &EpsilonSchedule::start)
      .def_readwrite("end", &EpsilonSchedule::end)
      .def_readwrite("anneal_steps", &EpsilonSchedule::anneal_steps)
      .def_readwrite("eval_epsilon", &EpsilonSchedule::eval_epsilon);

  py::class_<RmsPropConfig>(m, "RmsPropConfig")
      .def(py::init<>())
      .def_readwrite("lr", &RmsPropConfig::lr)
      .def_readwrite("decay", &RmsPropConfig::decay)
      .def_readwrite("eps", &RmsPropConfig::eps);

  py::class_<Architecture>(m, "Architecture")
      .def_static("desk_default", &Architecture::desk_default)
      .def_readonly("in_c", &Architecture::in_c)
      .def_readonly("in_h", &Architecture::in_h)
      .def_readonly("in_w", &Architecture::in_w);
  m.def("dense_arch", &dense_arch, py::arg("in_c"), py::arg("in_h"), py::arg("in_w"),
        py::arg("hidden"), "Small fully-connected architecture for quick runs");

  py::class_<AgentConfig>(m, "AgentConfig")
      .def(py::init<>())
      .def_readwrite("arch", &AgentConfig::arch)
      .def_readwrite("schedule", &AgentConfig::schedule)
      .def_readwrite("rmsprop", &AgentConfig::rmsprop)
      .def_readwrite("gamma", &AgentConfig::gamma)
      .def_readwrite("buffer_capacity", &AgentConfig::buffer_capacity)
      .def_readwrite("batch_size", &AgentConfig::batch_size)
      .def_readwrite("target_sync_every", &AgentConfig::target_sync_every)
      .def_readwrite("warmup", &AgentConfig::warmup);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("rho", &RunConfig::rho)
      .def_readwrite("epochs", &RunConfig::epochs)
      .def_readwrite("steps_per_epoch", &RunConfig::steps_per_epoch)
      .def_readwrite("frame_skip", &RunConfig::frame_skip)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("eval_games", &RunConfig::eval_games)
      .def_readwrite("heldout_states", &RunConfig::heldout_states)
      .def_readwrite("rally_frame_cap", &RunConfig::rally_frame_cap)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("env", &RunConfig::env)
      .def_readwrite("agent", &RunConfig::agent)
      .def("validate", &RunConfig::validate)
      .def("run_dir", [](const RunConfig& c) { return c.run_dir().string(); });

  m.def("load_config", &load_config_file, py::arg("path"),
        py::arg("base") = RunConfig{});
  m.def("save_config", &save_config_file, py::arg("config"), py::arg("path"));
  m.def("apply_override", &apply_override, py::arg("config"), py::arg("key"),
        py::arg("value"));

  py::class_<MetricStat>(m, "MetricStat")
      .def_readonly("mean", &MetricStat::mean)
      .def_readonly("sd", &MetricStat::sd)
      .def_readonly("low_sample", &MetricStat::low_sample);

  py::class_<BehavioralStats>(m, "BehavioralStats")
      .def_readonly("paddle_bounces_per_point", &BehavioralStats::paddle_bounces_per_point)
      .def_readonly("wall_bounces_per_paddle_bounce",
                    &BehavioralStats::wall_bounces_per_paddle_bounce)
      .def_readonly("serving_time_per_point", &BehavioralStats::serving_time_per_point)
      .def_readonly("games", &BehavioralStats::games)
      .def_readonly("total_points", &BehavioralStats::total_points)
      .def_readonly("any_capped", &BehavioralStats::any_capped);

  py::class_<GameRecord>(m, "GameRecord")
      .def_readonly("game", &GameRecord::game)
      .def_readonly("counters", &GameRecord::counters)
      .def_readonly("capped", &GameRecord::capped);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("stats", &EvalResult::stats)
      .def_readonly("games", &EvalResult::games);

  py::class_<EpochReport>(m, "EpochReport")
      .def_readonly("epoch", &EpochReport::epoch)
      .def_readonly("avg_max_q", &EpochReport::avg_max_q)
      .def_readonly("train_reward", &EpochReport::train_reward)
      .def_readonly("eval", &EpochReport::eval)
      .def_readonly("snapshots", &EpochReport::snapshots);

  m.def("train", &run_experiment, py::arg("config"),
        py::arg("on_epoch") = std::function<void(const EpochReport&)>{},
        "Run the full training loop; returns one report per epoch");
  m.def("evaluate", &eval_snapshots, py::arg("snapshot_left"),
        py::arg("snapshot_right"), py::arg("config"),
        "Play evaluation games between two saved policies");
  m.def("default_sweep_rhos", &default_sweep_rhos);
  m.def("verify", []() {
    std::ostringstream out, err;
    const int rc = cmd_verify(out, err);
    return py::make_tuple(rc == kExitOk, out.str());
  });
}
