// Python surface: numpy-facing wrappers over the tensor/style ops, the
// environments, and the training/evaluation pipeline.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "sar/agents.hpp"
#include "sar/common.hpp"
#include "sar/config.hpp"
#include "sar/envs.hpp"
#include "sar/harness.hpp"
#include "sar/report.hpp"
#include "sar/style.hpp"
#include "sar/tensor.hpp"

namespace py = pybind11;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

sar::Tensor to_tensor(const DArray& a) {
  sar::Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = a.shape(i);
  std::vector<double> data(a.data(), a.data() + a.size());
  return sar::Tensor::from_data(shape, std::move(data));
}

py::array_t<double> from_tensor(const sar::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::copy(t.values().begin(), t.values().end(), a.mutable_data());
  return a;
}

sar::StyleStats to_stats(const DArray& beta, const DArray& gamma) {
  return sar::StyleStats{to_tensor(beta), to_tensor(gamma)};
}

// Environment handle with numpy observations.
class PyEnv {
 public:
  explicit PyEnv(const std::string& name) : env_(sar::make_env(name)) {}

  py::array_t<double> reset(uint64_t layout_seed, int64_t style_id) {
    sar::NoGradGuard ng;
    return from_tensor(env_->reset(layout_seed, style_id));
  }

  py::tuple step_discrete(int64_t action) {
    sar::NoGradGuard ng;
    sar::StepResult r = env_->step_discrete(action);
    return py::make_tuple(from_tensor(r.obs), r.reward, r.done);
  }

  py::tuple step_continuous(const std::vector<double>& action) {
    sar::NoGradGuard ng;
    sar::StepResult r = env_->step_continuous(action);
    return py::make_tuple(from_tensor(r.obs), r.reward, r.done);
  }

  std::vector<int64_t> obs_shape() const { return env_->obs_shape(); }
  bool discrete() const { return env_->discrete(); }
  int64_t action_count() const { return env_->action_count(); }
  int64_t action_dim() const { return env_->action_dim(); }
  int64_t frame_stack() const { return env_->frame_stack(); }
  bool episode_done() const { return env_->episode_done(); }
  int64_t steps_taken() const { return env_->steps_taken(); }

 private:
  std::unique_ptr<sar::Env> env_;
};

py::dict eval_dict(const sar::EvalResult& r) {
  py::dict d;
  d["pool"] = r.pool;
  d["mean"] = r.mean;
  d["std"] = r.stddev;
  d["episodes"] = r.episodes;
  d["seed"] = r.seed;
  d["returns"] = r.returns;
  d["layout_seeds"] = r.layout_seeds;
  d["style_ids"] = r.style_ids;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "style-agnostic reinforcement learning core";
  m.attr("__version__") = "0.1.0";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sar::ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const sar::ArtifactError& e) {
      PyErr_SetString(PyExc_FileNotFoundError, e.what());
    } catch (const sar::MetricError& e) {
      PyErr_SetString(PyExc_KeyError, e.what());
    }
  });

  // ---- feature-statistics ops ----
  m.def(
      "channel_stats",
      [](const DArray& z) {
        sar::NoGradGuard ng;
        auto [mu, sigma] = sar::channel_stats(to_tensor(z));
        return py::make_tuple(from_tensor(mu), from_tensor(sigma));
      },
      py::arg("z"),
      "Per-channel spatial mean and sigma (sqrt(var + 1e-5)) of a [B,C,H,W] map.");

  m.def(
      "adain",
      [](const DArray& z, const DArray& z_src) {
        sar::NoGradGuard ng;
        return from_tensor(sar::adain(to_tensor(z), to_tensor(z_src)));
      },
      py::arg("z"), py::arg("z_src"),
      "Re-styles content z with the channel statistics of z_src.");

  m.def(
      "instance_norm",
      [](const DArray& z, const DArray& beta, const DArray& gamma) {
        sar::NoGradGuard ng;
        return from_tensor(sar::instance_norm(to_tensor(z), to_stats(beta, gamma)));
      },
      py::arg("z"), py::arg("beta"), py::arg("gamma"),
      "gamma * (z - mu(z)) / sigma(z) + beta with [B,C] stats.");

  m.def(
      "style_perturb",
      [](const DArray& z, const DArray& beta, const DArray& gamma) {
        sar::NoGradGuard ng;
        return from_tensor(sar::style_perturb(to_tensor(z), to_stats(beta, gamma)));
      },
      py::arg("z"), py::arg("beta"), py::arg("gamma"),
      "Replaces the map's own channel statistics with (beta, gamma).");

  m.def(
      "style_mix",
      [](const DArray& z, const std::vector<int64_t>& perm) {
        sar::NoGradGuard ng;
        return from_tensor(sar::style_mix_batch(to_tensor(z), perm));
      },
      py::arg("z"), py::arg("perm"),
      "adain(z, z[perm]) for a batch permutation.");

  // ---- objectives ----
  m.def(
      "gae",
      [](const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<int>& dones, double gamma, double lam) {
        std::vector<uint8_t> d(dones.begin(), dones.end());
        sar::GaeResult r = sar::gae_advantages(rewards, values, d, gamma, lam);
        return py::make_tuple(r.advantages, r.value_targets);
      },
      py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("gamma"),
      py::arg("lam"),
      "Generalized advantage estimation; values carries T+1 entries "
      "(bootstrap last). Returns (advantages, value_targets).");

  // ---- environments ----
  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&>(), py::arg("name"),
           "gridworld-v0 (discrete) or pointmass-v0 (continuous)")
      .def("reset", &PyEnv::reset, py::arg("layout_seed"), py::arg("style_id"))
      .def("step_discrete", &PyEnv::step_discrete, py::arg("action"))
      .def("step_continuous", &PyEnv::step_continuous, py::arg("action"))
      .def_property_readonly("obs_shape", &PyEnv::obs_shape)
      .def_property_readonly("discrete", &PyEnv::discrete)
      .def_property_readonly("action_count", &PyEnv::action_count)
      .def_property_readonly("action_dim", &PyEnv::action_dim)
      .def_property_readonly("frame_stack", &PyEnv::frame_stack)
      .def_property_readonly("episode_done", &PyEnv::episode_done)
      .def_property_readonly("steps_taken", &PyEnv::steps_taken);

  m.def("style_pool_ids", &sar::style_pool_ids, py::arg("pool"),
        "Style ids of the 'train' or 'test' pool.");

  m.def(
      "gridworld_optimal_return",
      [](uint64_t layout_seed, int64_t budget) {
        return sar::gridworld_optimal_return(sar::GridLayout::from_seed(layout_seed), budget);
      },
      py::arg("layout_seed"), py::arg("budget") = sar::kGridBudget,
      "Best achievable return for a layout, by exhaustive search over BFS paths.");

  // ---- pipeline ----
  m.def("default_config", [] { return sar::config_to_json(sar::resolve(sar::RunConfig{})); });

  m.def(
      "train",
      [](const std::string& config_json, const std::string& runs_root) {
        sar::RunConfig cfg = sar::resolve(sar::config_from_json(config_json));
        sar::validate(cfg);
        return sar::train(cfg, runs_root).run_dir;
      },
      py::arg("config_json"), py::arg("runs_root"),
      "Runs a full training job and returns the run directory.");

  m.def(
      "eval_run",
      [](const std::string& run_dir, const std::string& pool, int64_t episodes,
         uint64_t seed) {
        sar::LoadedRun run = sar::load_run(run_dir);
        sar::EvalSpec spec;
        spec.pool = pool;
        spec.episodes = episodes;
        spec.seed = seed;
        return eval_dict(sar::evaluate(*run.env, run.policy(), spec));
      },
      py::arg("run_dir"), py::arg("pool") = "test", py::arg("episodes") = 10,
      py::arg("seed") = 0,
      "Greedy evaluation of a run's newest checkpoint on a style pool.");

  m.def(
      "analyze",
      [](const std::string& run_dir, const std::string& pool, int64_t n_states,
         int64_t n_styles, uint64_t seed) {
        sar::AnalyzeResult r = sar::analyze_run(run_dir, pool, n_states, n_styles, seed);
        py::dict d;
        d["cross_style"] = r.gap.cross_style;
        d["cross_state"] = r.gap.cross_state;
        d["ratio"] = r.gap.ratio;
        d["checkpoint_step"] = r.step;
        return d;
      },
      py::arg("run_dir"), py::arg("pool") = "test", py::arg("n_states") = 8,
      py::arg("n_styles") = 8, py::arg("seed") = 0,
      "Style sensitivity of a trained run's branch-point embedding.");
}
