// Command-line front end: train, eval, compare, plot, analyze.
//
// Exit codes: 0 success, 2 config or usage error, 3 missing artifact,
// 4 bad metric. SAR_RUNS_DIR sets the default output root for train.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sar/common.hpp"
#include "sar/config.hpp"
#include "sar/harness.hpp"
#include "sar/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw sar::ArtifactError(std::string(what) + " not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw sar::ArtifactError("cannot write " + path);
  out << content;
}

std::string default_runs_root() {
  const char* env = std::getenv("SAR_RUNS_DIR");
  return env && *env ? env : "./runs";
}

json eval_entry(const sar::EvalResult& r) {
  return {{"pool", r.pool},
          {"mean", r.mean},
          {"std", r.stddev},
          {"episodes", r.episodes},
          {"seed", r.seed}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"style-agnostic reinforcement learning"};
  app.require_subcommand(1);

  // --- train ---
  auto* t = app.add_subcommand("train", "train a policy and write a run directory");
  std::string t_config;
  std::string t_root = default_runs_root();
  t->add_option("--config", t_config, "json config file; flags below override its fields");
  t->add_option("--runs-dir", t_root, "output root (default $SAR_RUNS_DIR or ./runs)");
  sar::RunConfig over;
  auto* o_algo = t->add_option("--algo", over.algorithm, "ppo|sac");
  auto* o_env = t->add_option("--env", over.env, "gridworld-v0|pointmass-v0");
  auto* o_seed = t->add_option("--seed", over.seed, "master seed");
  auto* o_steps = t->add_option("--total-steps", over.total_timesteps, "environment steps");
  auto* o_rollout = t->add_option("--rollout-steps", over.rollout_steps, "steps per rollout");
  auto* o_lambda = t->add_option("--lambda", over.lambda, "adversarial actor coefficient");
  auto* o_lambda_p =
      t->add_option("--lambda-prime", over.lambda_prime, "generator coefficient (default: lambda)");
  auto* o_kappa = t->add_option("--kappa", over.kappa, "critic consistency coefficient");
  auto* o_warmup =
      t->add_option("--warmup", over.warmup_timesteps, "steps before adversarial terms engage");
  auto* o_mixing = t->add_flag("--mixing,!--no-mixing", over.mixing, "feature-statistics mixing");
  auto* o_aug = t->add_option("--aug", over.augmentation, "none|trans|color");
  auto* o_style_mode = t->add_option("--style-mode", over.style_mode, "pool|single");
  auto* o_style_id = t->add_option("--style-id", over.style_id, "style id for single mode");
  auto* o_eval_every = t->add_option("--eval-every", over.eval_every, "eval period in steps");
  auto* o_eval_eps = t->add_option("--eval-episodes", over.eval_episodes, "episodes per eval");
  auto* o_ckpt = t->add_option("--checkpoint-every", over.checkpoint_every,
                               "checkpoint period in steps (0 = final only)");
  auto* o_log = t->add_option("--log-every", over.log_every, "metrics period in steps");
  auto* o_embed = t->add_option("--embed-dim", over.embed_dim, "embedding width");

  t->callback([&] {
    sar::RunConfig cfg;
    if (!t_config.empty()) cfg = sar::config_from_json(read_file(t_config, "config file"));
    if (o_algo->count()) cfg.algorithm = over.algorithm;
    if (o_env->count()) cfg.env = over.env;
    if (o_seed->count()) cfg.seed = over.seed;
    if (o_steps->count()) cfg.total_timesteps = over.total_timesteps;
    if (o_rollout->count()) cfg.rollout_steps = over.rollout_steps;
    if (o_lambda->count()) cfg.lambda = over.lambda;
    if (o_lambda_p->count()) cfg.lambda_prime = over.lambda_prime;
    if (o_kappa->count()) cfg.kappa = over.kappa;
    if (o_warmup->count()) cfg.warmup_timesteps = over.warmup_timesteps;
    if (o_mixing->count()) cfg.mixing = over.mixing;
    if (o_aug->count()) cfg.augmentation = over.augmentation;
    if (o_style_mode->count()) cfg.style_mode = over.style_mode;
    if (o_style_id->count()) cfg.style_id = over.style_id;
    if (o_eval_every->count()) cfg.eval_every = over.eval_every;
    if (o_eval_eps->count()) cfg.eval_episodes = over.eval_episodes;
    if (o_ckpt->count()) cfg.checkpoint_every = over.checkpoint_every;
    if (o_log->count()) cfg.log_every = over.log_every;
    if (o_embed->count()) cfg.embed_dim = over.embed_dim;

    cfg = sar::resolve(cfg);
    sar::validate(cfg);
    sar::TrainResult r = sar::train(cfg, t_root);
    std::cout << r.run_dir << "\n";
  });

  // --- eval ---
  auto* e = app.add_subcommand("eval", "evaluate the newest checkpoint of a run");
  std::string e_dir, e_pool = "test";
  int64_t e_episodes = 10;
  uint64_t e_seed = 0;
  e->add_option("run_dir", e_dir, "run directory")->required();
  e->add_option("--pool", e_pool, "style pool (default test)")
      ->check(CLI::IsMember({"train", "test"}));
  e->add_option("--episodes", e_episodes, "episode count (default 10)");
  auto* o_eseed = e->add_option("--seed", e_seed, "eval seed (default: the run's seed)");

  e->callback([&] {
    sar::LoadedRun run = sar::load_run(e_dir);
    sar::EvalSpec spec;
    spec.style_mode = "pool";
    spec.pool = e_pool;
    spec.episodes = e_episodes;
    spec.seed = o_eseed->count() ? e_seed : static_cast<uint64_t>(run.cfg.seed);
    sar::EvalResult res = sar::evaluate(*run.env, run.policy(), spec);

    const std::string path = (fs::path(e_dir) / "eval.json").string();
    json j = json::object();
    if (fs::exists(path)) {
      try {
        j = json::parse(read_file(path, "eval results"));
      } catch (const json::exception&) {
        j = json::object();  // rewrite a corrupt file
      }
    }
    j["schema"] = "sar.eval.v1";
    j[res.pool] = eval_entry(res);
    write_file(path, j.dump(2) + "\n");

    char line[160];
    std::snprintf(line, sizeof(line), "pool=%s mean=%.6g std=%.6g episodes=%lld seed=%llu",
                  res.pool.c_str(), res.mean, res.stddev,
                  static_cast<long long>(res.episodes),
                  static_cast<unsigned long long>(res.seed));
    std::cout << line << "\n";
  });

  // --- compare ---
  auto* c = app.add_subcommand("compare", "rank run variants by evaluation return");
  std::vector<std::string> c_dirs;
  int64_t c_min_seeds = 3;
  std::string c_out = "compare.json";
  c->add_option("run_dirs", c_dirs, "two or more run directories")->required()->expected(-2);
  c->add_option("--min-seeds", c_min_seeds, "required seeds per variant (default 3)");
  c->add_option("--out", c_out, "report json path (default compare.json)");

  c->callback([&] {
    sar::CompareReport rep = sar::build_compare(c_dirs, c_min_seeds);
    std::cout << sar::compare_to_text(rep);
    write_file(c_out, sar::compare_to_json(rep));
  });

  // --- plot ---
  auto* p = app.add_subcommand("plot", "render learning curves as svg plus smoothed csv");
  std::vector<std::string> p_dirs;
  std::string p_metric = "episode_return";
  double p_smooth = 0.98;
  std::string p_out = "plot.svg";
  p->add_option("run_dirs", p_dirs, "one or more run directories")->required()->expected(-1);
  p->add_option("--metric", p_metric, "metrics.csv column (default episode_return)");
  p->add_option("--smooth", p_smooth, "EMA coefficient in [0,1) (default 0.98)");
  p->add_option("--out", p_out, "svg path; the csv lands next to it");

  p->callback([&] {
    std::vector<sar::PlotSeries> series;
    for (const auto& dir : p_dirs) series.push_back(sar::load_series(dir, p_metric, p_smooth));
    fs::path svg_path(p_out);
    fs::path csv_path = svg_path;
    csv_path.replace_extension(".csv");
    if (csv_path == svg_path) csv_path += ".csv";
    write_file(svg_path.string(), sar::render_svg(series, p_metric));
    write_file(csv_path.string(), sar::series_to_csv(series, p_metric));
    std::cout << svg_path.string() << "\n" << csv_path.string() << "\n";
  });

  // --- analyze ---
  auto* a = app.add_subcommand("analyze", "style sensitivity of a run's embedding");
  std::string a_dir, a_pool = "test", a_out;
  int64_t a_states = 8, a_styles = 8;
  uint64_t a_seed = 0;
  a->add_option("run_dir", a_dir, "run directory")->required();
  a->add_option("--pool", a_pool, "style pool (default test)")
      ->check(CLI::IsMember({"train", "test"}));
  a->add_option("--states", a_states, "layouts sampled (default 8)");
  a->add_option("--styles", a_styles, "styles sampled (default 8)");
  auto* o_aseed = a->add_option("--seed", a_seed, "sampling seed (default: the run's seed)");
  a->add_option("--out", a_out, "output path (default <run_dir>/style_gap.json)");

  a->callback([&] {
    if (!o_aseed->count()) {
      sar::RunConfig cfg = sar::config_from_json(
          read_file((fs::path(a_dir) / "config.json").string(), "run config"));
      a_seed = static_cast<uint64_t>(cfg.seed);
    }
    sar::AnalyzeResult r = sar::analyze_run(a_dir, a_pool, a_states, a_styles, a_seed);
    const std::string out =
        a_out.empty() ? (fs::path(a_dir) / "style_gap.json").string() : a_out;
    write_file(out, sar::analyze_to_json(r));
    char line[160];
    std::snprintf(line, sizeof(line), "cross_style=%.6g cross_state=%.6g ratio=%.6g",
                  r.gap.cross_style, r.gap.cross_state, r.gap.ratio);
    std::cout << line << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? 0 : 2;
  } catch (const sar::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const sar::ArtifactError& ex) {
    std::cerr << "missing artifact: " << ex.what() << "\n";
    return 3;
  } catch (const sar::MetricError& ex) {
    std::cerr << "metric error: " << ex.what() << "\n";
    return 4;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
