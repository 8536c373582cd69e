#include "sar/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sar/common.hpp"

namespace sar {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Parameter naming

namespace {

void push_dense(std::vector<std::pair<std::string, Tensor>>& out, const std::string& name,
                const Dense& d) {
  out.emplace_back(name + ".w", d.w);
  out.emplace_back(name + ".b", d.b);
}

void push_encoder(std::vector<std::pair<std::string, Tensor>>& out, const Encoder& enc) {
  out.emplace_back("enc.b1.w", enc.b1.w);
  out.emplace_back("enc.b1.b", enc.b1.b);
  out.emplace_back("enc.b2.w", enc.b2.w);
  out.emplace_back("enc.b2.b", enc.b2.b);
  out.emplace_back("enc.b3.w", enc.b3.w);
  out.emplace_back("enc.b3.b", enc.b3.b);
  push_dense(out, "enc.fc", enc.fc);
}

void push_qhead(std::vector<std::pair<std::string, Tensor>>& out, const std::string& name,
                const SacNet::QHead& q) {
  push_dense(out, name + ".h", q.h);
  push_dense(out, name + ".out", q.out);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> named_params(const PpoNet& net) {
  std::vector<std::pair<std::string, Tensor>> out;
  push_encoder(out, net.enc);
  push_dense(out, "pi", net.pi_head);
  if (net.continuous) push_dense(out, "pi_log_std", net.pi_log_std);
  push_dense(out, "v", net.v_head);
  return out;
}

std::vector<std::pair<std::string, Tensor>> named_params(const SacNet& net) {
  std::vector<std::pair<std::string, Tensor>> out;
  push_encoder(out, net.enc);
  push_dense(out, "pi_trunk", net.pi_trunk);
  push_dense(out, "pi_mean", net.pi_mean);
  push_dense(out, "pi_log_std", net.pi_log_std);
  push_qhead(out, "q1", net.q1);
  push_qhead(out, "q2", net.q2);
  push_qhead(out, "q1_target", net.q1_target);
  push_qhead(out, "q2_target", net.q2_target);
  out.emplace_back("log_alpha", net.log_alpha);
  return out;
}

std::vector<std::pair<std::string, Tensor>> named_params(const PerturbGenerator& gen) {
  static const char* names[] = {"gen.fc1.w",  "gen.fc1.b",  "gen.fc2.w",   "gen.fc2.b",
                                "gen.beta.w", "gen.beta.b", "gen.gamma.w", "gen.gamma.b"};
  std::vector<Tensor> p = gen.params();
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t i = 0; i < p.size(); ++i) out.emplace_back(names[i], p[i]);
  return out;
}

Checkpoint snapshot_params(const std::vector<std::pair<std::string, Tensor>>& named,
                           uint64_t config_hash, int64_t step) {
  Checkpoint c;
  c.config_hash = config_hash;
  c.step = step;
  for (const auto& [name, t] : named) c.arrays[name] = t.values();
  return c;
}

void restore_params(const std::vector<std::pair<std::string, Tensor>>& named,
                    const Checkpoint& ckpt) {
  for (const auto& [name, t] : named) {
    auto it = ckpt.arrays.find(name);
    if (it == ckpt.arrays.end()) {
      throw ArtifactError("checkpoint is missing array '" + name + "'");
    }
    if (static_cast<int64_t>(it->second.size()) != t.size()) {
      throw ArtifactError("checkpoint array '" + name + "' holds " +
                          std::to_string(it->second.size()) + " values, model expects " +
                          std::to_string(t.size()));
    }
  }
  for (const auto& [name, t] : named) {
    const auto& src = ckpt.arrays.at(name);
    Tensor dst = t;  // shared storage
    std::copy(src.begin(), src.end(), dst.raw_values().begin());
  }
}

// ---------------------------------------------------------------------------
// Run directories

std::string prepare_run_dir(const RunConfig& cfg, const std::string& runs_root) {
  const fs::path dir = fs::path(runs_root) / run_dir_name(cfg);
  fs::remove_all(dir);
  fs::create_directories(dir / "checkpoints");
  json j = json::parse(config_to_json(cfg));
  j["schema"] = "sar.run_config.v1";
  j["config_hash"] = config_hash_hex(cfg);
  std::ofstream out(dir / "config.json");
  out << j.dump(2) << "\n";
  return dir.string();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Tensor batch_of_one(const Tensor& obs) {
  return reshape(obs, {1, obs.dim(0), obs.dim(1), obs.dim(2)});
}

}  // namespace

EvalPolicy eval_policy(const PpoNet& net) {
  EvalPolicy p;
  if (net.continuous) {
    p.act_continuous = [&net](const Tensor& obs) {
      NoGradGuard ng;
      return net.dist_from_embed(net.enc.encode(batch_of_one(obs))).mean_action(0);
    };
  } else {
    p.act_discrete = [&net](const Tensor& obs) {
      NoGradGuard ng;
      return net.dist_from_embed(net.enc.encode(batch_of_one(obs))).mode(0);
    };
  }
  return p;
}

EvalPolicy eval_policy(const SacNet& net) {
  EvalPolicy p;
  p.act_continuous = [&net](const Tensor& obs) {
    NoGradGuard ng;
    return net.dist_from_embed(net.enc.encode(batch_of_one(obs))).mean_action(0);
  };
  return p;
}

EvalResult evaluate(Env& env, const EvalPolicy& policy, const EvalSpec& spec) {
  if (spec.episodes <= 0) throw ConfigError("evaluation needs a positive episode count");
  std::vector<int64_t> pool_ids;
  if (spec.style_mode == "pool") {
    pool_ids = style_pool_ids(spec.pool);
  } else if (spec.style_mode != "single") {
    throw ConfigError("unknown style mode '" + spec.style_mode + "'");
  }
  if (env.discrete() ? !policy.act_discrete : !policy.act_continuous) {
    throw ConfigError("evaluation policy does not match the env's action kind");
  }

  RngStream rng = eval_stream(spec.seed);
  EvalResult r;
  r.pool = spec.pool;
  r.episodes = spec.episodes;
  r.seed = spec.seed;
  for (int64_t ep = 0; ep < spec.episodes; ++ep) {
    const int64_t sid = pool_ids.empty()
                            ? spec.style_id
                            : pool_ids[rng.uniform_int(static_cast<int64_t>(pool_ids.size()))];
    const uint64_t lseed = rng.next_u64();
    Tensor obs = env.reset(lseed, sid);
    double ret = 0.0;
    while (!env.episode_done()) {
      StepResult sr = policy.act_discrete
                          ? env.step_discrete(policy.act_discrete(obs))
                          : env.step_continuous(policy.act_continuous(obs));
      ret += sr.reward;
      obs = sr.obs;
    }
    r.returns.push_back(ret);
    r.layout_seeds.push_back(lseed);
    r.style_ids.push_back(sid);
  }

  double sum = 0.0;
  for (double v : r.returns) sum += v;
  r.mean = sum / static_cast<double>(r.returns.size());
  double sq = 0.0;
  for (double v : r.returns) sq += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(sq / static_cast<double>(r.returns.size()));
  return r;
}

void write_eval_json(const std::string& path, const std::vector<EvalResult>& results) {
  json j = json::object();
  j["schema"] = "sar.eval.v1";
  for (const auto& r : results) {
    j[r.pool] = {{"pool", r.pool},
                 {"mean", r.mean},
                 {"std", r.stddev},
                 {"episodes", r.episodes},
                 {"seed", r.seed}};
  }
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Embedding diagnostics

StyleGap embedding_style_gap(Env& env, const EmbedFn& embed, int64_t n_states, int64_t n_styles,
                             const std::string& pool, uint64_t seed) {
  if (n_states < 2) throw ConfigError("embedding gap needs at least two states");
  if (n_styles < 2) throw ConfigError("embedding gap needs at least two styles");
  const std::vector<int64_t> ids = style_pool_ids(pool);
  if (n_styles > static_cast<int64_t>(ids.size())) {
    throw ConfigError("embedding gap asked for " + std::to_string(n_styles) +
                      " styles, pool '" + pool + "' holds " + std::to_string(ids.size()));
  }

  RngStream rng(splitmix64(seed ^ fnv1a64("style-gap")));
  const std::vector<int64_t> pick = rng.permutation(static_cast<int64_t>(ids.size()));
  std::vector<int64_t> styles(n_styles);
  for (int64_t j = 0; j < n_styles; ++j) styles[j] = ids[pick[j]];
  std::vector<uint64_t> layouts(n_states);
  for (int64_t i = 0; i < n_states; ++i) layouts[i] = rng.next_u64();

  std::vector<std::vector<double>> e(n_states * n_styles);
  for (int64_t i = 0; i < n_states; ++i) {
    for (int64_t j = 0; j < n_styles; ++j) {
      e[i * n_styles + j] = embed(env.reset(layouts[i], styles[j]));
    }
  }

  auto l2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };

  StyleGap g;
  int64_t n_pairs = 0;
  for (int64_t i = 0; i < n_states; ++i) {
    for (int64_t j = 0; j < n_styles; ++j) {
      for (int64_t j2 = j + 1; j2 < n_styles; ++j2) {
        g.cross_style += l2(e[i * n_styles + j], e[i * n_styles + j2]);
        ++n_pairs;
      }
    }
  }
  g.cross_style /= static_cast<double>(n_pairs);
  n_pairs = 0;
  for (int64_t j = 0; j < n_styles; ++j) {
    for (int64_t i = 0; i < n_states; ++i) {
      for (int64_t i2 = i + 1; i2 < n_states; ++i2) {
        g.cross_state += l2(e[i * n_styles + j], e[i2 * n_styles + j]);
        ++n_pairs;
      }
    }
  }
  g.cross_state /= static_cast<double>(n_pairs);
  g.ratio = (g.cross_style == 0.0 && g.cross_state == 0.0) ? 0.0
                                                           : g.cross_style / g.cross_state;
  return g;
}

EmbedFn branch_embed_fn(const Encoder& enc) {
  return [&enc](const Tensor& obs) {
    NoGradGuard ng;
    return enc.to_branch(batch_of_one(obs)).values();
  };
}

// ---------------------------------------------------------------------------
// Reward normalization

double RewardNormalizer::normalize(double reward, bool done) {
  acc_ = gamma_ * acc_ + reward;
  const double delta = acc_ - mean_;
  const double tot = count_ + 1.0;
  mean_ += delta / tot;
  var_ = (var_ * count_ + delta * delta * count_ / tot) / tot;
  count_ = tot;
  if (done) acc_ = 0.0;
  return reward / std::sqrt(var_ + 1e-8);
}

// ---------------------------------------------------------------------------
// Training

void abort_with_snapshot(const std::string& run_dir, const Checkpoint& snap, int64_t timestep,
                         const std::string& what) {
  const std::string ckpt = (fs::path(run_dir) / "checkpoints" / "nan_snapshot.bin").string();
  save_checkpoint(ckpt, snap);
  json j{{"timestep", timestep}, {"error", what}, {"snapshot", ckpt}};
  std::ofstream(fs::path(run_dir) / "nan_diagnostic.json") << j.dump(2) << "\n";
  throw NumericError(what + " at timestep " + std::to_string(timestep) +
                     "; parameters saved to " + ckpt);
}

TrainResult train(const RunConfig& raw, const std::string& runs_root) {
  RunConfig cfg = resolve(raw);
  validate(cfg);
  return cfg.algorithm == "ppo" ? train_ppo(cfg, runs_root) : train_sac(cfg, runs_root);
}

}  // namespace sar
