#include "sar/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sar/common.hpp"
#include "sar/metrics.hpp"

namespace sar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) {
    throw ArtifactError(std::string(what) + " not found: " + p.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Run loading

const Encoder& LoadedRun::encoder() const { return ppo ? ppo->enc : sac->enc; }

EvalPolicy LoadedRun::policy() const { return ppo ? eval_policy(*ppo) : eval_policy(*sac); }

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun r;
  r.cfg = resolve(config_from_json(read_text(fs::path(run_dir) / "config.json", "run config")));
  validate(r.cfg);

  const fs::path ckpt_dir = fs::path(run_dir) / "checkpoints";
  int64_t best = -1;
  if (fs::is_directory(ckpt_dir)) {
    for (const auto& entry : fs::directory_iterator(ckpt_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("step_", 0) != 0 || entry.path().extension() != ".bin") continue;
      try {
        const int64_t step = std::stoll(name.substr(5));
        if (step > best) {
          best = step;
          r.checkpoint_path = entry.path().string();
        }
      } catch (const std::exception&) {
        continue;  // not a step checkpoint (e.g. nan_snapshot.bin)
      }
    }
  }
  if (best < 0) throw ArtifactError("no checkpoints in " + run_dir);
  r.step = best;

  r.env = make_env(r.cfg.env);
  EncoderConfig ec;
  ec.in_channels = r.env->obs_shape()[0];
  ec.c1 = r.cfg.c1;
  ec.c2 = r.cfg.c2;
  ec.c3 = r.cfg.c3;
  ec.embed_dim = r.cfg.embed_dim;

  RngStreams streams(r.cfg.seed);
  std::vector<std::pair<std::string, Tensor>> named;
  if (r.cfg.algorithm == "ppo") {
    const bool continuous = !r.env->discrete();
    const int64_t act_dim = continuous ? r.env->action_dim() : r.env->action_count();
    r.ppo = std::make_unique<PpoNet>(ec, act_dim, continuous, streams.policy_init);
    named = named_params(*r.ppo);
  } else {
    r.sac = std::make_unique<SacNet>(ec, r.env->action_dim(), r.cfg.q_hidden, r.cfg.alpha_init,
                                     streams.policy_init);
    named = named_params(*r.sac);
  }
  r.gen = std::make_unique<PerturbGenerator>(r.cfg.c2, r.cfg.gen_hidden, streams.generator_init);
  for (const auto& p : named_params(*r.gen)) named.push_back(p);

  restore_params(named, load_checkpoint(r.checkpoint_path, config_hash(r.cfg)));
  return r;
}

// ---------------------------------------------------------------------------
// Variant comparison

std::string variant_name(const RunConfig& cfg) {
  std::string base;
  if (cfg.lambda != 0.0 && cfg.kappa != 0.0) {
    base = "sar";
  } else if (cfg.lambda != 0.0) {
    base = "no-gcritic";
  } else if (cfg.kappa != 0.0) {
    base = "gcritic-only";
  } else if (cfg.mixing) {
    base = "mixstyle-only";
  } else {
    base = "base";
  }
  if (cfg.augmentation != "none") base += "+" + cfg.augmentation;
  return base;
}

CompareReport build_compare(const std::vector<std::string>& run_dirs, int64_t min_seeds) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  if (min_seeds < 1) throw ConfigError("compare needs min_seeds >= 1");

  struct RunEval {
    std::string dir, variant;
    int64_t seed = 0;
    std::map<std::string, double> pool_means;
  };
  std::vector<RunEval> runs;
  std::string env;
  std::set<std::string> pool_set;

  for (const std::string& dir : run_dirs) {
    RunEval re;
    re.dir = dir;
    RunConfig cfg =
        resolve(config_from_json(read_text(fs::path(dir) / "config.json", "run config")));
    re.variant = variant_name(cfg);
    re.seed = cfg.seed;

    if (env.empty()) {
      env = cfg.env;
    } else if (cfg.env != env) {
      throw ConfigError("compare requires one environment, got '" + env + "' and '" + cfg.env +
                        "' (" + dir + ")");
    }

    json ev;
    try {
      ev = json::parse(read_text(fs::path(dir) / "eval.json", "eval results"));
    } catch (const json::exception& e) {
      throw ArtifactError("eval results unreadable in " + dir + ": " + e.what());
    }
    for (auto it = ev.begin(); it != ev.end(); ++it) {
      if (it.key() == "schema") continue;
      re.pool_means[it.key()] = it.value().at("mean").get<double>();
    }
    if (re.pool_means.empty()) throw ArtifactError("eval results empty in " + dir);

    std::set<std::string> pools;
    for (const auto& [k, v] : re.pool_means) pools.insert(k);
    if (runs.empty()) {
      pool_set = pools;
    } else if (pools != pool_set) {
      throw ConfigError("compare requires matching eval pools across runs; '" + dir +
                        "' differs");
    }
    runs.push_back(std::move(re));
  }

  CompareReport r;
  r.env = env;
  if (pool_set.count("train")) r.pools.push_back("train");
  if (pool_set.count("test")) r.pools.push_back("test");
  for (const auto& p : pool_set) {
    if (p != "train" && p != "test") r.pools.push_back(p);
  }

  // variant -> pool -> per-seed means
  std::map<std::string, std::map<std::string, std::vector<double>>> groups;
  std::map<std::string, std::set<int64_t>> seeds;
  for (const auto& re : runs) {
    if (!seeds[re.variant].insert(re.seed).second) {
      throw ConfigError("variant '" + re.variant + "' has duplicate seed " +
                        std::to_string(re.seed));
    }
    for (const auto& [pool, mean] : re.pool_means) groups[re.variant][pool].push_back(mean);
  }
  for (const auto& [variant, s] : seeds) {
    if (static_cast<int64_t>(s.size()) < min_seeds) {
      throw ConfigError("variant '" + variant + "' has " + std::to_string(s.size()) +
                        " seeds, need >= " + std::to_string(min_seeds));
    }
  }

  std::vector<std::string> names;
  for (const auto& [v, g] : groups) names.push_back(v);
  std::vector<std::vector<CompareCell>> cells(names.size(),
                                              std::vector<CompareCell>(r.pools.size()));
  for (size_t vi = 0; vi < names.size(); ++vi) {
    for (size_t pi = 0; pi < r.pools.size(); ++pi) {
      const auto& xs = groups[names[vi]][r.pools[pi]];
      CompareCell& c = cells[vi][pi];
      c.seeds = static_cast<int64_t>(xs.size());
      for (double x : xs) c.mean += x;
      c.mean /= static_cast<double>(xs.size());
      for (double x : xs) c.stddev += (x - c.mean) * (x - c.mean);
      c.stddev = std::sqrt(c.stddev / static_cast<double>(xs.size()));
    }
  }

  // per-pool ranks: higher mean wins, ties by lower std, then name
  for (size_t pi = 0; pi < r.pools.size(); ++pi) {
    std::vector<size_t> order(names.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (cells[a][pi].mean != cells[b][pi].mean) return cells[a][pi].mean > cells[b][pi].mean;
      if (cells[a][pi].stddev != cells[b][pi].stddev) {
        return cells[a][pi].stddev < cells[b][pi].stddev;
      }
      return names[a] < names[b];
    });
    for (size_t pos = 0; pos < order.size(); ++pos) {
      cells[order[pos]][pi].rank = static_cast<int64_t>(pos) + 1;
    }
  }

  // rows sorted by rank in the last pool (test when present)
  const size_t rank_pool = r.pools.size() - 1;
  std::vector<size_t> row_order(names.size());
  for (size_t i = 0; i < row_order.size(); ++i) row_order[i] = i;
  std::sort(row_order.begin(), row_order.end(),
            [&](size_t a, size_t b) { return cells[a][rank_pool].rank < cells[b][rank_pool].rank; });
  for (size_t i : row_order) {
    r.variants.push_back(names[i]);
    r.cells.push_back(cells[i]);
  }
  return r;
}

std::string compare_to_text(const CompareReport& r) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head = {"variant", "seeds"};
  for (const auto& p : r.pools) {
    head.push_back(p);
    head.push_back("rank");
  }
  table.push_back(head);
  for (size_t vi = 0; vi < r.variants.size(); ++vi) {
    std::vector<std::string> row = {r.variants[vi],
                                    std::to_string(r.cells[vi].empty() ? 0 : r.cells[vi][0].seeds)};
    for (const auto& c : r.cells[vi]) {
      row.push_back(fmt("%.4f", c.mean) + " \xC2\xB1 " + fmt("%.4f", c.stddev));
      row.push_back(std::to_string(c.rank));
    }
    table.push_back(row);
  }

  std::vector<size_t> width(head.size(), 0);
  auto display_len = [](const std::string& s) {
    // the ± glyph is two bytes but one column
    size_t n = s.size();
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      if ((unsigned char)s[i] == 0xC2 && (unsigned char)s[i + 1] == 0xB1) --n;
    }
    return n;
  };
  for (const auto& row : table) {
    for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_len(row[i]));
  }
  std::ostringstream out;
  out << "environment: " << r.env << "\n";
  for (const auto& row : table) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << row[i];
      if (i + 1 < row.size()) out << std::string(width[i] - display_len(row[i]) + 2, ' ');
    }
    out << "\n";
  }
  return out.str();
}

std::string compare_to_json(const CompareReport& r) {
  json j;
  j["schema"] = "sar.compare_report.v1";
  j["env"] = r.env;
  j["pools"] = r.pools;
  json variants = json::array();
  for (size_t vi = 0; vi < r.variants.size(); ++vi) {
    json v;
    v["name"] = r.variants[vi];
    json cells = json::object();
    for (size_t pi = 0; pi < r.pools.size(); ++pi) {
      const CompareCell& c = r.cells[vi][pi];
      cells[r.pools[pi]] = {
          {"mean", c.mean}, {"std", c.stddev}, {"seeds", c.seeds}, {"rank", c.rank}};
    }
    v["pools"] = cells;
    variants.push_back(v);
  }
  j["variants"] = variants;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Learning-curve plots

PlotSeries load_series(const std::string& run_dir, const std::string& metric, double smooth) {
  if (!(smooth >= 0.0 && smooth < 1.0)) {
    throw ConfigError("smoothing coefficient must be in [0, 1), got " + fmt("%g", smooth));
  }
  MetricsTable t = read_metrics_csv((fs::path(run_dir) / "metrics.csv").string());
  if (std::find(t.columns.begin(), t.columns.end(), metric) == t.columns.end()) {
    std::string cols;
    for (const auto& c : t.columns) {
      if (!cols.empty()) cols += ", ";
      cols += c;
    }
    throw MetricError("unknown metric column '" + metric + "'; available: " + cols);
  }
  const std::vector<double> xs = t.column("timestep");
  const std::vector<double> smoothed = ema_series(t.column(metric), smooth);

  PlotSeries s;
  s.name = fs::path(run_dir).filename().string();
  if (s.name.empty()) s.name = fs::path(run_dir).parent_path().filename().string();
  for (size_t i = 0; i < xs.size(); ++i) {
    if (std::isnan(smoothed[i])) continue;
    s.timesteps.push_back(xs[i]);
    s.values.push_back(smoothed[i]);
  }
  if (s.values.empty()) {
    throw MetricError("metric '" + metric + "' has no finite values in " + run_dir);
  }
  return s;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') {
      out += "&amp;";
    } else if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else {
      out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& metric) {
  const double W = 840, H = 480;
  const double L = 70, R = 190, T = 20, B = 55;
  const double pw = W - L - R, ph = H - T - B;

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.values.size(); ++i) {
      if (first) {
        xmin = xmax = s.timesteps[i];
        ymin = ymax = s.values[i];
        first = false;
      } else {
        xmin = std::min(xmin, s.timesteps[i]);
        xmax = std::max(xmax, s.timesteps[i]);
        ymin = std::min(ymin, s.values[i]);
        ymax = std::max(ymax, s.values[i]);
      }
    }
  }
  if (first) throw MetricError("nothing to plot for metric '" + metric + "'");
  if (xmin == xmax) {
    xmin -= 1;
    xmax += 1;
  }
  if (ymin == ymax) {
    ymin -= 1;
    ymax += 1;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return T + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  // gridlines and tick labels
  for (int i = 0; i <= 4; ++i) {
    const double xt = xmin + (xmax - xmin) * i / 4.0;
    const double yt = ymin + (ymax - ymin) * i / 4.0;
    out << "<line x1=\"" << fmt("%.2f", px(xt)) << "\" y1=\"" << fmt("%.2f", T) << "\" x2=\""
        << fmt("%.2f", px(xt)) << "\" y2=\"" << fmt("%.2f", T + ph)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<line x1=\"" << fmt("%.2f", L) << "\" y1=\"" << fmt("%.2f", py(yt)) << "\" x2=\""
        << fmt("%.2f", L + pw) << "\" y2=\"" << fmt("%.2f", py(yt))
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt("%.2f", px(xt)) << "\" y=\"" << fmt("%.2f", T + ph + 18)
        << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"middle\">"
        << fmt("%.6g", xt) << "</text>\n";
    out << "<text x=\"" << fmt("%.2f", L - 8) << "\" y=\"" << fmt("%.2f", py(yt) + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">"
        << fmt("%.4g", yt) << "</text>\n";
  }
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#888888\"/>\n";

  // axis titles
  out << "<text x=\"" << fmt("%.2f", L + pw / 2) << "\" y=\"" << fmt("%.2f", H - 12)
      << "\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">timestep"
         "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt("%.2f", T + ph / 2)
      << "\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 "
      << fmt("%.2f", T + ph / 2) << ")\">" << xml_escape(metric) << "</text>\n";

  // series
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const auto& s = series[si];
    if (s.values.size() == 1) {
      out << "<circle cx=\"" << fmt("%.2f", px(s.timesteps[0])) << "\" cy=\""
          << fmt("%.2f", py(s.values[0])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.values.size(); ++i) {
        if (i) out << " ";
        out << fmt("%.2f", px(s.timesteps[i])) << "," << fmt("%.2f", py(s.values[i]));
      }
      out << "\"/>\n";
    }
    // legend entry
    const double ly = T + 14 + 18.0 * static_cast<double>(si);
    out << "<line x1=\"" << fmt("%.2f", L + pw + 12) << "\" y1=\"" << fmt("%.2f", ly)
        << "\" x2=\"" << fmt("%.2f", L + pw + 34) << "\" y2=\"" << fmt("%.2f", ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt("%.2f", L + pw + 40) << "\" y=\"" << fmt("%.2f", ly + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << xml_escape(s.name)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string series_to_csv(const std::vector<PlotSeries>& series, const std::string& metric) {
  std::ostringstream out;
  out << "run,timestep," << metric << "\n";
  for (const auto& s : series) {
    for (size_t i = 0; i < s.values.size(); ++i) {
      out << s.name << "," << format_metric(s.timesteps[i]) << ","
          << format_metric(s.values[i]) << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Embedding analysis

AnalyzeResult analyze_run(const std::string& run_dir, const std::string& pool,
                          int64_t n_states, int64_t n_styles, uint64_t seed) {
  LoadedRun run = load_run(run_dir);
  AnalyzeResult r;
  r.pool = pool;
  r.n_states = n_states;
  r.n_styles = n_styles;
  r.seed = seed;
  r.step = run.step;
  r.gap = embedding_style_gap(*run.env, branch_embed_fn(run.encoder()), n_states, n_styles,
                              pool, seed);
  return r;
}

std::string analyze_to_json(const AnalyzeResult& r) {
  json j;
  j["schema"] = "sar.style_gap.v1";
  j["pool"] = r.pool;
  j["n_states"] = r.n_states;
  j["n_styles"] = r.n_styles;
  j["seed"] = r.seed;
  j["checkpoint_step"] = r.step;
  j["cross_style"] = r.gap.cross_style;
  j["cross_state"] = r.gap.cross_state;
  j["ratio"] = r.gap.ratio;
  return j.dump(2) + "\n";
}

}  // namespace sar
