#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "batchrl/bench.hpp"
#include "batchrl/checkpoint.hpp"
#include "batchrl/cli.hpp"

namespace batchrl::cli {

namespace fs = std::filesystem;

namespace {

struct Loaded {
  RunConfig config;
  std::size_t lanes = 1;
};

/// Config-phase failures map to exit 2.
std::optional<Loaded> load(const std::string& path, const std::vector<Override>& overrides,
                           std::optional<std::size_t> lanes, std::ostream& err) {
  try {
    Loaded l;
    l.config = load_config(path, overrides);
    validate(l.config);
    l.lanes = resolve_lanes(lanes);
    return l;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return std::nullopt;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

int cmd_train(const std::string& config_path, const std::vector<Override>& overrides,
              std::optional<std::size_t> lanes, std::ostream& out, std::ostream& err) {
  auto loaded = load(config_path, overrides, lanes, err);
  if (!loaded) return 2;
  const RunConfig& c = loaded->config;
  if (c.trainer.target_reward && c.trainer.target_success_rate) {
    err << "config error: set at most one of 'trainer.target_reward' and 'trainer.target_success_rate'\n";
    return 2;
  }

  try {
    TrainSetup setup;
    setup.env = env_batch_config(c);
    setup.hidden = c.policy.hidden;
    setup.trainer = c.trainer.config;
    setup.policy_seed = c.policy.seed;
    setup.lanes = loaded->lanes;
    TrainBudget budget;
    budget.env_steps = c.trainer.total_steps;
    budget.wall_clock_s = c.trainer.max_wall_clock_s;
    if (c.trainer.target_reward) {
      budget.target = c.trainer.target_reward;
      budget.metric = TargetMetric::EpisodicReward;
    } else if (c.trainer.target_success_rate) {
      budget.target = c.trainer.target_success_rate;
      budget.metric = TargetMetric::SuccessRate;
    }

    double last_report = 0;
    budget.on_point = [&](const CurvePoint& p) {
      if (p.wall_clock_s - last_report < 10) return;
      last_report = p.wall_clock_s;
      err << "t=" << static_cast<int>(p.wall_clock_s) << "s steps=" << p.env_steps
          << " reward=" << p.mean_episodic_reward << " value_loss=" << p.value_loss << '\n';
    };
    const auto result = train(setup, budget);

    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    {
      std::ofstream csv(dir / "curve.csv");
      write_curve_csv(csv, result.curve);
      if (!csv) throw Error(ErrorCode::IoError, "cannot write " + (dir / "curve.csv").string());
    }
    save_checkpoint(dir / "policy.ckpt", result.policy);

    YAML::Emitter m;
    m.SetDoublePrecision(17);
    m << YAML::BeginMap;
    m << YAML::Key << "build_id" << YAML::Value << build_id();
    m << YAML::Key << "command" << YAML::Value << "train";
    m << YAML::Key << "seed" << YAML::Value << c.env.seed;
    m << YAML::Key << "policy_seed" << YAML::Value << c.policy.seed;
    m << YAML::Key << "lanes" << YAML::Value << loaded->lanes;
    m << YAML::Key << "config" << YAML::Value << YAML::Load(to_yaml(c));
    m << YAML::Key << "result" << YAML::Value << YAML::BeginMap;
    m << YAML::Key << "updates" << YAML::Value << result.curve.size();
    m << YAML::Key << "env_steps" << YAML::Value << (result.curve.empty() ? 0 : result.curve.back().env_steps);
    m << YAML::Key << "wall_clock_s" << YAML::Value << (result.curve.empty() ? 0.0 : result.curve.back().wall_clock_s);
    m << YAML::Key << "reached_target" << YAML::Value << result.reached_target;
    if (result.reached_target) m << YAML::Key << "time_to_target_s" << YAML::Value << result.time_to_target_s;
    m << YAML::EndMap << YAML::EndMap;
    write_file(dir / "manifest.yaml", std::string(m.c_str()) + "\n");

    out << "updates " << result.curve.size();
    if (!result.curve.empty()) {
      const auto& last = result.curve.back();
      out << ", env steps " << last.env_steps << ", wall clock " << last.wall_clock_s << " s"
          << ", last mean episodic reward " << last.mean_episodic_reward;
    }
    out << '\n';
    if (budget.target)
      out << (result.reached_target ? "target reached after " + std::to_string(result.time_to_target_s) + " s"
                                    : std::string("target not reached"))
          << '\n';
    out << "outputs in " << dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

int cmd_bench(const std::string& config_path, const std::vector<Override>& overrides, bool with_copy_baseline,
              std::optional<std::size_t> lanes, std::ostream& out, std::ostream& err) {
  auto loaded = load(config_path, overrides, lanes, err);
  if (!loaded) return 2;
  const RunConfig& c = loaded->config;
  if (c.bench.num_envs.empty()) {
    err << "config error: 'bench.num_envs' is empty\n";
    return 2;
  }
  try {
    BenchOptions o;
    o.steps = c.bench.steps;
    o.warmup = c.bench.warmup;
    o.horizon = c.bench.horizon;
    o.repeats = c.bench.repeats;
    o.lanes = loaded->lanes;
    o.num_agents = c.env.num_agents;
    o.episode_length = resolved_episode_length(c.env);
    o.params = c.env.params;
    o.seed = c.env.seed;
    o.memory_cap_bytes = c.bench.memory_cap_mb << 20;
    Policy policy;
    if (c.bench.policy == "loaded") {
      policy = load_checkpoint(c.bench.checkpoint);
      o.policy = &policy;
    }

    auto report = measure_throughput(c.env.name, c.bench.num_envs, o);
    const bool copy = with_copy_baseline || c.bench.with_copy_baseline;
    bool checksums_match = true;
    if (copy) {
      const std::size_t n = report.rows.size();
      for (std::size_t i = 0; i < n; ++i) {
        // Paired rerun so both sides of each ratio share the same machine conditions.
        auto [in_place, row] = measure_pair(c.env.name, report.rows[i].num_envs, o);
        checksums_match = checksums_match && row.checksum == in_place.checksum;
        report.rows[i] = in_place;
        report.rows.push_back(row);
      }
    }

    std::optional<ScalingFit> fit;
    try {
      fit = fit_scaling(report);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPoints) throw;
      out << "scaling fit skipped: " << e.what() << '\n';
    }

    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    {
      std::ofstream csv(dir / "bench.csv");
      write_report_csv(csv, report);
      std::ofstream svg(dir / "bench.svg");
      write_scaling_svg(svg, report, fit);
      if (!csv || !svg) throw Error(ErrorCode::IoError, "cannot write bench outputs in " + dir.string());
    }

    out << c.env.name << " on " << report.cores << " cores, W=" << report.lanes << '\n';
    for (const auto& r : report.rows)
      out << "  " << to_string(r.pipeline) << " E=" << r.num_envs << ": " << r.steps_per_s << " steps/s\n";
    if (fit)
      out << "slope " << fit->slope << " R2 " << fit->r2 << " over " << fit->points << " points"
          << (fit->knee_envs ? ", knee at E=" + std::to_string(fit->knee_envs) : std::string()) << '\n';
    if (copy) {
      for (auto [e, ratio] : speedup_ratios(report)) out << "  in-place / copy at E=" << e << ": " << ratio << '\n';
      out << "trajectory checksums " << (checksums_match ? "identical" : "DIFFER") << '\n';
    }
    out << "outputs in " << dir.string() << '\n';
    return checksums_match ? 0 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, std::size_t episodes,
             const std::vector<Override>& overrides, std::optional<std::size_t> lanes, std::ostream& out,
             std::ostream& err) {
  if (episodes == 0) {
    err << "usage error: --episodes must be >= 1\n";
    return 2;
  }
  auto loaded = load(config_path, overrides, lanes, err);
  if (!loaded) return 2;
  const RunConfig& c = loaded->config;
  try {
    const Policy policy = load_checkpoint(checkpoint_path);
    auto cfg = env_batch_config(c);
    cfg.num_envs = std::min(cfg.num_envs, episodes);
    TensorStore store;
    EnvBatch batch(cfg, store);
    store.finalize();
    LanePool pool(loaded->lanes);
    PolicySampler sampler(policy, true);
    const auto ranges = batch.lane_ranges(pool.lanes());
    sampler.prepare(batch, ranges);

    const std::size_t E = batch.num_envs();
    const std::size_t A = batch.num_agents();
    std::vector<double> ret(E, 0.0), len(E, 0.0);
    std::vector<double> rewards, lengths;
    while (rewards.size() < episodes) {
      pool.run([&](std::size_t lane) { sampler.act(batch, ranges[lane], lane); });
      const auto o = batch.step_all(pool);
      for (std::size_t e = 0; e < E && rewards.size() < episodes; ++e) {
        double r = 0;
        for (std::size_t a = 0; a < A; ++a) r += o.rewards[e * A + a];
        ret[e] += r / static_cast<double>(A);
        len[e] += 1;
        if (o.dones[e]) {
          rewards.push_back(ret[e]);
          lengths.push_back(len[e]);
          ret[e] = len[e] = 0;
        }
      }
      batch.auto_reset(pool);
    }
    out << "episodes " << episodes << '\n';
    out << "reward " << mean_of(rewards) << " +- " << std_of(rewards) << '\n';
    out << "length " << mean_of(lengths) << " +- " << std_of(lengths) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

int cmd_list_envs(std::ostream& out) {
  for (const auto& info : environment_registry()) {
    out << info.name << "  " << info.description << " (T_max " << info.default_episode_length << ")\n";
    for (const auto& p : info.params) out << "    " << p.name << " = " << p.default_value << "  " << p.help << '\n';
  }
  return 0;
}

namespace {

/// Unknown "--a.b=value" / "--a.b value" tokens become overrides; a bare
/// "--key" addresses a top-level key such as output_dir.
std::vector<Override> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3)
      throw Error(ErrorCode::ConfigError, "unexpected argument '" + tok + "'");
    const auto eq = tok.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(tok.substr(2, eq - 2), tok.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw Error(ErrorCode::ConfigError, "override '" + tok + "' has no value");
      out.emplace_back(tok.substr(2), extras[++i]);
    }
  }
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"batched reinforcement learning: train, evaluate and benchmark"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::optional<std::size_t> lanes;
  bool copy_baseline = false;
  std::size_t episodes = 100;

  auto* train_cmd = app.add_subcommand("train", "train a policy; writes curve.csv, policy.ckpt, manifest.yaml");
  train_cmd->add_option("config", config_path, "YAML run config")->required();
  train_cmd->add_option("--lanes", lanes, "worker lanes (default: BATCHRL_LANES or hardware threads)");
  train_cmd->allow_extras();

  auto* bench_cmd = app.add_subcommand("bench", "measure throughput; writes bench.csv and bench.svg");
  bench_cmd->add_option("config", config_path, "YAML run config")->required();
  bench_cmd->add_option("--lanes", lanes, "worker lanes");
  bench_cmd->add_flag("--with-copy-baseline", copy_baseline, "also run the staging-copy pipeline");
  bench_cmd->allow_extras();

  auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_cmd->add_option("checkpoint", checkpoint_path, "policy checkpoint")->required();
  eval_cmd->add_option("config", config_path, "YAML run config")->required();
  eval_cmd->add_option("--episodes,-n", episodes, "episodes to evaluate");
  eval_cmd->add_option("--lanes", lanes, "worker lanes");
  eval_cmd->allow_extras();

  auto* list_cmd = app.add_subcommand("list-envs", "list environments and their parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  std::vector<Override> overrides;
  try {
    for (auto* sub : {train_cmd, bench_cmd, eval_cmd})
      if (sub->parsed()) overrides = parse_overrides(sub->remaining());
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  if (train_cmd->parsed()) return cmd_train(config_path, overrides, lanes, out, err);
  if (bench_cmd->parsed()) return cmd_bench(config_path, overrides, copy_baseline, lanes, out, err);
  if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, config_path, episodes, overrides, lanes, out, err);
  if (list_cmd->parsed()) return cmd_list_envs(out);
  return 2;
}

}  // namespace batchrl::cli
