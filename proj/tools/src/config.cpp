#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "batchrl/cli.hpp"
#include "batchrl/lanes.hpp"

#ifndef BATCHRL_BUILD_ID
#define BATCHRL_BUILD_ID "unknown"
#endif

namespace batchrl::cli {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

/// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

/// Reads the keys of one map node and rejects any it was not asked about.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) config_error("'" + path_ + "' must be a map");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      config_error("bad value for '" + join(path_, key) + "'");
    }
  }

  void get_size(const std::string& key, std::size_t& out) {
    double v = static_cast<double>(out);
    get(key, v);
    if (!(v >= 0) || v != std::floor(v) || v > 9.0e15) config_error("'" + join(path_, key) + "' must be a non-negative integer");
    out = static_cast<std::size_t>(v);
  }

  void get_u64(const std::string& key, std::uint64_t& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull() || !node_[key]) return;
    try {
      out = node_[key].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      config_error("'" + join(path_, key) + "' must be a non-negative integer");
    }
  }

  void get_optional(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    if (v.IsNull()) {
      out.reset();
      return;
    }
    double d = 0;
    get(key, d);
    out = d;
  }

  void get_sizes(const std::string& key, std::vector<std::size_t>& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull() || !node_[key]) return;
    const YAML::Node v = node_[key];
    if (!v.IsSequence()) config_error("'" + join(path_, key) + "' must be a list");
    std::vector<std::size_t> vals;
    for (const auto& item : v) {
      double d = -1;
      try {
        d = item.as<double>();
      } catch (const YAML::Exception&) {
      }
      if (!(d >= 0) || d != std::floor(d)) config_error("'" + join(path_, key) + "' must hold non-negative integers");
      vals.push_back(static_cast<std::size_t>(d));
    }
    out = std::move(vals);
  }

  void get_params(const std::string& key, EnvParams& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull() || !node_[key] || node_[key].IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v.IsMap()) config_error("'" + join(path_, key) + "' must be a map");
    out.clear();
    for (const auto& kv : v) {
      const auto name = kv.first.as<std::string>();
      try {
        out[name] = kv.second.as<double>();
      } catch (const YAML::Exception&) {
        config_error("bad value for '" + join(join(path_, key), name) + "'");
      }
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) config_error("unknown key '" + join(path_, key) + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void apply_override(YAML::Node& root, const Override& o) {
  const std::string& path = o.first;
  if (path.empty() || path.front() == '.' || path.back() == '.') config_error("bad override key '" + path + "'");
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) config_error("bad override key '" + path + "'");
    parts.push_back(part);
  }
  YAML::Node value;
  try {
    value = YAML::Load(o.second);
  } catch (const YAML::Exception&) {
    config_error("bad value for '" + path + "'");
  }
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node parent = chain.back();
    if (!parent[parts[i]] || parent[parts[i]].IsNull()) parent[parts[i]] = YAML::Node(YAML::NodeType::Map);
    if (!parent[parts[i]].IsMap()) config_error("override '" + path + "' descends into a scalar");
    chain.push_back(parent[parts[i]]);
  }
  chain.back()[parts.back()] = value;
}

void from_node(const YAML::Node& root, RunConfig& c) {
  if (root && !root.IsNull() && !root.IsMap()) config_error("config must be a map of sections");
  Section top(root, "");

  Section env(top.child("env"), "env");
  env.get("name", c.env.name);
  env.get_size("num_envs", c.env.num_envs);
  env.get_size("num_agents", c.env.num_agents);
  env.get_size("episode_length", c.env.episode_length);
  env.get_u64("seed", c.env.seed);
  env.get_params("params", c.env.params);
  env.finish();

  Section pol(top.child("policy"), "policy");
  pol.get_sizes("hidden", c.policy.hidden);
  pol.get("head", c.policy.head);
  pol.get_u64("seed", c.policy.seed);
  pol.finish();

  Section tr(top.child("trainer"), "trainer");
  auto& tc = c.trainer.config;
  std::string algo = tc.algorithm == Algorithm::PPO ? "ppo" : "a2c";
  tr.get("algorithm", algo);
  if (algo == "ppo")
    tc.algorithm = Algorithm::PPO;
  else if (algo == "a2c")
    tc.algorithm = Algorithm::A2C;
  else
    config_error("'trainer.algorithm' must be ppo or a2c, got '" + algo + "'");
  tr.get("gamma", tc.gamma);
  tr.get("lambda", tc.lambda);
  tr.get("learning_rate", tc.learning_rate);
  tr.get("entropy_coef", tc.entropy_coef);
  tr.get("value_coef", tc.value_coef);
  tr.get("clip_epsilon", tc.clip_epsilon);
  tr.get_size("epochs", tc.epochs);
  tr.get_size("minibatches", tc.minibatches);
  tr.get("max_grad_norm", tc.max_grad_norm);
  tr.get("adam_beta1", tc.adam_beta1);
  tr.get("adam_beta2", tc.adam_beta2);
  tr.get("adam_epsilon", tc.adam_epsilon);
  tr.get_size("rollout_length", tc.rollout_length);
  tr.get("normalize_advantages", tc.normalize_advantages);
  tr.get_size("total_steps", c.trainer.total_steps);
  tr.get("max_wall_clock_s", c.trainer.max_wall_clock_s);
  tr.get_optional("target_reward", c.trainer.target_reward);
  tr.get_optional("target_success_rate", c.trainer.target_success_rate);
  tr.finish();

  Section b(top.child("bench"), "bench");
  b.get_sizes("num_envs", c.bench.num_envs);
  b.get_size("steps", c.bench.steps);
  b.get_size("warmup", c.bench.warmup);
  b.get_size("horizon", c.bench.horizon);
  b.get_size("repeats", c.bench.repeats);
  b.get("policy", c.bench.policy);
  b.get("checkpoint", c.bench.checkpoint);
  b.get_size("memory_cap_mb", c.bench.memory_cap_mb);
  b.get("with_copy_baseline", c.bench.with_copy_baseline);
  b.finish();

  top.get("output_dir", c.output_dir);
  top.finish();
}

}  // namespace

bool operator==(const TrainerConfig& a, const TrainerConfig& b) {
  return a.algorithm == b.algorithm && a.gamma == b.gamma && a.lambda == b.lambda &&
         a.learning_rate == b.learning_rate && a.entropy_coef == b.entropy_coef && a.value_coef == b.value_coef &&
         a.clip_epsilon == b.clip_epsilon && a.epochs == b.epochs && a.minibatches == b.minibatches &&
         a.max_grad_norm == b.max_grad_norm && a.adam_beta1 == b.adam_beta1 && a.adam_beta2 == b.adam_beta2 &&
         a.adam_epsilon == b.adam_epsilon && a.rollout_length == b.rollout_length &&
         a.normalize_advantages == b.normalize_advantages;
}

bool operator==(const TrainerSection& a, const TrainerSection& b) {
  return a.config == b.config && a.total_steps == b.total_steps && a.max_wall_clock_s == b.max_wall_clock_s &&
         a.target_reward == b.target_reward && a.target_success_rate == b.target_success_rate;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.env == b.env && a.policy == b.policy && a.trainer == b.trainer && a.bench == b.bench &&
         a.output_dir == b.output_dir;
}

RunConfig parse_config(const std::string& yaml, const std::vector<Override>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    config_error(std::string("malformed config: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) config_error("config must be a map of sections");
  for (const auto& o : overrides) apply_override(root, o);
  RunConfig c;
  from_node(root, c);
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string to_yaml(const RunConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << c.env.name;
  e << YAML::Key << "num_envs" << YAML::Value << c.env.num_envs;
  e << YAML::Key << "num_agents" << YAML::Value << c.env.num_agents;
  e << YAML::Key << "episode_length" << YAML::Value << c.env.episode_length;
  e << YAML::Key << "seed" << YAML::Value << c.env.seed;
  e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : c.env.params) e << YAML::Key << k << YAML::Value << num(v);
  e << YAML::EndMap << YAML::EndMap;

  e << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "hidden" << YAML::Value << YAML::Flow << c.policy.hidden;
  e << YAML::Key << "head" << YAML::Value << c.policy.head;
  e << YAML::Key << "seed" << YAML::Value << c.policy.seed;
  e << YAML::EndMap;

  const auto& t = c.trainer.config;
  e << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "algorithm" << YAML::Value << (t.algorithm == Algorithm::PPO ? "ppo" : "a2c");
  e << YAML::Key << "gamma" << YAML::Value << num(t.gamma);
  e << YAML::Key << "lambda" << YAML::Value << num(t.lambda);
  e << YAML::Key << "learning_rate" << YAML::Value << num(t.learning_rate);
  e << YAML::Key << "entropy_coef" << YAML::Value << num(t.entropy_coef);
  e << YAML::Key << "value_coef" << YAML::Value << num(t.value_coef);
  e << YAML::Key << "clip_epsilon" << YAML::Value << num(t.clip_epsilon);
  e << YAML::Key << "epochs" << YAML::Value << t.epochs;
  e << YAML::Key << "minibatches" << YAML::Value << t.minibatches;
  e << YAML::Key << "max_grad_norm" << YAML::Value << num(t.max_grad_norm);
  e << YAML::Key << "adam_beta1" << YAML::Value << num(t.adam_beta1);
  e << YAML::Key << "adam_beta2" << YAML::Value << num(t.adam_beta2);
  e << YAML::Key << "adam_epsilon" << YAML::Value << num(t.adam_epsilon);
  e << YAML::Key << "rollout_length" << YAML::Value << t.rollout_length;
  e << YAML::Key << "normalize_advantages" << YAML::Value << t.normalize_advantages;
  e << YAML::Key << "total_steps" << YAML::Value << c.trainer.total_steps;
  e << YAML::Key << "max_wall_clock_s" << YAML::Value << num(c.trainer.max_wall_clock_s);
  e << YAML::Key << "target_reward" << YAML::Value;
  if (c.trainer.target_reward)
    e << num(*c.trainer.target_reward);
  else
    e << YAML::Null;
  e << YAML::Key << "target_success_rate" << YAML::Value;
  if (c.trainer.target_success_rate)
    e << num(*c.trainer.target_success_rate);
  else
    e << YAML::Null;
  e << YAML::EndMap;

  e << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "num_envs" << YAML::Value << YAML::Flow << c.bench.num_envs;
  e << YAML::Key << "steps" << YAML::Value << c.bench.steps;
  e << YAML::Key << "warmup" << YAML::Value << c.bench.warmup;
  e << YAML::Key << "horizon" << YAML::Value << c.bench.horizon;
  e << YAML::Key << "repeats" << YAML::Value << c.bench.repeats;
  e << YAML::Key << "policy" << YAML::Value << c.bench.policy;
  e << YAML::Key << "checkpoint" << YAML::Value << c.bench.checkpoint;
  e << YAML::Key << "memory_cap_mb" << YAML::Value << c.bench.memory_cap_mb;
  e << YAML::Key << "with_copy_baseline" << YAML::Value << c.bench.with_copy_baseline;
  e << YAML::EndMap;

  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::size_t resolved_episode_length(const EnvSection& env) {
  return env.episode_length != 0 ? env.episode_length : find_environment(env.name).default_episode_length;
}

EnvBatchConfig env_batch_config(const RunConfig& c) {
  EnvBatchConfig b;
  b.env_name = c.env.name;
  b.num_envs = c.env.num_envs;
  b.num_agents = c.env.num_agents;
  b.episode_length = resolved_episode_length(c.env);
  b.params = c.env.params;
  b.seed = c.env.seed;
  return b;
}

void validate(const RunConfig& c) {
  try {
    if (c.env.num_envs == 0) config_error("'env.num_envs' must be >= 1");
    if (c.env.num_agents == 0) config_error("'env.num_agents' must be >= 1");
    auto env = make_environment(c.env.name, c.env.params, c.env.num_agents);
    c.trainer.config.validate();
    if (!(c.trainer.max_wall_clock_s >= 0)) config_error("'trainer.max_wall_clock_s' must be >= 0");
    const auto& space = env->spec().action;
    if (c.policy.head != "auto" && c.policy.head != "categorical" && c.policy.head != "gaussian")
      config_error("'policy.head' must be auto, categorical or gaussian");
    if ((c.policy.head == "categorical" && !space.discrete) || (c.policy.head == "gaussian" && space.discrete))
      config_error("'policy.head' " + c.policy.head + " does not fit the action space of " + c.env.name);
    for (std::size_t h : c.policy.hidden)
      if (h == 0) config_error("'policy.hidden' widths must be >= 1");
    if (c.bench.policy != "random" && c.bench.policy != "loaded")
      config_error("'bench.policy' must be random or loaded");
    if (c.bench.policy == "loaded" && c.bench.checkpoint.empty())
      config_error("'bench.checkpoint' is required when bench.policy is loaded");
    if (c.bench.horizon == 0) config_error("'bench.horizon' must be >= 1");
    if (c.bench.repeats == 0) config_error("'bench.repeats' must be >= 1");
    for (std::size_t e : c.bench.num_envs)
      if (e == 0) config_error("'bench.num_envs' entries must be >= 1");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
}

std::size_t resolve_lanes(std::optional<std::size_t> flag) {
  if (flag) {
    if (*flag == 0) config_error("--lanes must be >= 1");
    return *flag;
  }
  return default_lane_count();
}

const char* build_id() noexcept { return BATCHRL_BUILD_ID; }

}  // namespace batchrl::cli
