#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "batchrl/environment.hpp"
#include "batchrl/trainer.hpp"

namespace batchrl::cli {

struct EnvSection {
  std::string name = "cartpole";
  std::size_t num_envs = 1024;
  std::size_t num_agents = 1;
  std::size_t episode_length = 0;  // 0: the environment's default T_max
  std::uint64_t seed = 0;
  EnvParams params;
  friend bool operator==(const EnvSection&, const EnvSection&) = default;
};

struct PolicySection {
  std::vector<std::size_t> hidden{64, 64};
  std::string head = "auto";  // auto | categorical | gaussian
  std::uint64_t seed = 0;
  friend bool operator==(const PolicySection&, const PolicySection&) = default;
};

struct TrainerSection {
  TrainerConfig config;
  std::size_t total_steps = 5'000'000;
  double max_wall_clock_s = 900;
  std::optional<double> target_reward;        // stop once a rollout's mean episodic reward reaches it
  std::optional<double> target_success_rate;  // or once this fraction of episodes terminate
};

struct BenchSection {
  std::vector<std::size_t> num_envs{16, 64, 256, 1024, 4096};
  std::size_t steps = 1000;
  std::size_t warmup = 32;
  std::size_t horizon = 32;
  std::size_t repeats = 3;  // timed blocks per row; the fastest is reported
  std::string policy = "random";  // random | loaded
  std::string checkpoint;         // used when policy is loaded
  std::size_t memory_cap_mb = 2048;
  bool with_copy_baseline = false;
  friend bool operator==(const BenchSection&, const BenchSection&) = default;
};

struct RunConfig {
  EnvSection env;
  PolicySection policy;
  TrainerSection trainer;
  BenchSection bench;
  std::string output_dir = "runs/latest";
};

bool operator==(const TrainerConfig& a, const TrainerConfig& b);
bool operator==(const TrainerSection& a, const TrainerSection& b);
bool operator==(const RunConfig& a, const RunConfig& b);

/// A dotted key path and its raw value, e.g. {"env.num_envs", "64"}. The
/// value is parsed as YAML, so lists are written as "[1, 2, 4]".
using Override = std::pair<std::string, std::string>;

/// Parse YAML text. Missing keys keep their defaults; unknown keys, malformed
/// values and unknown override paths throw ConfigError naming the key.
RunConfig parse_config(const std::string& yaml, const std::vector<Override>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});
/// Every field, so the text parses back to an equal RunConfig.
std::string to_yaml(const RunConfig& config);

/// Cross-field checks: known environment, valid params, trainer ranges,
/// head matching the action space. Throws ConfigError.
void validate(const RunConfig& config);

EnvBatchConfig env_batch_config(const RunConfig& config);
/// T_max after applying the environment default.
std::size_t resolved_episode_length(const EnvSection& env);

/// --lanes value if given, else BATCHRL_LANES, else the hardware thread count.
std::size_t resolve_lanes(std::optional<std::size_t> flag);

const char* build_id() noexcept;

/// Command bodies. Exit codes: 0 success, 2 configuration or usage error,
/// 3 runtime error. Messages go to `err`.
int cmd_train(const std::string& config_path, const std::vector<Override>& overrides,
              std::optional<std::size_t> lanes, std::ostream& out, std::ostream& err);
int cmd_bench(const std::string& config_path, const std::vector<Override>& overrides, bool with_copy_baseline,
              std::optional<std::size_t> lanes, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, std::size_t episodes,
             const std::vector<Override>& overrides, std::optional<std::size_t> lanes, std::ostream& out,
             std::ostream& err);
int cmd_list_envs(std::ostream& out);

/// Full command line (argv[0] included).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace batchrl::cli
