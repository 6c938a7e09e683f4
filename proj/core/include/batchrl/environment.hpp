#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "batchrl/rng.hpp"
#include "batchrl/tensor_store.hpp"

namespace batchrl {

struct ActionSpace {
  bool discrete = true;
  std::size_t num_actions = 2;  // discrete
  std::size_t dim = 1;          // continuous
  float low = -1.0f;            // continuous bounds, per component
  float high = 1.0f;

  std::size_t act_dim() const noexcept { return discrete ? 1 : dim; }

  static ActionSpace categorical(std::size_t n) { return {true, n, 1, 0.0f, 0.0f}; }
  static ActionSpace box(std::size_t d, float lo, float hi) { return {false, 0, d, lo, hi}; }
};

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t num_agents = 1;
  ActionSpace action;
};

/// Environment parameter overrides, keyed by parameter name.
using EnvParams = std::map<std::string, double>;

struct BatchShape {
  std::size_t num_envs = 1;
  std::size_t num_agents = 1;
  std::size_t episode_length = 500;
  std::uint64_t seed = 0;
};

/// Everything one replica may touch during reset or step. Spans cover only
/// this replica's slice of the shared arrays.
struct EnvSlot {
  std::size_t env = 0;
  TensorStore* store = nullptr;
  RngStream* reset_rng = nullptr;
  RngStream* dynamics_rng = nullptr;
  std::span<float> obs;                          // [A * obs_dim]
  std::span<float> rewards;                      // [A]
  std::span<const std::int32_t> discrete_actions;  // [A]
  std::span<const float> continuous_actions;       // [A * dim]
};

/// The environment contract. An environment registers its own state arrays
/// with the store in bind(), then only ever reads and writes slices of the
/// replica it is handed. Implementations hold their base parameters once and
/// keep per-replica variations in a constant store array.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;

  /// Register state arrays and materialize per-replica variations.
  virtual void bind(TensorStore& store, const BatchShape& shape) = 0;

  /// Draw a fresh initial state for slot.env and write its observation.
  virtual void reset(EnvSlot& slot) = 0;

  /// Advance slot.env one step; writes observation and rewards and returns
  /// true when the episode terminated (truncation is the engine's job).
  /// Actions have already been validated against spec().action.
  virtual bool step(EnvSlot& slot) = 0;

  /// Bytes held for the shared base configuration. Independent of num_envs.
  virtual std::size_t base_params_bytes() const = 0;
};

struct ParamInfo {
  std::string name;
  double default_value;
  std::string help;
};

struct EnvInfo {
  std::string name;
  std::string description;
  std::vector<ParamInfo> params;
  std::function<std::unique_ptr<Environment>(const EnvParams&, std::size_t num_agents)> make;
  std::size_t default_episode_length = 500;  // T_max used when a config leaves it unset
};

/// Registry of built-in environments keyed by canonical name.
const std::vector<EnvInfo>& environment_registry();
const EnvInfo& find_environment(std::string_view name);
std::vector<std::string> environment_names();

/// Build an environment; rejects unknown names and unknown parameter keys.
std::unique_ptr<Environment> make_environment(std::string_view name, const EnvParams& params,
                                              std::size_t num_agents);

/// Resolve a parameter from overrides against the registry defaults.
double param_or_default(const EnvInfo& info, const EnvParams& params, std::string_view key);

}  // namespace batchrl
