#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "batchrl/environment.hpp"
#include "batchrl/lanes.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/rng.hpp"
#include "batchrl/tensor_store.hpp"

namespace batchrl {

struct EnvBatchConfig {
  std::string env_name = "cartpole";
  std::size_t num_envs = 1;
  std::size_t num_agents = 1;
  std::size_t episode_length = 500;  // T_max; reaching it truncates the episode
  EnvParams params;
  std::uint64_t seed = 0;
};

/// Views into the store after a step.
struct StepOutcome {
  std::span<const float> rewards;            // [E, A]
  std::span<const std::uint8_t> dones;       // [E]
  std::span<const std::uint8_t> truncated;   // [E]
  std::span<const std::int32_t> episode_step;  // [E]
};

struct PhaseTimes {
  double inference_s = 0;
  double step_s = 0;
  double reset_s = 0;
  double train_s = 0;
  double transfer_s = 0;
  double total() const { return inference_s + step_s + reset_s + train_s + transfer_s; }
};

struct RolloutStats {
  double mean_episodic_reward = std::numeric_limits<double>::quiet_NaN();
  double mean_episodic_length = std::numeric_limits<double>::quiet_NaN();
  std::size_t episodes = 0;
  std::size_t terminated = 0;  // episodes that ended in a terminal state, not by truncation
  std::size_t steps = 0;       // environment steps, E * T

  double success_rate() const {
    return episodes == 0 ? std::numeric_limits<double>::quiet_NaN()
                         : static_cast<double>(terminated) / static_cast<double>(episodes);
  }
};

class EnvBatch;

/// Produces actions, log-probabilities and value estimates for a range of
/// environments. Called concurrently from every lane with disjoint ranges.
class ActionSampler {
 public:
  virtual ~ActionSampler() = default;
  /// Size per-lane scratch for the batch's lane partition. Called before use
  /// and whenever the lane count changes.
  virtual void prepare(const EnvBatch& batch, std::span<const LaneRange> ranges) = 0;
  virtual void act(EnvBatch& batch, LaneRange range, std::size_t lane) = 0;
  /// Value estimate of env `env`'s current observation, one per agent.
  virtual void values_of(EnvBatch& batch, std::size_t env, std::size_t lane, std::span<float> out) = 0;
};

/// Uniform random actions; values are zero.
class RandomSampler final : public ActionSampler {
 public:
  void prepare(const EnvBatch&, std::span<const LaneRange>) override {}
  void act(EnvBatch& batch, LaneRange range, std::size_t lane) override;
  void values_of(EnvBatch&, std::size_t, std::size_t, std::span<float> out) override;
};

/// Batched inference with a policy network: one forward pass per lane over all
/// agents of its environment range, then per-agent sampling from the agent's
/// action stream (or the distribution mode when greedy).
class PolicySampler final : public ActionSampler {
 public:
  explicit PolicySampler(const Policy& policy, bool greedy = false) : policy_(&policy), greedy_(greedy) {}

  void prepare(const EnvBatch& batch, std::span<const LaneRange> ranges) override;
  void act(EnvBatch& batch, LaneRange range, std::size_t lane) override;
  void values_of(EnvBatch& batch, std::size_t env, std::size_t lane, std::span<float> out) override;

 private:
  const Policy* policy_;
  bool greedy_;
  std::vector<Policy::Workspace> workspaces_;
};

/// A batch of E independent replicas of one environment, all living in a
/// shared TensorStore. Built by make_batch: the environment registers its
/// arrays, the engine registers the common ones (obs, actions, log_probs,
/// values, rewards, dones, truncated, terminal_values, episode bookkeeping),
/// and every replica is reset.
class EnvBatch {
 public:
  EnvBatch(const EnvBatchConfig& config, TensorStore& store);
  EnvBatch(const EnvBatch&) = delete;
  EnvBatch& operator=(const EnvBatch&) = delete;

  const EnvBatchConfig& config() const noexcept { return config_; }
  const EnvSpec& spec() const noexcept { return env_->spec(); }
  Environment& environment() noexcept { return *env_; }
  TensorStore& store() noexcept { return *store_; }
  const TensorStore& store() const noexcept { return *store_; }
  std::size_t num_envs() const noexcept { return config_.num_envs; }
  std::size_t num_agents() const noexcept { return config_.num_agents; }
  std::size_t obs_dim() const noexcept { return spec().obs_dim; }
  std::size_t act_dim() const noexcept { return spec().action.act_dim(); }

  ArrayId obs_id() const noexcept { return obs_; }
  ArrayId actions_id() const noexcept { return actions_; }

  std::span<float> observations() { return store_->view<float>(obs_); }
  std::span<std::int32_t> discrete_actions() { return store_->view<std::int32_t>(actions_); }
  std::span<float> continuous_actions() { return store_->view<float>(actions_); }
  std::span<float> log_probs() { return store_->view<float>(log_probs_); }
  std::span<float> values() { return store_->view<float>(values_); }
  std::span<float> terminal_values() { return store_->view<float>(terminal_values_); }
  StepOutcome outcome() const;

  RngStream& action_rng(std::size_t env, std::size_t agent) {
    return action_rng_[env * config_.num_agents + agent];
  }
  RngStream& reset_rng(std::size_t env) { return reset_rng_[env]; }

  /// Contiguous lane partition for `lanes` workers, computed once per count.
  std::span<const LaneRange> lane_ranges(std::size_t lanes);

  /// Step every replica with the actions currently in the store.
  StepOutcome step_all(LanePool& pool, ActionSampler* bootstrap = nullptr);
  /// Write `actions` ([E, A, act_dim]) into the store, then step every replica.
  StepOutcome step_all(std::span<const std::int32_t> actions, LanePool& pool);
  StepOutcome step_all(std::span<const float> actions, LanePool& pool);

  /// Re-initialize, in place, every replica whose done flag is set.
  void auto_reset(LanePool& pool);

  /// Lane-level pieces of step_all / auto_reset.
  void step_range(LaneRange range, std::size_t lane, ActionSampler* bootstrap);
  void reset_range(LaneRange range);
  void reset_env(std::size_t env);

  /// Clear the per-replica completed-episode accumulators.
  void begin_stats();
  /// Reduce the accumulators in environment order.
  RolloutStats collect_stats(std::size_t steps) const;

  std::size_t base_params_bytes() const { return env_->base_params_bytes(); }
  /// Bytes of constant-role arrays (per-replica variations).
  std::size_t variation_bytes() const;

 private:
  EnvSlot slot(std::size_t env);
  void validate_actions(std::size_t env) const;

  EnvBatchConfig config_;
  TensorStore* store_;
  std::unique_ptr<Environment> env_;

  ArrayId obs_, actions_, log_probs_, values_, rewards_, dones_, truncated_, terminal_values_;
  ArrayId episode_step_, episode_return_, completed_, terminated_count_, return_sum_, length_sum_;

  std::vector<RngStream> reset_rng_;
  std::vector<RngStream> dynamics_rng_;
  std::vector<RngStream> action_rng_;

  std::size_t cached_lanes_ = 0;
  std::vector<LaneRange> ranges_;
};

/// Fill `buffer` with T steps: for each t, infer actions, record the step
/// inputs, step all replicas, record the outcomes (including bootstrap values
/// for truncated episodes), auto-reset. Statistics cover the episodes that
/// completed during this rollout.
RolloutStats run_rollout(EnvBatch& batch, ActionSampler& sampler, RolloutBuffer& buffer,
                         LanePool& pool, PhaseTimes* times = nullptr);

}  // namespace batchrl
