#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "batchrl/adam.hpp"
#include "batchrl/engine.hpp"
#include "batchrl/gae.hpp"
#include "batchrl/policy.hpp"

namespace batchrl {

enum class Algorithm { A2C, PPO };

struct TrainerConfig {
  Algorithm algorithm = Algorithm::PPO;
  double gamma = 0.99;
  double lambda = 0.95;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double clip_epsilon = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatches = 4;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-5;
  std::size_t rollout_length = 32;  // steps per replica between updates
  bool normalize_advantages = true;

  /// Throws InvalidParams when a field is out of range.
  void validate() const;
};

struct TrainStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double mean_advantage = 0;
  double grad_norm = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
  double rollout_s = 0;
  double train_s = 0;
};

/// Loss terms of one evaluation over a set of rollout rows.
struct LossTerms {
  double policy_loss = 0;
  double value_loss = 0;  // mean squared error, before value_coef
  double entropy = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
  double total = 0;  // policy_loss + value_coef * value_loss - entropy_coef * entropy
};

/// Actor-critic updates that read the rollout buffer in place. Minibatches are
/// lists of row indices into the [T, E, A] slabs; nothing is gathered.
///
/// Gradients are accumulated over fixed 256-row chunks and reduced in chunk
/// order, so results do not depend on the lane count.
class Trainer {
 public:
  static constexpr std::size_t kChunkRows = 256;

  Trainer(TrainerConfig config, Policy& policy, LanePool& pool, std::uint64_t shuffle_seed = 0);

  const TrainerConfig& config() const noexcept { return config_; }
  Policy& policy() noexcept { return *policy_; }

  /// GAE over the buffer, bootstrapping from the value of each replica's
  /// current observation; then per-batch advantage normalization, which
  /// evaluate() and the updates use.
  void compute_advantages(EnvBatch& batch, const RolloutBuffer& buffer);

  std::span<const float> advantages() const noexcept { return advantages_; }
  std::span<const float> returns() const noexcept { return returns_; }
  std::span<const float> normalized_advantages() const noexcept { return norm_advantages_; }
  /// Overwrite advantages / returns directly (tests and custom estimators).
  void set_targets(std::span<const float> advantages, std::span<const float> returns);

  /// One gradient step on the whole batch: -mean(logp * adv) + value_coef *
  /// mean((V - R)^2) - entropy_coef * mean(H).
  TrainStats a2c_update(const RolloutBuffer& buffer);

  /// epochs x minibatches steps of the clipped surrogate objective.
  TrainStats ppo_update(const RolloutBuffer& buffer);

  TrainStats update(const RolloutBuffer& buffer) {
    return config_.algorithm == Algorithm::PPO ? ppo_update(buffer) : a2c_update(buffer);
  }

  /// Loss on the given rows with the current parameters. With a non-empty
  /// `grad` the parameter gradient of `total` is written there. `clipped`
  /// selects the PPO surrogate instead of the plain policy gradient.
  LossTerms evaluate(const RolloutBuffer& buffer, std::span<const std::uint32_t> rows, bool clipped,
                     std::span<float> grad = {});

  /// Clip `grad` to max_grad_norm (global L2) and apply one Adam step.
  /// Returns the pre-clip norm.
  double apply_gradient(std::span<float> grad);

 private:
  void prepare(const RolloutBuffer& buffer);

  TrainerConfig config_;
  Policy* policy_;
  LanePool* pool_;
  Adam adam_;
  RngStream shuffle_rng_;

  std::size_t rows_ = 0;
  std::vector<float> advantages_;
  std::vector<float> returns_;
  std::vector<float> norm_advantages_;
  double mean_advantage_ = 0;
  std::vector<float> grad_;
  std::vector<std::uint32_t> order_;
  std::vector<float> bootstrap_;
  std::vector<float> chunk_grads_;       // [chunks, params]
  std::vector<LossTerms> chunk_terms_;
  std::vector<Policy::Workspace> lane_ws_;
  std::vector<std::vector<float>> lane_head_seed_;
  std::vector<std::vector<float>> lane_value_seed_;
};

struct CurvePoint {
  double wall_clock_s = 0;
  std::size_t env_steps = 0;
  double mean_episodic_reward = std::numeric_limits<double>::quiet_NaN();
  double mean_episodic_length = std::numeric_limits<double>::quiet_NaN();
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  // Not part of the CSV:
  std::size_t episodes = 0;
  double success_rate = std::numeric_limits<double>::quiet_NaN();
};

using LearningCurve = std::vector<CurvePoint>;

/// Header and rows: wall_clock_s, env_steps, mean_episodic_reward,
/// mean_episodic_length, policy_loss, value_loss, entropy.
void write_curve_csv(std::ostream& out, const LearningCurve& curve);

enum class TargetMetric { EpisodicReward, SuccessRate };

struct TrainBudget {
  std::size_t env_steps = 0;
  double wall_clock_s = std::numeric_limits<double>::infinity();
  /// Stop as soon as the metric reaches the target. It is taken over the most
  /// recent rollouts that together completed at least `target_episodes`
  /// episodes, so a few lucky episodes in a small batch do not count.
  std::optional<double> target;
  TargetMetric metric = TargetMetric::EpisodicReward;
  std::size_t target_episodes = 100;
  /// Called after every rollout+update with the point just recorded.
  std::function<void(const CurvePoint&)> on_point;
};

struct TrainSetup {
  EnvBatchConfig env;
  std::vector<std::size_t> hidden{64, 64};
  TrainerConfig trainer;
  std::uint64_t policy_seed = 0;
  std::size_t lanes = 1;
};

struct TrainResult {
  LearningCurve curve;
  Policy policy;
  bool reached_target = false;
  double time_to_target_s = std::numeric_limits<double>::infinity();
  std::size_t steps_to_target = 0;
  PhaseTimes times;
};

/// Policy shape for an environment: obs_dim and head from its spec.
NetworkShape network_for(const EnvSpec& spec, std::vector<std::size_t> hidden);

/// Alternate rollouts and updates until the step or wall-clock budget runs out
/// (or the target is met). Rollout data never leaves the store between the
/// two phases, so transfer time is zero.
TrainResult train(const TrainSetup& setup, const TrainBudget& budget);

}  // namespace batchrl
