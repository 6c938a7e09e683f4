#include "batchrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

namespace batchrl {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

}  // namespace

void TrainerConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, what); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) bad("gamma must lie in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) bad("lambda must lie in [0, 1]");
  if (!(clip_epsilon > 0.0)) bad("clip_epsilon must be > 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be > 0");
  if (!std::isfinite(entropy_coef) || !std::isfinite(value_coef)) bad("loss coefficients must be finite");
  if (epochs == 0) bad("epochs must be >= 1");
  if (minibatches == 0) bad("minibatches must be >= 1");
  if (!(max_grad_norm > 0.0)) bad("max_grad_norm must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    bad("adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) bad("adam_epsilon must be > 0");
  if (rollout_length == 0) bad("rollout_length must be >= 1");
}

Trainer::Trainer(TrainerConfig config, Policy& policy, LanePool& pool, std::uint64_t shuffle_seed)
    : config_(config),
      policy_(&policy),
      pool_(&pool),
      adam_(policy.size(), {config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon}),
      shuffle_rng_(shuffle_seed, {0, 0, StreamPurpose::Shuffle}) {
  config_.validate();
  const std::size_t W = pool.lanes();
  const std::size_t head = policy.shape().action_dim;
  for (std::size_t l = 0; l < W; ++l) {
    lane_ws_.push_back(policy.make_workspace(kChunkRows));
    lane_head_seed_.emplace_back(kChunkRows * head, 0.0f);
    lane_value_seed_.emplace_back(kChunkRows, 0.0f);
  }
  grad_.assign(policy.size(), 0.0f);
}

namespace {

/// Zero-mean / unit-std (population) copy of `in`; a plain copy when the std
/// is below 1e-8. Returns the raw mean.
double normalize(std::span<const float> in, std::span<float> out, bool enabled) {
  double sum = 0;
  for (float v : in) sum += v;
  const double mean = in.empty() ? 0.0 : sum / static_cast<double>(in.size());
  double var = 0;
  for (float v : in) var += (v - mean) * (v - mean);
  const double sd = in.empty() ? 0.0 : std::sqrt(var / static_cast<double>(in.size()));
  if (!enabled || sd < 1e-8) {
    std::copy(in.begin(), in.end(), out.begin());
  } else {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>((in[i] - mean) / sd);
  }
  return mean;
}

}  // namespace

void Trainer::prepare(const RolloutBuffer& buffer) {
  const std::size_t n = buffer.slab<float>(names::kValues).size();
  if (n != rows_) {
    rows_ = n;
    advantages_.assign(n, 0.0f);
    returns_.assign(n, 0.0f);
    norm_advantages_.assign(n, 0.0f);
    order_.resize(n);
  }
}

void Trainer::compute_advantages(EnvBatch& batch, const RolloutBuffer& buffer) {
  prepare(buffer);
  const std::size_t E = batch.num_envs();
  const std::size_t A = batch.num_agents();
  const std::size_t od = batch.obs_dim();
  if (policy_->shape().obs_dim != od)
    throw Error(ErrorCode::ShapeMismatch, "policy obs_dim differs from the environment's");

  // Bootstrap values of the observation after the last logged step.
  const std::size_t rows = E * A;
  bootstrap_.resize(rows);
  auto obs = batch.store().cview<float>(batch.obs_id());
  const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;
  const auto parts = partition_lanes(chunks, pool_->lanes());
  pool_->run([&](std::size_t lane) {
    auto& ws = lane_ws_[lane];
    for (std::size_t c = parts[lane].begin; c < parts[lane].end; ++c) {
      const std::size_t begin = c * kChunkRows;
      const std::size_t count = std::min(kChunkRows, rows - begin);
      policy_->forward(obs.subspan(begin * od, count * od), {}, count, ws);
      std::copy_n(ws.values.begin(), count, bootstrap_.begin() + static_cast<std::ptrdiff_t>(begin));
    }
  });

  const GaeShape shape{buffer.horizon(), E, A};
  compute_gae<float, float, float>(shape, buffer.slab<float>(names::kRewards), buffer.slab<float>(names::kValues),
                                   buffer.slab<std::uint8_t>(names::kDones),
                                   buffer.slab<std::uint8_t>(names::kTruncated),
                                   buffer.slab<float>(names::kTerminalValues), bootstrap_, config_.gamma,
                                   config_.lambda, advantages_, returns_);
  mean_advantage_ = normalize(advantages_, norm_advantages_, config_.normalize_advantages);
}

void Trainer::set_targets(std::span<const float> advantages, std::span<const float> returns) {
  if (advantages.size() != returns.size())
    throw Error(ErrorCode::ShapeMismatch, "advantages and returns differ in length");
  rows_ = advantages.size();
  advantages_.assign(advantages.begin(), advantages.end());
  returns_.assign(returns.begin(), returns.end());
  norm_advantages_.assign(rows_, 0.0f);
  order_.resize(rows_);
  mean_advantage_ = normalize(advantages_, norm_advantages_, config_.normalize_advantages);
}

LossTerms Trainer::evaluate(const RolloutBuffer& buffer, std::span<const std::uint32_t> rows, bool clipped,
                            std::span<float> grad) {
  const auto& shape = policy_->shape();
  const std::size_t od = shape.obs_dim;
  const std::size_t K = shape.action_dim;
  const bool discrete = shape.head == HeadKind::Categorical;
  const std::size_t P = policy_->size();
  const std::size_t n = rows.size();
  if (n == 0) throw Error(ErrorCode::InvalidParams, "evaluate needs at least one row");
  if (!grad.empty() && grad.size() != P) throw Error(ErrorCode::ShapeMismatch, "gradient size differs from the policy's");

  auto obs = buffer.slab<float>(names::kObservations);
  auto old_logp = buffer.slab<float>(names::kLogProbs);
  if (obs.size() != rows_ * od || old_logp.size() != rows_)
    throw Error(ErrorCode::ShapeMismatch, "rollout buffer does not match the prepared targets");
  std::span<const std::int32_t> disc;
  std::span<const float> cont;
  if (discrete)
    disc = buffer.slab<std::int32_t>(names::kActions);
  else
    cont = buffer.slab<float>(names::kActions);

  const bool want_grad = !grad.empty();
  const std::size_t chunks = (n + kChunkRows - 1) / kChunkRows;
  chunk_terms_.assign(chunks, LossTerms{});
  if (want_grad) chunk_grads_.assign(chunks * P, 0.0f);

  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = config_.clip_epsilon;
  const double ce = config_.entropy_coef;
  const double cv = config_.value_coef;
  const auto params = policy_->params();
  const std::size_t ls_off = policy_->log_std_offset();

  const auto parts = partition_lanes(chunks, pool_->lanes());
  pool_->run([&](std::size_t lane) {
    auto& ws = lane_ws_[lane];
    auto& hseed = lane_head_seed_[lane];
    auto& vseed = lane_value_seed_[lane];
    for (std::size_t c = parts[lane].begin; c < parts[lane].end; ++c) {
      const std::size_t begin = c * kChunkRows;
      const std::size_t count = std::min(kChunkRows, n - begin);
      auto idx = rows.subspan(begin, count);
      policy_->forward(obs, idx, count, ws);

      LossTerms t;
      std::span<float> g;
      if (want_grad) g = std::span<float>(chunk_grads_).subspan(c * P, P);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = idx[i];
        const double adv = norm_advantages_[r];
        const double v = ws.values[i];
        const double dv = v - static_cast<double>(returns_[r]);
        t.value_loss += dv * dv;
        vseed[i] = static_cast<float>(cv * 2.0 * dv * inv_n);

        double logp = 0, entropy = 0;
        std::span<const float> head(ws.head.data() + i * K, K);
        if (discrete) {
          const auto le = categorical_log_prob_entropy<float>(head, disc[r]);
          logp = le.log_prob;
          entropy = le.entropy;
        } else {
          const auto le = gaussian_log_prob_entropy<float, float>(head, policy_->log_std(), cont.subspan(r * K, K));
          logp = le.log_prob;
          entropy = le.entropy;
        }

        double g_logp;
        if (clipped) {
          const double log_ratio = logp - static_cast<double>(old_logp[r]);
          const double ratio = std::exp(log_ratio);
          const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
          const double unclipped_term = ratio * adv;
          const double clipped_term = clipped_ratio * adv;
          t.policy_loss -= std::min(unclipped_term, clipped_term);
          // The min picks the unclipped branch unless clipping lowers the term.
          g_logp = unclipped_term <= clipped_term ? -adv * ratio : 0.0;
          t.approx_kl += (ratio - 1.0) - log_ratio;
          t.clip_fraction += std::abs(ratio - 1.0) > eps ? 1.0 : 0.0;
        } else {
          t.policy_loss -= logp * adv;
          g_logp = -adv;
        }
        t.entropy += entropy;

        if (!want_grad) continue;
        float* hs = hseed.data() + i * K;
        if (discrete) {
          const double lse = log_sum_exp<float>(head);
          const auto a = static_cast<std::size_t>(disc[r]);
          for (std::size_t j = 0; j < K; ++j) {
            const double lpj = static_cast<double>(head[j]) - lse;
            const double pj = std::exp(lpj);
            const double d_logp = (j == a ? 1.0 : 0.0) - pj;
            // d(-H)/dz_j = p_j (log p_j + H)
            hs[j] = static_cast<float>((g_logp * d_logp + ce * pj * (lpj + entropy)) * inv_n);
          }
        } else {
          for (std::size_t d = 0; d < K; ++d) {
            const double raw = static_cast<double>(params[ls_off + d]);
            const double ls = clamp_log_std(raw);
            const double sigma = std::exp(ls);
            const double u = (static_cast<double>(cont[r * K + d]) - static_cast<double>(head[d])) / sigma;
            hs[d] = static_cast<float>(g_logp * u / sigma * inv_n);
            if (raw > kLogStdMin && raw < kLogStdMax)
              g[ls_off + d] += static_cast<float>((g_logp * (u * u - 1.0) - ce) * inv_n);
          }
        }
      }
      if (want_grad)
        policy_->backward(obs, idx, ws, std::span<const float>(hseed.data(), count * K),
                          std::span<const float>(vseed.data(), count), g);
      chunk_terms_[c] = t;
    }
  });

  // Fixed chunk-order reduction: independent of the lane count.
  LossTerms out;
  for (const auto& t : chunk_terms_) {
    out.policy_loss += t.policy_loss;
    out.value_loss += t.value_loss;
    out.entropy += t.entropy;
    out.approx_kl += t.approx_kl;
    out.clip_fraction += t.clip_fraction;
  }
  out.policy_loss *= inv_n;
  out.value_loss *= inv_n;
  out.entropy *= inv_n;
  out.approx_kl *= inv_n;
  out.clip_fraction *= inv_n;
  out.total = out.policy_loss + cv * out.value_loss - ce * out.entropy;
  if (!std::isfinite(out.total)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");

  if (want_grad) {
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0;
      for (std::size_t c = 0; c < chunks; ++c) s += static_cast<double>(chunk_grads_[c * P + p]);
      grad[p] = static_cast<float>(s);
    }
  }
  return out;
}

double Trainer::apply_gradient(std::span<float> grad) {
  double sq = 0;
  for (float g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteLoss, "gradient is not finite");
  if (norm > config_.max_grad_norm) {
    const double scale = config_.max_grad_norm / norm;
    for (float& g : grad) g = static_cast<float>(static_cast<double>(g) * scale);
  }
  adam_.step<float, float>(policy_->params(), grad);
  policy_->project();
  return norm;
}


TrainStats Trainer::a2c_update(const RolloutBuffer& buffer) {
  if (rows_ == 0) throw Error(ErrorCode::InvalidParams, "compute advantages before updating");
  const auto t0 = clock_type::now();
  TrainStats stats;
  stats.mean_advantage = mean_advantage_;
  std::iota(order_.begin(), order_.end(), 0u);
  std::fill(grad_.begin(), grad_.end(), 0.0f);
  const auto terms = evaluate(buffer, order_, false, grad_);
  stats.grad_norm = apply_gradient(grad_);
  stats.policy_loss = terms.policy_loss;
  stats.value_loss = terms.value_loss;
  stats.entropy = terms.entropy;
  stats.train_s = seconds_since(t0);
  return stats;
}

TrainStats Trainer::ppo_update(const RolloutBuffer& buffer) {
  if (rows_ == 0) throw Error(ErrorCode::InvalidParams, "compute advantages before updating");
  const std::size_t M = config_.minibatches;
  if (rows_ % M != 0)
    throw Error(ErrorCode::InvalidParams, "minibatch count " + std::to_string(M) + " does not divide E*A*T = " +
                                              std::to_string(rows_));
  const auto t0 = clock_type::now();
  TrainStats stats;
  stats.mean_advantage = mean_advantage_;
  std::iota(order_.begin(), order_.end(), 0u);
  const std::size_t mb = rows_ / M;
  std::size_t updates = 0;
  double norm_sum = 0;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = rows_; i > 1; --i) {
      const std::size_t j = shuffle_rng_.below(i);
      std::swap(order_[i - 1], order_[j]);
    }
    for (std::size_t m = 0; m < M; ++m) {
      std::fill(grad_.begin(), grad_.end(), 0.0f);
      const auto terms = evaluate(buffer, std::span<const std::uint32_t>(order_).subspan(m * mb, mb), true, grad_);
      norm_sum += apply_gradient(grad_);
      stats.policy_loss += terms.policy_loss;
      stats.value_loss += terms.value_loss;
      stats.entropy += terms.entropy;
      stats.approx_kl += terms.approx_kl;
      stats.clip_fraction += terms.clip_fraction;
      ++updates;
    }
  }
  const double k = static_cast<double>(updates);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.approx_kl /= k;
  stats.clip_fraction /= k;
  stats.grad_norm = norm_sum / k;
  stats.train_s = seconds_since(t0);
  return stats;
}

void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "wall_clock_s,env_steps,mean_episodic_reward,mean_episodic_length,policy_loss,value_loss,entropy\n";
  const auto old = out.precision(17);
  for (const auto& p : curve)
    out << p.wall_clock_s << ',' << p.env_steps << ',' << p.mean_episodic_reward << ','
        << p.mean_episodic_length << ',' << p.policy_loss << ',' << p.value_loss << ',' << p.entropy << '\n';
  out.precision(old);
}

NetworkShape network_for(const EnvSpec& spec, std::vector<std::size_t> hidden) {
  NetworkShape s;
  s.obs_dim = spec.obs_dim;
  s.hidden = std::move(hidden);
  s.head = spec.action.discrete ? HeadKind::Categorical : HeadKind::Gaussian;
  s.action_dim = spec.action.discrete ? spec.action.num_actions : spec.action.dim;
  return s;
}

TrainResult train(const TrainSetup& setup, const TrainBudget& budget) {
  setup.trainer.validate();
  TrainResult result;
  TensorStore store;
  EnvBatch batch(setup.env, store);
  store.finalize();
  RolloutBuffer buffer(store, setup.trainer.rollout_length);
  const std::size_t rows = setup.trainer.rollout_length * batch.num_envs() * batch.num_agents();
  if (setup.trainer.algorithm == Algorithm::PPO && rows % setup.trainer.minibatches != 0)
    throw Error(ErrorCode::InvalidParams, "minibatch count does not divide E*A*T = " + std::to_string(rows));

  result.policy = Policy(network_for(batch.spec(), setup.hidden));
  result.policy.init(setup.policy_seed);
  LanePool pool(std::max<std::size_t>(setup.lanes, 1));
  PolicySampler sampler(result.policy);
  Trainer trainer(setup.trainer, result.policy, pool, setup.env.seed);

  const auto start = clock_type::now();
  std::size_t steps = 0;
  const std::size_t per_rollout = setup.trainer.rollout_length * batch.num_envs();
  while (steps < budget.env_steps && seconds_since(start) < budget.wall_clock_s) {
    const auto stats = run_rollout(batch, sampler, buffer, pool, &result.times);
    steps += per_rollout;
    trainer.compute_advantages(batch, buffer);
    const auto ts = trainer.update(buffer);
    result.times.train_s += ts.train_s;

    CurvePoint p;
    p.wall_clock_s = seconds_since(start);
    p.env_steps = steps;
    p.mean_episodic_reward = stats.mean_episodic_reward;
    p.mean_episodic_length = stats.mean_episodic_length;
    p.policy_loss = ts.policy_loss;
    p.value_loss = ts.value_loss;
    p.entropy = ts.entropy;
    p.episodes = stats.episodes;
    p.success_rate = stats.success_rate();
    result.curve.push_back(p);
    if (budget.on_point) budget.on_point(p);

    if (budget.target) {
      // Walk back over the curve until the window holds enough episodes.
      double reward_sum = 0, success_sum = 0;
      std::size_t episodes = 0;
      const std::size_t need = std::max<std::size_t>(budget.target_episodes, 1);
      for (auto it = result.curve.rbegin(); it != result.curve.rend() && episodes < need; ++it) {
        if (it->episodes == 0) continue;
        episodes += it->episodes;
        reward_sum += it->mean_episodic_reward * static_cast<double>(it->episodes);
        success_sum += it->success_rate * static_cast<double>(it->episodes);
      }
      const double n = static_cast<double>(episodes);
      const double metric = budget.metric == TargetMetric::EpisodicReward ? reward_sum / n : success_sum / n;
      if (episodes >= need && metric >= *budget.target) {
        result.reached_target = true;
        result.time_to_target_s = p.wall_clock_s;
        result.steps_to_target = steps;
        break;
      }
    }
  }
  return result;
}

}  // namespace batchrl
