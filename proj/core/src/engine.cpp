#include "batchrl/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace batchrl {

EnvBatch::EnvBatch(const EnvBatchConfig& config, TensorStore& store) : config_(config), store_(&store) {
  if (config.num_envs == 0) throw Error(ErrorCode::InvalidParams, "num_envs must be >= 1");
  if (config.num_agents == 0) throw Error(ErrorCode::InvalidParams, "num_agents must be >= 1");
  if (config.episode_length == 0) throw Error(ErrorCode::InvalidParams, "episode_length must be >= 1");
  if (config.num_envs > UINT32_MAX || config.num_agents > 0xFFFFFF)
    throw Error(ErrorCode::InvalidParams, "batch too large");
  if (store.finalized()) throw Error(ErrorCode::StoreFinalized, "make_batch needs an open store");

  env_ = make_environment(config.env_name, config.params, config.num_agents);
  const auto& sp = env_->spec();
  if (sp.num_agents != config.num_agents)
    throw Error(ErrorCode::InvalidParams, "environment reports a different agent count");

  const std::size_t E = config.num_envs;
  const std::size_t A = config.num_agents;
  const auto B = LogPoint::BeforeStep;
  const auto After = LogPoint::AfterStep;
  obs_ = store.register_array({std::string(names::kObservations), {E, A, sp.obs_dim}, ElementKind::Float32, Role::Logged, B});
  actions_ = store.register_array({std::string(names::kActions), {E, A, sp.action.act_dim()},
                                   sp.action.discrete ? ElementKind::Int32 : ElementKind::Float32, Role::Logged, B});
  log_probs_ = store.register_array({std::string(names::kLogProbs), {E, A}, ElementKind::Float32, Role::Logged, B});
  values_ = store.register_array({std::string(names::kValues), {E, A}, ElementKind::Float32, Role::Logged, B});
  rewards_ = store.register_array({std::string(names::kRewards), {E, A}, ElementKind::Float32, Role::Logged, After});
  dones_ = store.register_array({std::string(names::kDones), {E}, ElementKind::Boolean, Role::Logged, After});
  truncated_ = store.register_array({std::string(names::kTruncated), {E}, ElementKind::Boolean, Role::Logged, After});
  terminal_values_ = store.register_array({std::string(names::kTerminalValues), {E, A}, ElementKind::Float32, Role::Logged, After});
  episode_step_ = store.register_array({"episode.step", {E}, ElementKind::Int32, Role::State});
  episode_return_ = store.register_array({"episode.return", {E}, ElementKind::Float64, Role::State});
  completed_ = store.register_array({"episode.completed", {E}, ElementKind::Int32, Role::State});
  terminated_count_ = store.register_array({"episode.terminated", {E}, ElementKind::Int32, Role::State});
  return_sum_ = store.register_array({"episode.return_sum", {E}, ElementKind::Float64, Role::State});
  length_sum_ = store.register_array({"episode.length_sum", {E}, ElementKind::Float64, Role::State});

  env_->bind(store, {E, A, config.episode_length, config.seed});

  reset_rng_.resize(E);
  dynamics_rng_.resize(E);
  action_rng_.resize(E * A);
  for (std::size_t e = 0; e < E; ++e) {
    const auto ei = static_cast<std::uint32_t>(e);
    reset_rng_[e].reseed(config.seed, {ei, 0, StreamPurpose::Reset});
    dynamics_rng_[e].reseed(config.seed, {ei, 0, StreamPurpose::Dynamics});
    for (std::size_t a = 0; a < A; ++a)
      action_rng_[e * A + a].reseed(config.seed, {ei, static_cast<std::uint32_t>(a), StreamPurpose::Action});
  }
  for (std::size_t e = 0; e < E; ++e) reset_env(e);
}

StepOutcome EnvBatch::outcome() const {
  return {store_->cview<float>(rewards_), store_->cview<std::uint8_t>(dones_),
          store_->cview<std::uint8_t>(truncated_), store_->cview<std::int32_t>(episode_step_)};
}

std::span<const LaneRange> EnvBatch::lane_ranges(std::size_t lanes) {
  if (lanes != cached_lanes_) {
    ranges_ = partition_lanes(config_.num_envs, lanes);
    cached_lanes_ = lanes;
  }
  return ranges_;
}

EnvSlot EnvBatch::slot(std::size_t env) {
  EnvSlot s;
  s.env = env;
  s.store = store_;
  s.reset_rng = &reset_rng_[env];
  s.dynamics_rng = &dynamics_rng_[env];
  s.obs = store_->env_slice<float>(obs_, env);
  s.rewards = store_->env_slice<float>(rewards_, env);
  if (spec().action.discrete)
    s.discrete_actions = store_->env_cslice<std::int32_t>(actions_, env);
  else
    s.continuous_actions = store_->env_cslice<float>(actions_, env);
  return s;
}

void EnvBatch::validate_actions(std::size_t env) const {
  const auto& space = spec().action;
  if (space.discrete) {
    for (std::int32_t a : store_->env_cslice<std::int32_t>(actions_, env))
      if (a < 0 || static_cast<std::size_t>(a) >= space.num_actions)
        throw Error(ErrorCode::InvalidAction, "env " + std::to_string(env) + ": discrete action " +
                                                  std::to_string(a) + " outside [0, " +
                                                  std::to_string(space.num_actions) + ")");
  } else {
    for (float a : store_->env_cslice<float>(actions_, env))
      if (!std::isfinite(a))
        throw Error(ErrorCode::InvalidAction, "env " + std::to_string(env) + ": non-finite action");
  }
}

void EnvBatch::step_range(LaneRange range, std::size_t lane, ActionSampler* bootstrap) {
  auto steps = store_->view<std::int32_t>(episode_step_);
  auto dones = store_->view<std::uint8_t>(dones_);
  auto truncated = store_->view<std::uint8_t>(truncated_);
  auto ep_return = store_->view<double>(episode_return_);
  auto completed = store_->view<std::int32_t>(completed_);
  auto terminated_count = store_->view<std::int32_t>(terminated_count_);
  auto return_sum = store_->view<double>(return_sum_);
  auto length_sum = store_->view<double>(length_sum_);
  const std::size_t A = config_.num_agents;
  const auto t_max = static_cast<std::int32_t>(std::min<std::size_t>(config_.episode_length, INT32_MAX));

  for (std::size_t e = range.begin; e < range.end; ++e) {
    validate_actions(e);
    EnvSlot s = slot(e);
    const bool terminated = env_->step(s);
    const std::int32_t n = ++steps[e];
    const bool trunc = !terminated && n >= t_max;
    dones[e] = terminated || trunc;
    truncated[e] = trunc;

    double reward = 0;
    for (std::size_t a = 0; a < A; ++a) reward += s.rewards[a];
    ep_return[e] += reward / static_cast<double>(A);

    auto tv = store_->env_slice<float>(terminal_values_, e);
    if (trunc && bootstrap != nullptr)
      bootstrap->values_of(*this, e, lane, tv);
    else
      std::fill(tv.begin(), tv.end(), 0.0f);

    if (dones[e]) {
      completed[e] += 1;
      terminated_count[e] += terminated ? 1 : 0;
      return_sum[e] += ep_return[e];
      length_sum[e] += n;
    }
  }
}

StepOutcome EnvBatch::step_all(LanePool& pool, ActionSampler* bootstrap) {
  const auto ranges = lane_ranges(pool.lanes());
  pool.run([&](std::size_t lane) { step_range(ranges[lane], lane, bootstrap); });
  return outcome();
}

StepOutcome EnvBatch::step_all(std::span<const std::int32_t> actions, LanePool& pool) {
  auto dst = discrete_actions();
  if (actions.size() != dst.size())
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(dst.size()) + " actions");
  std::copy(actions.begin(), actions.end(), dst.begin());
  return step_all(pool);
}

StepOutcome EnvBatch::step_all(std::span<const float> actions, LanePool& pool) {
  auto dst = continuous_actions();
  if (actions.size() != dst.size())
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(dst.size()) + " action values");
  std::copy(actions.begin(), actions.end(), dst.begin());
  return step_all(pool);
}

void EnvBatch::reset_env(std::size_t env) {
  EnvSlot s = slot(env);
  env_->reset(s);
  store_->env_slice<std::int32_t>(episode_step_, env)[0] = 0;
  store_->env_slice<double>(episode_return_, env)[0] = 0.0;
}

void EnvBatch::reset_range(LaneRange range) {
  const auto dones = store_->cview<std::uint8_t>(dones_);
  for (std::size_t e = range.begin; e < range.end; ++e)
    if (dones[e]) reset_env(e);
}

void EnvBatch::auto_reset(LanePool& pool) {
  const auto ranges = lane_ranges(pool.lanes());
  pool.run([&](std::size_t lane) { reset_range(ranges[lane]); });
}

void EnvBatch::begin_stats() {
  auto completed = store_->view<std::int32_t>(completed_);
  auto terminated_count = store_->view<std::int32_t>(terminated_count_);
  auto return_sum = store_->view<double>(return_sum_);
  auto length_sum = store_->view<double>(length_sum_);
  std::fill(completed.begin(), completed.end(), 0);
  std::fill(terminated_count.begin(), terminated_count.end(), 0);
  std::fill(return_sum.begin(), return_sum.end(), 0.0);
  std::fill(length_sum.begin(), length_sum.end(), 0.0);
}

RolloutStats EnvBatch::collect_stats(std::size_t steps) const {
  const auto completed = store_->cview<std::int32_t>(completed_);
  const auto terminated_count = store_->cview<std::int32_t>(terminated_count_);
  const auto return_sum = store_->cview<double>(return_sum_);
  const auto length_sum = store_->cview<double>(length_sum_);
  RolloutStats out;
  out.steps = steps;
  double r = 0;
  double l = 0;
  for (std::size_t e = 0; e < config_.num_envs; ++e) {
    out.episodes += static_cast<std::size_t>(completed[e]);
    out.terminated += static_cast<std::size_t>(terminated_count[e]);
    r += return_sum[e];
    l += length_sum[e];
  }
  if (out.episodes > 0) {
    out.mean_episodic_reward = r / static_cast<double>(out.episodes);
    out.mean_episodic_length = l / static_cast<double>(out.episodes);
  }
  return out;
}

std::size_t EnvBatch::variation_bytes() const {
  std::size_t total = 0;
  for (ArrayId id : store_->ids())
    if (store_->spec(id).role == Role::Constant) total += store_->byte_size(id);
  return total;
}

// ---------------------------------------------------------------------------

void RandomSampler::act(EnvBatch& batch, LaneRange range, std::size_t) {
  const auto& space = batch.spec().action;
  const std::size_t A = batch.num_agents();
  auto log_probs = batch.log_probs();
  auto values = batch.values();
  if (space.discrete) {
    auto actions = batch.discrete_actions();
    const auto n = static_cast<std::uint32_t>(space.num_actions);
    const float lp = -std::log(static_cast<float>(n));
    for (std::size_t e = range.begin; e < range.end; ++e)
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t i = e * A + a;
        actions[i] = static_cast<std::int32_t>(batch.action_rng(e, a).below(n));
        log_probs[i] = lp;
        values[i] = 0.0f;
      }
  } else {
    auto actions = batch.continuous_actions();
    const std::size_t d = space.dim;
    const double width = static_cast<double>(space.high) - static_cast<double>(space.low);
    const float lp = static_cast<float>(-static_cast<double>(d) * std::log(width));
    for (std::size_t e = range.begin; e < range.end; ++e)
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t i = e * A + a;
        auto& rng = batch.action_rng(e, a);
        for (std::size_t k = 0; k < d; ++k) actions[i * d + k] = static_cast<float>(rng.uniform(space.low, space.high));
        log_probs[i] = lp;
        values[i] = 0.0f;
      }
  }
}

void RandomSampler::values_of(EnvBatch&, std::size_t, std::size_t, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
}

void PolicySampler::prepare(const EnvBatch& batch, std::span<const LaneRange> ranges) {
  const auto& s = policy_->shape();
  if (s.obs_dim != batch.obs_dim())
    throw Error(ErrorCode::ShapeMismatch, "policy expects obs_dim " + std::to_string(s.obs_dim) +
                                              ", environment provides " + std::to_string(batch.obs_dim()));
  const auto& space = batch.spec().action;
  const bool discrete = s.head == HeadKind::Categorical;
  if (discrete != space.discrete ||
      (discrete ? s.action_dim != space.num_actions : s.action_dim != space.dim))
    throw Error(ErrorCode::ShapeMismatch, "policy head does not match the action space");
  std::size_t widest = 1;
  for (const auto& r : ranges) widest = std::max(widest, r.size());
  const std::size_t rows = widest * batch.num_agents();
  if (workspaces_.size() != ranges.size() || workspaces_.front().capacity < rows) {
    workspaces_.clear();
    for (std::size_t i = 0; i < ranges.size(); ++i) workspaces_.push_back(policy_->make_workspace(rows));
  }
}

void PolicySampler::act(EnvBatch& batch, LaneRange range, std::size_t lane) {
  if (range.empty()) return;
  const std::size_t A = batch.num_agents();
  const std::size_t rows = range.size() * A;
  const std::size_t od = batch.obs_dim();
  auto& ws = workspaces_[lane];
  const auto obs = batch.observations().subspan(range.begin * A * od, rows * od);
  policy_->forward(obs, {}, rows, ws);

  const std::size_t adim = policy_->shape().action_dim;
  auto log_probs = batch.log_probs();
  auto values = batch.values();
  const bool discrete = policy_->shape().head == HeadKind::Categorical;
  const auto log_std = policy_->log_std();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t i = range.begin * A + r;
    const std::size_t e = i / A;
    const std::size_t a = i % A;
    std::span<const float> head(ws.head.data() + r * adim, adim);
    if (discrete) {
      auto actions = batch.discrete_actions();
      if (greedy_) {
        actions[i] = categorical_mode(head);
        log_probs[i] = static_cast<float>(categorical_log_prob_entropy(head, actions[i]).log_prob);
      } else {
        const auto s = sample_categorical(head, batch.action_rng(e, a));
        actions[i] = s.index;
        log_probs[i] = static_cast<float>(s.log_prob);
      }
    } else {
      auto act = batch.continuous_actions().subspan(i * adim, adim);
      if (greedy_) {
        std::copy(head.begin(), head.end(), act.begin());
        log_probs[i] = static_cast<float>(
            gaussian_log_prob_entropy(head, log_std, std::span<const float>(act)).log_prob);
      } else {
        log_probs[i] = static_cast<float>(sample_gaussian(head, log_std, batch.action_rng(e, a), act));
      }
    }
    values[i] = ws.values[r];
  }
}

void PolicySampler::values_of(EnvBatch& batch, std::size_t env, std::size_t lane, std::span<float> out) {
  const std::size_t A = batch.num_agents();
  const std::size_t od = batch.obs_dim();
  auto& ws = workspaces_[lane];
  policy_->forward(batch.observations().subspan(env * A * od, A * od), {}, A, ws);
  for (std::size_t a = 0; a < A; ++a) out[a] = ws.values[a];
}

// ---------------------------------------------------------------------------

RolloutStats run_rollout(EnvBatch& batch, ActionSampler& sampler, RolloutBuffer& buffer,
                         LanePool& pool, PhaseTimes* times) {
  using clock = std::chrono::steady_clock;
  const auto ranges = batch.lane_ranges(pool.lanes());
  sampler.prepare(batch, ranges);
  const auto& store = batch.store();
  batch.begin_stats();

  for (std::size_t t = 0; t < buffer.horizon(); ++t) {
    const auto t0 = clock::now();
    pool.run([&](std::size_t lane) { sampler.act(batch, ranges[lane], lane); });
    const auto t1 = clock::now();
    log_step(store, buffer, t, LogPoint::BeforeStep);
    pool.run([&](std::size_t lane) { batch.step_range(ranges[lane], lane, &sampler); });
    log_step(store, buffer, t, LogPoint::AfterStep);
    const auto t2 = clock::now();
    pool.run([&](std::size_t lane) { batch.reset_range(ranges[lane]); });
    const auto t3 = clock::now();
    if (times != nullptr) {
      times->inference_s += std::chrono::duration<double>(t1 - t0).count();
      times->step_s += std::chrono::duration<double>(t2 - t1).count();
      times->reset_s += std::chrono::duration<double>(t3 - t2).count();
    }
  }
  return batch.collect_stats(buffer.horizon() * batch.num_envs());
}

}  // namespace batchrl
