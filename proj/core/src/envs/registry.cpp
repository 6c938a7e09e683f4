#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "batchrl/environment.hpp"
#include "batchrl/envs/classic_control.hpp"
#include "batchrl/envs/surface.hpp"
#include "batchrl/envs/tag.hpp"

namespace batchrl {

namespace {

using envs::AcrobotParams;
using envs::AcrobotState;
using envs::CartPoleParams;
using envs::CartPoleState;

// Physics state lives in float64 arrays so the batched trajectories equal the
// scalar reference dynamics bit for bit; observations are float32.

/// Multiplicative parameter factors in [1 - jitter, 1 + jitter], one row per
/// replica, drawn from the replica's variation stream.
ArrayId register_variations(TensorStore& store, const BatchShape& shape, const std::string& name,
                            std::size_t count, double jitter) {
  ArrayId id = store.register_array({name, {shape.num_envs, count}, ElementKind::Float32, Role::Constant});
  auto all = store.view<float>(id);
  for (std::size_t e = 0; e < shape.num_envs; ++e) {
    RngStream rng(shape.seed, {static_cast<std::uint32_t>(e), 0, StreamPurpose::Variation});
    for (std::size_t k = 0; k < count; ++k)
      all[e * count + k] = static_cast<float>(1.0 + jitter * rng.uniform(-1.0, 1.0));
  }
  return id;
}

class CartPoleEnv final : public Environment {
 public:
  explicit CartPoleEnv(double jitter)
      : base_(std::make_shared<const CartPoleParams>()), jitter_(jitter) {
    spec_ = {"cartpole", 4, 1, ActionSpace::categorical(2)};
  }

  const EnvSpec& spec() const override { return spec_; }

  void bind(TensorStore& store, const BatchShape& shape) override {
    state_ = store.register_array({"cartpole.state", {shape.num_envs, 4}, ElementKind::Float64, Role::State});
    variation_ = register_variations(store, shape, "cartpole.variation", 2, jitter_);
  }

  void reset(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    for (auto& v : s) v = slot.reset_rng->uniform(-0.05, 0.05);
    write_obs(s, slot.obs);
  }

  bool step(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    const auto var = slot.store->env_cslice<float>(variation_, slot.env);
    CartPoleParams p = *base_;
    p.pole_mass *= var[0];
    p.half_length *= var[1];
    p.max_steps = INT32_MAX;
    const auto next = envs::cartpole_step({s[0], s[1], s[2], s[3], 0}, slot.discrete_actions[0], p);
    s[0] = next.state.x;
    s[1] = next.state.x_dot;
    s[2] = next.state.theta;
    s[3] = next.state.theta_dot;
    write_obs(s, slot.obs);
    slot.rewards[0] = static_cast<float>(next.reward);
    return next.terminated;
  }

  std::size_t base_params_bytes() const override { return sizeof(*base_); }

 private:
  static void write_obs(std::span<const double> s, std::span<float> obs) {
    for (std::size_t i = 0; i < 4; ++i) obs[i] = static_cast<float>(s[i]);
  }

  EnvSpec spec_;
  std::shared_ptr<const CartPoleParams> base_;
  double jitter_;
  ArrayId state_;
  ArrayId variation_;
};

class AcrobotEnv final : public Environment {
 public:
  explicit AcrobotEnv(double jitter)
      : base_(std::make_shared<const AcrobotParams>()), jitter_(jitter) {
    spec_ = {"acrobot", 6, 1, ActionSpace::categorical(3)};
  }

  const EnvSpec& spec() const override { return spec_; }

  void bind(TensorStore& store, const BatchShape& shape) override {
    state_ = store.register_array({"acrobot.state", {shape.num_envs, 4}, ElementKind::Float64, Role::State});
    variation_ = register_variations(store, shape, "acrobot.variation", 2, jitter_);
  }

  void reset(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    for (auto& v : s) v = slot.reset_rng->uniform(-0.1, 0.1);
    write_obs(s, slot.obs);
  }

  bool step(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    const auto var = slot.store->env_cslice<float>(variation_, slot.env);
    AcrobotParams p = *base_;
    p.link_mass_1 *= var[0];
    p.link_mass_2 *= var[1];
    p.max_steps = INT32_MAX;
    const auto next = envs::acrobot_step({s[0], s[1], s[2], s[3], 0}, slot.discrete_actions[0], p);
    s[0] = next.state.theta1;
    s[1] = next.state.theta2;
    s[2] = next.state.dtheta1;
    s[3] = next.state.dtheta2;
    write_obs(s, slot.obs);
    slot.rewards[0] = static_cast<float>(next.reward);
    return next.terminated;
  }

  std::size_t base_params_bytes() const override { return sizeof(*base_); }

 private:
  static void write_obs(std::span<const double> s, std::span<float> obs) {
    obs[0] = static_cast<float>(std::cos(s[0]));
    obs[1] = static_cast<float>(std::sin(s[0]));
    obs[2] = static_cast<float>(std::cos(s[1]));
    obs[3] = static_cast<float>(std::sin(s[1]));
    obs[4] = static_cast<float>(s[2]);
    obs[5] = static_cast<float>(s[3]);
  }

  EnvSpec spec_;
  std::shared_ptr<const AcrobotParams> base_;
  double jitter_;
  ArrayId state_;
  ArrayId variation_;
};

struct TagParams {
  std::int32_t grid_size;
  std::size_t num_taggers;
};

/// Per-agent observation: own (x, y) / G, own role, own active flag, then the
/// same four features for every other agent with positions relative to self.
class TagEnv final : public Environment {
 public:
  TagEnv(TagParams params, std::size_t num_agents)
      : base_(std::make_shared<const TagParams>(params)) {
    spec_ = {"tag", 4 * num_agents, num_agents, ActionSpace::categorical(envs::kTagMoves)};
  }

  const EnvSpec& spec() const override { return spec_; }

  void bind(TensorStore& store, const BatchShape& shape) override {
    const std::size_t A = shape.num_agents;
    positions_ = store.register_array({"tag.positions", {shape.num_envs, A, 2}, ElementKind::Int32, Role::State});
    is_tagger_ = store.register_array({"tag.is_tagger", {shape.num_envs, A}, ElementKind::Boolean, Role::Constant});
    active_ = store.register_array({"tag.active", {shape.num_envs, A}, ElementKind::Boolean, Role::State});
    auto roles = store.view<std::uint8_t>(is_tagger_);
    for (std::size_t e = 0; e < shape.num_envs; ++e)
      for (std::size_t a = 0; a < A; ++a) roles[e * A + a] = a < base_->num_taggers ? 1 : 0;
  }

  void reset(EnvSlot& slot) override {
    auto pos = slot.store->env_slice<std::int32_t>(positions_, slot.env);
    auto active = slot.store->env_slice<std::uint8_t>(active_, slot.env);
    const auto g = static_cast<std::uint32_t>(base_->grid_size);
    for (auto& p : pos) p = static_cast<std::int32_t>(slot.reset_rng->below(g));
    for (auto& a : active) a = 1;
    write_obs(slot);
  }

  bool step(EnvSlot& slot) override {
    envs::TagView view{base_->grid_size, slot.store->env_slice<std::int32_t>(positions_, slot.env),
                       slot.store->env_cslice<std::uint8_t>(is_tagger_, slot.env),
                       slot.store->env_slice<std::uint8_t>(active_, slot.env)};
    const bool done = envs::tag_step(view, slot.discrete_actions, slot.rewards);
    write_obs(slot);
    return done;
  }

  std::size_t base_params_bytes() const override { return sizeof(*base_); }

 private:
  void write_obs(EnvSlot& slot) const {
    const auto pos = slot.store->env_cslice<std::int32_t>(positions_, slot.env);
    const auto tagger = slot.store->env_cslice<std::uint8_t>(is_tagger_, slot.env);
    const auto active = slot.store->env_cslice<std::uint8_t>(active_, slot.env);
    const std::size_t A = spec_.num_agents;
    const float inv_g = 1.0f / static_cast<float>(base_->grid_size);
    for (std::size_t i = 0; i < A; ++i) {
      float* o = slot.obs.data() + i * spec_.obs_dim;
      o[0] = static_cast<float>(pos[2 * i]) * inv_g;
      o[1] = static_cast<float>(pos[2 * i + 1]) * inv_g;
      o[2] = tagger[i];
      o[3] = active[i];
      std::size_t k = 4;
      for (std::size_t j = 0; j < A; ++j) {
        if (j == i) continue;
        o[k++] = static_cast<float>(pos[2 * j] - pos[2 * i]) * inv_g;
        o[k++] = static_cast<float>(pos[2 * j + 1] - pos[2 * i + 1]) * inv_g;
        o[k++] = tagger[j];
        o[k++] = active[j];
      }
    }
  }

  EnvSpec spec_;
  std::shared_ptr<const TagParams> base_;
  ArrayId positions_;
  ArrayId is_tagger_;
  ArrayId active_;
};

struct SurfaceConfig {
  envs::SurfaceParams params;
  double start_jitter;
};

/// Observation: position, offset to the goal, energy / 100. Actions are
/// normalized to [-1, 1] per axis and scaled by max_step.
class SurfaceEnv final : public Environment {
 public:
  explicit SurfaceEnv(SurfaceConfig config) : base_(std::make_shared<const SurfaceConfig>(config)) {
    spec_ = {"surface", 5, 1, ActionSpace::box(2, -1.0f, 1.0f)};
  }

  const EnvSpec& spec() const override { return spec_; }

  void bind(TensorStore& store, const BatchShape& shape) override {
    state_ = store.register_array({"surface.state", {shape.num_envs, 3}, ElementKind::Float64, Role::State});
  }

  void reset(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    const auto& p = base_->params;
    const double j = base_->start_jitter;
    const double x = p.start.x + slot.reset_rng->uniform(-j, j);
    const double y = p.start.y + slot.reset_rng->uniform(-j, j);
    const auto st = envs::surface_state_at(x, y);
    s[0] = st.x;
    s[1] = st.y;
    s[2] = st.energy;
    write_obs(s, slot.obs);
  }

  bool step(EnvSlot& slot) override {
    auto s = slot.store->env_slice<double>(state_, slot.env);
    auto p = base_->params;
    p.max_steps = INT32_MAX;
    const double scale = p.max_step;
    const double ax = std::clamp(static_cast<double>(slot.continuous_actions[0]), -1.0, 1.0);
    const double ay = std::clamp(static_cast<double>(slot.continuous_actions[1]), -1.0, 1.0);
    const auto next = envs::surface_step({s[0], s[1], s[2], 0}, ax * scale, ay * scale, p);
    s[0] = next.state.x;
    s[1] = next.state.y;
    s[2] = next.state.energy;
    write_obs(s, slot.obs);
    slot.rewards[0] = static_cast<float>(next.reward);
    return next.terminated;
  }

  std::size_t base_params_bytes() const override { return sizeof(*base_); }

 private:
  void write_obs(std::span<const double> s, std::span<float> obs) const {
    const auto& goal = base_->params.goal;
    obs[0] = static_cast<float>(s[0]);
    obs[1] = static_cast<float>(s[1]);
    obs[2] = static_cast<float>(goal.x - s[0]);
    obs[3] = static_cast<float>(goal.y - s[1]);
    obs[4] = static_cast<float>(s[2] / 100.0);
  }

  EnvSpec spec_;
  std::shared_ptr<const SurfaceConfig> base_;
  ArrayId state_;
};

/// Constant reward 1 per step, terminates after done_after steps.
class DummyEnv final : public Environment {
 public:
  explicit DummyEnv(std::int32_t done_after) : done_after_(std::make_shared<const std::int32_t>(done_after)) {
    spec_ = {"dummy", 1, 1, ActionSpace::categorical(2)};
  }

  const EnvSpec& spec() const override { return spec_; }

  void bind(TensorStore& store, const BatchShape& shape) override {
    count_ = store.register_array({"dummy.count", {shape.num_envs}, ElementKind::Int32, Role::State});
  }

  void reset(EnvSlot& slot) override {
    slot.store->env_slice<std::int32_t>(count_, slot.env)[0] = 0;
    slot.obs[0] = 0.0f;
  }

  bool step(EnvSlot& slot) override {
    auto& c = slot.store->env_slice<std::int32_t>(count_, slot.env)[0];
    ++c;
    slot.obs[0] = static_cast<float>(c) / static_cast<float>(*done_after_);
    slot.rewards[0] = 1.0f;
    return c >= *done_after_;
  }

  std::size_t base_params_bytes() const override { return sizeof(*done_after_); }

 private:
  EnvSpec spec_;
  std::shared_ptr<const std::int32_t> done_after_;
  ArrayId count_;
};

void require_agents(std::string_view env, std::size_t agents, std::size_t wanted) {
  if (agents != wanted)
    throw Error(ErrorCode::InvalidParams, std::string(env) + " supports exactly " +
                                              std::to_string(wanted) + " agent(s), got " +
                                              std::to_string(agents));
}

std::vector<EnvInfo> build_registry() {
  std::vector<EnvInfo> r;
  r.push_back({"cartpole",
               "CartPole-v1 dynamics: balance a pole on a cart (2 discrete actions)",
               {{"param_jitter", 0.0, "relative per-replica jitter of pole mass and length"}},
               [](const EnvParams& p, std::size_t agents) -> std::unique_ptr<Environment> {
                 require_agents("cartpole", agents, 1);
                 const double jitter = param_or_default(find_environment("cartpole"), p, "param_jitter");
                 if (!(jitter >= 0.0 && jitter < 1.0))
                   throw Error(ErrorCode::InvalidParams, "param_jitter must be in [0, 1)");
                 return std::make_unique<CartPoleEnv>(jitter);
               }});
  r.push_back({"acrobot",
               "Acrobot-v1 dynamics: swing a two-link pendulum above a line (3 discrete actions)",
               {{"param_jitter", 0.0, "relative per-replica jitter of the link masses"}},
               [](const EnvParams& p, std::size_t agents) -> std::unique_ptr<Environment> {
                 require_agents("acrobot", agents, 1);
                 const double jitter = param_or_default(find_environment("acrobot"), p, "param_jitter");
                 if (!(jitter >= 0.0 && jitter < 1.0))
                   throw Error(ErrorCode::InvalidParams, "param_jitter must be in [0, 1)");
                 return std::make_unique<AcrobotEnv>(jitter);
               }});
  r.push_back({"tag",
               "multi-agent tag gridworld: taggers chase runners (5 discrete moves per agent)",
               {{"grid_size", 8, "side length of the square grid"},
                {"num_taggers", 1, "agents [0, num_taggers) are taggers, the rest runners"}},
               [](const EnvParams& p, std::size_t agents) -> std::unique_ptr<Environment> {
                 const auto& info = find_environment("tag");
                 const double g = param_or_default(info, p, "grid_size");
                 const double t = param_or_default(info, p, "num_taggers");
                 if (g < 2 || g != std::floor(g)) throw Error(ErrorCode::InvalidParams, "grid_size must be an integer >= 2");
                 if (t < 1 || t != std::floor(t) || t >= static_cast<double>(agents))
                   throw Error(ErrorCode::InvalidParams, "need 1 <= num_taggers < num_agents");
                 return std::make_unique<TagEnv>(
                     TagParams{static_cast<std::int32_t>(g), static_cast<std::size_t>(t)}, agents);
               }});
  r.back().default_episode_length = 100;
  const envs::SurfaceParams sp{};
  r.push_back({"surface",
               "Mueller-Brown potential energy surface: move from one minimum to another (2-D continuous)",
               {{"max_step", sp.max_step, "per-axis bound on one move"},
                {"energy_weight", sp.energy_weight, "reward weight of the energy decrease"},
                {"step_cost", sp.step_cost, "cost charged every step"},
                {"success_bonus", sp.success_bonus, "reward for reaching the goal"},
                {"goal_radius", sp.goal_radius, "distance to the goal that ends the episode"},
                {"start_x", sp.start.x, "start minimum x"},
                {"start_y", sp.start.y, "start minimum y"},
                {"goal_x", sp.goal.x, "goal minimum x"},
                {"goal_y", sp.goal.y, "goal minimum y"},
                {"start_jitter", 0.05, "uniform jitter of the start position per reset"}},
               [](const EnvParams& p, std::size_t agents) -> std::unique_ptr<Environment> {
                 require_agents("surface", agents, 1);
                 const auto& info = find_environment("surface");
                 auto get = [&](const char* k) { return param_or_default(info, p, k); };
                 SurfaceConfig c;
                 c.params.max_step = get("max_step");
                 c.params.energy_weight = get("energy_weight");
                 c.params.step_cost = get("step_cost");
                 c.params.success_bonus = get("success_bonus");
                 c.params.goal_radius = get("goal_radius");
                 c.params.start = {get("start_x"), get("start_y")};
                 c.params.goal = {get("goal_x"), get("goal_y")};
                 c.start_jitter = get("start_jitter");
                 if (!(c.params.max_step > 0) || !(c.params.goal_radius > 0) || !(c.start_jitter >= 0))
                   throw Error(ErrorCode::InvalidParams, "surface: max_step and goal_radius must be > 0");
                 return std::make_unique<SurfaceEnv>(c);
               }});
  r.back().default_episode_length = static_cast<std::size_t>(sp.max_steps);
  r.push_back({"dummy",
               "no-op environment: reward 1 every step, episode ends after done_after steps",
               {{"done_after", 3, "episode length"}},
               [](const EnvParams& p, std::size_t agents) -> std::unique_ptr<Environment> {
                 require_agents("dummy", agents, 1);
                 const double n = param_or_default(find_environment("dummy"), p, "done_after");
                 if (n < 1 || n != std::floor(n)) throw Error(ErrorCode::InvalidParams, "done_after must be an integer >= 1");
                 return std::make_unique<DummyEnv>(static_cast<std::int32_t>(n));
               }});
  return r;
}

}  // namespace

const std::vector<EnvInfo>& environment_registry() {
  static const std::vector<EnvInfo> registry = build_registry();
  return registry;
}

const EnvInfo& find_environment(std::string_view name) {
  for (const auto& info : environment_registry())
    if (info.name == name) return info;
  throw Error(ErrorCode::UnknownEnvironment, std::string(name));
}

std::vector<std::string> environment_names() {
  std::vector<std::string> out;
  for (const auto& info : environment_registry()) out.push_back(info.name);
  return out;
}

double param_or_default(const EnvInfo& info, const EnvParams& params, std::string_view key) {
  if (auto it = params.find(std::string(key)); it != params.end()) return it->second;
  for (const auto& p : info.params)
    if (p.name == key) return p.default_value;
  throw Error(ErrorCode::InvalidParams, info.name + " has no parameter '" + std::string(key) + "'");
}

std::unique_ptr<Environment> make_environment(std::string_view name, const EnvParams& params,
                                              std::size_t num_agents) {
  const auto& info = find_environment(name);
  for (const auto& [key, value] : params) {
    const bool known = std::any_of(info.params.begin(), info.params.end(),
                                   [&](const ParamInfo& p) { return p.name == key; });
    if (!known) throw Error(ErrorCode::InvalidParams, info.name + " has no parameter '" + key + "'");
    if (!std::isfinite(value)) throw Error(ErrorCode::InvalidParams, "parameter '" + key + "' is not finite");
  }
  return info.make(params, num_agents);
}

}  // namespace batchrl
