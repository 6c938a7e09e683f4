#include "batchrl/envs/surface.hpp"

#include <algorithm>
#include <cmath>

#include "batchrl/error.hpp"

namespace batchrl::envs {

namespace {
constexpr std::array<double, 4> kA{-200.0, -100.0, -170.0, 15.0};
constexpr std::array<double, 4> ka{-1.0, -1.0, -6.5, 0.7};
constexpr std::array<double, 4> kb{0.0, 0.0, 11.0, 0.6};
constexpr std::array<double, 4> kc{-10.0, -10.0, -6.5, 0.7};
constexpr std::array<double, 4> kx0{1.0, 0.0, -0.5, -1.0};
constexpr std::array<double, 4> ky0{0.0, 0.5, 1.5, 1.0};
}  // namespace

EnergyGradient mueller_brown(double x, double y) {
  EnergyGradient out;
  for (std::size_t k = 0; k < 4; ++k) {
    const double dx = x - kx0[k];
    const double dy = y - ky0[k];
    const double term = kA[k] * std::exp(ka[k] * dx * dx + kb[k] * dx * dy + kc[k] * dy * dy);
    out.energy += term;
    out.dx += term * (2.0 * ka[k] * dx + kb[k] * dy);
    out.dy += term * (kb[k] * dx + 2.0 * kc[k] * dy);
  }
  return out;
}

SurfaceState surface_state_at(double x, double y) {
  return {x, y, mueller_brown(x, y).energy, 0};
}

Transition<SurfaceState> surface_step(const SurfaceState& s, double dx, double dy,
                                      const SurfaceParams& p) {
  if (!std::isfinite(dx) || !std::isfinite(dy))
    throw Error(ErrorCode::InvalidAction, "non-finite surface move");
  dx = std::clamp(dx, -p.max_step, p.max_step);
  dy = std::clamp(dy, -p.max_step, p.max_step);

  Transition<SurfaceState> out;
  auto& n = out.state;
  n.x = std::clamp(s.x + dx, p.box.x_min, p.box.x_max);
  n.y = std::clamp(s.y + dy, p.box.y_min, p.box.y_max);
  n.energy = mueller_brown(n.x, n.y).energy;
  n.step_count = s.step_count + 1;

  out.reward = -(n.energy - s.energy) * p.energy_weight - p.step_cost;
  const double gx = n.x - p.goal.x;
  const double gy = n.y - p.goal.y;
  out.terminated = std::sqrt(gx * gx + gy * gy) < p.goal_radius;
  if (out.terminated) out.reward += p.success_bonus;
  out.done = out.terminated || n.step_count >= p.max_steps;
  return out;
}

}  // namespace batchrl::envs
