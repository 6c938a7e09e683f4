#pragma once

#include <array>
#include <cstdint>

#include "batchrl/envs/classic_control.hpp"

namespace batchrl::envs {

struct EnergyGradient {
  double energy = 0;
  double dx = 0;
  double dy = 0;
};

/// Mueller-Brown potential: a sum of four anisotropic Gaussians with the
/// standard published constants, and its exact gradient.
EnergyGradient mueller_brown(double x, double y);

struct SurfacePoint {
  double x;
  double y;
};

/// Approximate locations of the three local minima and the two saddles.
inline constexpr SurfacePoint kMinimumA{-0.558223635, 1.441725842};  // global
inline constexpr SurfacePoint kMinimumB{0.623499405, 0.028037759};
inline constexpr SurfacePoint kMinimumC{-0.050010823, 0.466694105};

struct SurfaceBox {
  double x_min = -1.8;
  double x_max = 1.2;
  double y_min = -0.5;
  double y_max = 2.2;
};

struct SurfaceParams {
  double max_step = 0.05;      // per-axis bound on a move
  double energy_weight = 0.01;
  double step_cost = 0.1;
  double success_bonus = 10.0;
  double goal_radius = 0.1;
  SurfacePoint start = kMinimumB;
  SurfacePoint goal = kMinimumA;
  SurfaceBox box{};
  std::int32_t max_steps = 200;
};

struct SurfaceState {
  double x = 0;
  double y = 0;
  double energy = 0;
  std::int32_t step_count = 0;
};

SurfaceState surface_state_at(double x, double y);

/// Move by (dx, dy), each clipped to [-max_step, max_step], then clipped to
/// the bounding box. Reward is -(E_new - E_old) * energy_weight - step_cost,
/// plus success_bonus when the new position is within goal_radius of the
/// goal. Throws InvalidAction for non-finite moves.
Transition<SurfaceState> surface_step(const SurfaceState& s, double dx, double dy,
                                      const SurfaceParams& p = {});

}  // namespace batchrl::envs
