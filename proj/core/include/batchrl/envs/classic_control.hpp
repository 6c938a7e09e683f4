#pragma once

#include <cstdint>

namespace batchrl::envs {

// Classic-control dynamics with the constants of the reference gym
// implementations (CartPole-v1, Acrobot-v1), evaluated in double precision.

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double dt = 0.02;
  double x_threshold = 2.4;
  double theta_threshold = 12 * 2 * 3.141592653589793 / 360;
  std::int32_t max_steps = 500;
};

struct CartPoleState {
  double x = 0;
  double x_dot = 0;
  double theta = 0;
  double theta_dot = 0;
  std::int32_t step_count = 0;
};

template <class State>
struct Transition {
  State state;
  double reward = 0;
  bool done = false;        // terminated or truncated
  bool terminated = false;  // reached a terminal state
};

/// One explicit-Euler step. action 1 pushes right, 0 pushes left. Reward is
/// 1.0 on every step, including the terminal one. Throws InvalidAction.
Transition<CartPoleState> cartpole_step(const CartPoleState& s, int action,
                                        const CartPoleParams& p = {});

struct AcrobotParams {
  double dt = 0.2;
  double link_length_1 = 1.0;
  double link_mass_1 = 1.0;
  double link_mass_2 = 1.0;
  double link_com_1 = 0.5;
  double link_com_2 = 0.5;
  double link_moi = 1.0;
  double gravity = 9.8;
  double max_vel_1 = 4 * 3.141592653589793;
  double max_vel_2 = 9 * 3.141592653589793;
  std::int32_t max_steps = 500;
};

struct AcrobotState {
  double theta1 = 0;
  double theta2 = 0;
  double dtheta1 = 0;
  double dtheta2 = 0;
  std::int32_t step_count = 0;
};

/// Height of the free end above the pivot, in link lengths.
double acrobot_tip_height(const AcrobotState& s);

/// One RK4 step over dt of the two-link underactuated pendulum ("book"
/// dynamics), torque in {-1, 0, +1} for actions {0, 1, 2}. Angles are wrapped
/// to [-pi, pi] and velocities clamped afterwards. Reward -1 per non-terminal
/// step, 0 on reaching the goal height. Throws InvalidAction.
Transition<AcrobotState> acrobot_step(const AcrobotState& s, int action,
                                      const AcrobotParams& p = {});

}  // namespace batchrl::envs
