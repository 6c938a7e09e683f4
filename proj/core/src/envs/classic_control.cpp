#include "batchrl/envs/classic_control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "batchrl/error.hpp"

namespace batchrl::envs {

Transition<CartPoleState> cartpole_step(const CartPoleState& s, int action,
                                        const CartPoleParams& p) {
  if (action != 0 && action != 1)
    throw Error(ErrorCode::InvalidAction, "cartpole action " + std::to_string(action));

  const double total_mass = p.pole_mass + p.cart_mass;
  const double polemass_length = p.pole_mass * p.half_length;
  const double force = action == 1 ? p.force : -p.force;
  const double costheta = std::cos(s.theta);
  const double sintheta = std::sin(s.theta);

  const double temp =
      (force + polemass_length * (s.theta_dot * s.theta_dot) * sintheta) / total_mass;
  const double thetaacc =
      (p.gravity * sintheta - costheta * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * (costheta * costheta) / total_mass));
  const double xacc = temp - polemass_length * thetaacc * costheta / total_mass;

  Transition<CartPoleState> out;
  auto& n = out.state;
  n.x = s.x + p.dt * s.x_dot;
  n.x_dot = s.x_dot + p.dt * xacc;
  n.theta = s.theta + p.dt * s.theta_dot;
  n.theta_dot = s.theta_dot + p.dt * thetaacc;
  n.step_count = s.step_count + 1;

  out.terminated = n.x < -p.x_threshold || n.x > p.x_threshold ||
                   n.theta < -p.theta_threshold || n.theta > p.theta_threshold;
  out.done = out.terminated || n.step_count >= p.max_steps;
  out.reward = 1.0;
  return out;
}

namespace {

struct AcrobotDeriv {
  double dtheta1, dtheta2, ddtheta1, ddtheta2;
};

AcrobotDeriv acrobot_derivs(double theta1, double theta2, double dtheta1, double dtheta2,
                            double torque, const AcrobotParams& p) {
  constexpr double pi = std::numbers::pi;
  const double m1 = p.link_mass_1;
  const double m2 = p.link_mass_2;
  const double l1 = p.link_length_1;
  const double lc1 = p.link_com_1;
  const double lc2 = p.link_com_2;
  const double I1 = p.link_moi;
  const double I2 = p.link_moi;
  const double g = p.gravity;

  const double d1 = m1 * (lc1 * lc1) + m2 * ((l1 * l1) + (lc2 * lc2) + 2 * l1 * lc2 * std::cos(theta2)) +
                    I1 + I2;
  const double d2 = m2 * ((lc2 * lc2) + l1 * lc2 * std::cos(theta2)) + I2;
  const double phi2 = m2 * lc2 * g * std::cos(theta1 + theta2 - pi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * (dtheta2 * dtheta2) * std::sin(theta2) -
                      2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(theta1 - pi / 2) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * (dtheta1 * dtheta1) * std::sin(theta2) - phi2) /
      (m2 * (lc2 * lc2) + I2 - (d2 * d2) / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

double wrap(double x, double lo, double hi) {
  const double diff = hi - lo;
  while (x > hi) x = x - diff;
  while (x < lo) x = x + diff;
  return x;
}

}  // namespace

double acrobot_tip_height(const AcrobotState& s) {
  return -std::cos(s.theta1) - std::cos(s.theta2 + s.theta1);
}

Transition<AcrobotState> acrobot_step(const AcrobotState& s, int action, const AcrobotParams& p) {
  if (action < 0 || action > 2)
    throw Error(ErrorCode::InvalidAction, "acrobot action " + std::to_string(action));
  const double torque = static_cast<double>(action) - 1.0;

  const double dt = p.dt;
  const double dt2 = dt / 2.0;
  const auto k1 = acrobot_derivs(s.theta1, s.theta2, s.dtheta1, s.dtheta2, torque, p);
  const auto k2 = acrobot_derivs(s.theta1 + dt2 * k1.dtheta1, s.theta2 + dt2 * k1.dtheta2,
                                 s.dtheta1 + dt2 * k1.ddtheta1, s.dtheta2 + dt2 * k1.ddtheta2,
                                 torque + dt2 * 0.0, p);
  const auto k3 = acrobot_derivs(s.theta1 + dt2 * k2.dtheta1, s.theta2 + dt2 * k2.dtheta2,
                                 s.dtheta1 + dt2 * k2.ddtheta1, s.dtheta2 + dt2 * k2.ddtheta2,
                                 torque + dt2 * 0.0, p);
  const auto k4 = acrobot_derivs(s.theta1 + dt * k3.dtheta1, s.theta2 + dt * k3.dtheta2,
                                 s.dtheta1 + dt * k3.ddtheta1, s.dtheta2 + dt * k3.ddtheta2,
                                 torque + dt * 0.0, p);
  auto integrate = [&](double y, double a, double b, double c, double d) {
    return y + dt / 6.0 * (a + 2 * b + 2 * c + d);
  };

  Transition<AcrobotState> out;
  auto& n = out.state;
  constexpr double pi = std::numbers::pi;
  n.theta1 = wrap(integrate(s.theta1, k1.dtheta1, k2.dtheta1, k3.dtheta1, k4.dtheta1), -pi, pi);
  n.theta2 = wrap(integrate(s.theta2, k1.dtheta2, k2.dtheta2, k3.dtheta2, k4.dtheta2), -pi, pi);
  n.dtheta1 = std::clamp(integrate(s.dtheta1, k1.ddtheta1, k2.ddtheta1, k3.ddtheta1, k4.ddtheta1),
                         -p.max_vel_1, p.max_vel_1);
  n.dtheta2 = std::clamp(integrate(s.dtheta2, k1.ddtheta2, k2.ddtheta2, k3.ddtheta2, k4.ddtheta2),
                         -p.max_vel_2, p.max_vel_2);
  n.step_count = s.step_count + 1;

  out.terminated = acrobot_tip_height(n) > 1.0;
  out.done = out.terminated || n.step_count >= p.max_steps;
  out.reward = out.terminated ? 0.0 : -1.0;
  return out;
}

}  // namespace batchrl::envs
