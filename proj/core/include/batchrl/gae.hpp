#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "batchrl/error.hpp"

namespace batchrl {

/// Layout of a time-major rollout: rewards/values are [T, E, A], dones and
/// truncation flags [T, E], bootstrap values [E, A].
struct GaeShape {
  std::size_t horizon = 1;
  std::size_t num_envs = 1;
  std::size_t num_agents = 1;
};

/// Generalized advantage estimation, backwards in time:
///   delta_t = r_t + gamma * next_t - v_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// where next_t is v_{t+1} (the bootstrap value at t = T-1) when the episode
/// continues, the value of the final observation when it was truncated, and 0
/// when it terminated. returns = advantages + values.
///
/// `truncated` and `terminal_values` may be empty, in which case every done
/// is a termination.
template <class R, class V, class Out>
void compute_gae(GaeShape shape, std::span<const R> rewards, std::span<const V> values,
                 std::span<const std::uint8_t> dones, std::span<const std::uint8_t> truncated,
                 std::span<const V> terminal_values, std::span<const V> bootstrap, double gamma,
                 double lambda, std::span<Out> advantages, std::span<Out> returns) {
  const std::size_t T = shape.horizon;
  const std::size_t E = shape.num_envs;
  const std::size_t A = shape.num_agents;
  const std::size_t step = E * A;
  if (rewards.size() != T * step || values.size() != T * step || dones.size() != T * E ||
      bootstrap.size() != step || advantages.size() != T * step || returns.size() != T * step ||
      (!truncated.empty() && truncated.size() != T * E) ||
      (!terminal_values.empty() && terminal_values.size() != T * step))
    throw Error(ErrorCode::ShapeMismatch, "GAE inputs do not match [T, E, A] = [" + std::to_string(T) +
                                              ", " + std::to_string(E) + ", " + std::to_string(A) + "]");
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::InvalidParams, "gamma and lambda must lie in [0, 1]");

  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t a = 0; a < A; ++a) {
      double next_adv = 0.0;
      double next_value = static_cast<double>(bootstrap[e * A + a]);
      for (std::size_t t = T; t-- > 0;) {
        const std::size_t i = t * step + e * A + a;
        const bool done = dones[t * E + e] != 0;
        const bool trunc = done && !truncated.empty() && truncated[t * E + e] != 0;
        double target = next_value;
        if (done) target = trunc && !terminal_values.empty() ? static_cast<double>(terminal_values[i]) : 0.0;
        const double v = static_cast<double>(values[i]);
        const double delta = static_cast<double>(rewards[i]) + gamma * target - v;
        const double adv = delta + gamma * lambda * (done ? 0.0 : 1.0) * next_adv;
        advantages[i] = static_cast<Out>(adv);
        returns[i] = static_cast<Out>(adv + v);
        next_adv = adv;
        next_value = v;
      }
    }
  }
}

}  // namespace batchrl
