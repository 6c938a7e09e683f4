#pragma once

// Finite-difference checks of PolicyNetwork::backward, shared by the unit
// tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "batchrl/policy.hpp"
#include "batchrl/rng.hpp"

namespace testing_support {

using namespace batchrl;

inline NetworkShape shape(std::size_t obs, std::vector<std::size_t> hidden, HeadKind head, std::size_t adim) {
  NetworkShape s;
  s.obs_dim = obs;
  s.hidden = std::move(hidden);
  s.head = head;
  s.action_dim = adim;
  return s;
}

template <class T>
inline void randomize(PolicyNetwork<T>& net, std::uint64_t seed, double scale = 1.0) {
  RngStream rng(seed, {0, 0, StreamPurpose::Init});
  for (auto& p : net.params()) p = static_cast<T>(rng.uniform(-scale, scale));
}

inline std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
  RngStream rng(seed, {1, 0, StreamPurpose::Dynamics});
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// sum(hs . head + vs . value) for the current parameters.
inline double seeded_loss(const PolicyNetwork<double>& net, const std::vector<double>& x, std::size_t n,
                   const std::vector<double>& hs, const std::vector<double>& vs) {
  auto ws = net.make_workspace(n);
  net.forward(x, {}, n, ws);
  double l = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) l += hs[i] * ws.head[i];
  for (std::size_t i = 0; i < n; ++i) l += vs[i] * ws.values[i];
  return l;
}

/// Worst relative error of backward() against central differences. The
/// denominator is floored at 1e-2 so near-zero entries are compared
/// absolutely at that scale.
inline double gradient_check(const NetworkShape& s, std::uint64_t seed) {
  PolicyNetwork<double> net(s);
  randomize(net, seed);
  const std::size_t n = 16;
  const auto x = random_vec(n * s.obs_dim, seed + 1, -2, 2);
  const auto hs = random_vec(n * s.action_dim, seed + 2);
  const auto vs = random_vec(n, seed + 3);

  auto ws = net.make_workspace(n);
  net.forward(x, {}, n, ws);
  std::vector<double> grad(net.size(), 0.0);
  net.backward(x, {}, ws, hs, vs, grad);

  const double h = 1e-4;
  double worst = 0;
  auto p = net.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (s.head == HeadKind::Gaussian && i >= net.log_std_offset()) continue;
    const double keep = p[i];
    p[i] = keep + h;
    const double up = seeded_loss(net, x, n, hs, vs);
    p[i] = keep - h;
    const double down = seeded_loss(net, x, n, hs, vs);
    p[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max({std::abs(fd), std::abs(grad[i]), 1e-2}));
  }
  return worst;
}


}  // namespace testing_support
