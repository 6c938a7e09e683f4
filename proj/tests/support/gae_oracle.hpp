#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace testing_support {

/// Direct summation: A_t = sum_l (gamma lambda)^l delta_{t+l}, stopping after
/// the first done at or after t.
inline std::vector<double> brute_force_gae(const std::vector<double>& r, const std::vector<double>& v,
                                            const std::vector<std::uint8_t>& d, double boot,
                                            double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0, w = 1;
    for (std::size_t k = t; k < T; ++k) {
      const double next = d[k] ? 0.0 : (k + 1 < T ? v[k + 1] : boot);
      sum += w * (r[k] + gamma * next - v[k]);
      if (d[k]) break;
      w *= gamma * lambda;
    }
    out[t] = sum;
  }
  return out;
}

}  // namespace testing_support
