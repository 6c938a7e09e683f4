#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace batchrl {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-5;
};

/// Adam with bias correction. Moments are kept in double.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  std::size_t steps() const noexcept { return steps_; }

  template <class T, class G>
  void step(std::span<T> params, std::span<const G> grad) {
    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double step_size = config_.learning_rate / c1;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
      const double denom = std::sqrt(v_[i] / c2) + config_.epsilon;
      params[i] = static_cast<T>(static_cast<double>(params[i]) - step_size * m_[i] / denom);
    }
  }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

}  // namespace batchrl
