#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "batchrl/error.hpp"
#include "batchrl/rng.hpp"

namespace batchrl {

enum class HeadKind : std::uint32_t { Categorical = 0, Gaussian = 1 };

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct NetworkShape {
  std::size_t obs_dim = 4;
  std::vector<std::size_t> hidden{64, 64};
  HeadKind head = HeadKind::Categorical;
  std::size_t action_dim = 2;  // number of logits, or Gaussian dimension

  std::size_t last_width() const { return hidden.empty() ? obs_dim : hidden.back(); }
  std::size_t param_count() const;
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Float inference uses a rational tanh approximation (max abs error ~4e-7)
/// that compiles to branch-free vector code; double keeps std::tanh.
inline float fast_tanh(float a) {
  const float x = std::min(std::max(a, -7.90531110763549805f), 7.90531110763549805f);
  const float x2 = x * x;
  float p = x2 * -2.76076847742355e-16f + 2.00018790482477e-13f;
  p = x2 * p + -8.60467152213735e-11f;
  p = x2 * p + 5.12229709037114e-08f;
  p = x2 * p + 1.48572235717979e-05f;
  p = x2 * p + 6.37261928875436e-04f;
  p = x2 * p + 4.89352455891786e-03f;
  p = x * p;
  float q = x2 * 1.19825839466702e-06f + 1.18534705686654e-04f;
  q = x2 * q + 2.26843463243900e-03f;
  q = x2 * q + 4.89352518554385e-03f;
  return std::fabs(a) < 0.0004f ? a : p / q;
}

template <class T>
inline T activation(T x) {
  if constexpr (std::is_same_v<T, float>)
    return fast_tanh(x);
  else
    return std::tanh(x);
}

/// Two tanh trunks of the same widths: one feeds the actor head (logits, or
/// Gaussian mean plus a state-independent log_std vector), the other the
/// scalar critic head. Value regression on large returns swamps the policy
/// gradient when the two share hidden layers.
///
/// Parameters live in one flat vector. Weight matrices are stored input-major
/// ([in][out]) so the forward inner loop runs over contiguous outputs. Every
/// row is processed by the same code path, so a row's outputs do not depend on
/// which other rows share its batch.
template <class T>
class PolicyNetwork {
 public:
  /// Activations cached by forward() for backward(), sized for `rows` rows.
  struct Workspace {
    std::size_t capacity = 0;
    std::size_t rows = 0;
    std::vector<std::vector<T>> hidden;  // post-activation, actor layers then critic layers
    std::vector<T> head;                 // [rows, action_dim]
    std::vector<T> values;               // [rows]
    std::vector<T> grad_a;               // backward scratch, [rows, max width]
    std::vector<T> grad_b;
  };

  PolicyNetwork() = default;
  explicit PolicyNetwork(NetworkShape shape);

  const NetworkShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::span<T> params() noexcept { return params_; }
  std::span<const T> params() const noexcept { return params_; }

  /// Scaled-uniform init with the variance of an orthogonal init: gain sqrt(2)
  /// for hidden layers, 0.01 for the actor head, 1.0 for the critic head,
  /// zero biases, log_std 0.
  void init(std::uint64_t seed);

  /// Clamp log_std into [kLogStdMin, kLogStdMax].
  void project();

  std::size_t log_std_offset() const noexcept { return log_std_offset_; }
  std::span<const T> log_std() const {
    return {params_.data() + log_std_offset_, shape_.head == HeadKind::Gaussian ? shape_.action_dim : 0};
  }

  Workspace make_workspace(std::size_t rows) const;

  /// Forward pass over rows of `input` ([*, obs_dim] row-major). With an empty
  /// `rows`, the first `count` rows are used; otherwise rows[i] selects the
  /// input row for output i. Results land in ws.head and ws.values.
  void forward(std::span<const T> input, std::span<const std::uint32_t> rows, std::size_t count,
               Workspace& ws) const;

  /// Accumulates (+=) into `grad` the gradient of sum_i(head_seed[i] . head[i]
  /// + value_seed[i] * values[i]) with respect to every network parameter,
  /// using the activations cached by the last forward() on the same rows.
  /// log_std gradients are not touched (the head does not depend on them).
  void backward(std::span<const T> input, std::span<const std::uint32_t> rows, Workspace& ws,
                std::span<const T> head_seed, std::span<const T> value_seed,
                std::span<T> grad) const;

  template <class U>
  PolicyNetwork<U> cast() const {
    PolicyNetwork<U> out(shape_);
    auto dst = out.params();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  struct Layer {
    std::size_t in, out, weights, bias;  // offsets into params_
  };

  NetworkShape shape_;
  std::vector<T> params_;
  std::vector<Layer> layers_;   // actor trunk
  std::vector<Layer> vlayers_;  // critic trunk
  Layer actor_{};
  Layer critic_{};
  std::size_t log_std_offset_ = 0;
};

// ---------------------------------------------------------------------------
// Action distributions

struct SampledAction {
  std::int32_t index = 0;  // categorical
  double log_prob = 0;
};

/// Numerically stable log-sum-exp.
template <class T>
T log_sum_exp(std::span<const T> z) {
  T m = z[0];
  for (T v : z) m = std::max(m, v);
  T s = 0;
  for (T v : z) s += std::exp(v - m);
  return m + std::log(s);
}

/// Softmax probabilities into `probs`.
template <class T>
void softmax(std::span<const T> logits, std::span<T> probs) {
  T m = logits[0];
  for (T v : logits) m = std::max(m, v);
  T s = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += probs[i] = std::exp(logits[i] - m);
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] /= s;
}

/// Inverse-CDF sample from softmax(logits); log_prob is exact.
template <class T>
SampledAction sample_categorical(std::span<const T> logits, RngStream& rng) {
  const double lse = static_cast<double>(log_sum_exp(logits));
  const double u = rng.uniform();
  double cdf = 0;
  std::size_t pick = logits.size() - 1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    cdf += std::exp(static_cast<double>(logits[i]) - lse);
    if (u < cdf) {
      pick = i;
      break;
    }
  }
  return {static_cast<std::int32_t>(pick), static_cast<double>(logits[pick]) - lse};
}

template <class T>
std::int32_t categorical_mode(std::span<const T> logits) {
  return static_cast<std::int32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

inline double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

/// mean + std * N(0, 1) per component; returns the exact log density.
template <class T, class A>
double sample_gaussian(std::span<const T> mean, std::span<const T> log_std, RngStream& rng,
                       std::span<A> action) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double ls = clamp_log_std(static_cast<double>(log_std[d]));
    const double eps = rng.normal();
    action[d] = static_cast<A>(static_cast<double>(mean[d]) + std::exp(ls) * eps);
    const double u = (static_cast<double>(action[d]) - static_cast<double>(mean[d])) / std::exp(ls);
    lp += -0.5 * u * u - ls - half_log_2pi;
  }
  return lp;
}

struct LogProbEntropy {
  double log_prob = 0;
  double entropy = 0;
};

/// Exact categorical log-probability of `action` and entropy. Throws
/// OutOfSupport for an index outside [0, n).
template <class T>
LogProbEntropy categorical_log_prob_entropy(std::span<const T> logits, std::int64_t action) {
  if (action < 0 || static_cast<std::size_t>(action) >= logits.size())
    throw Error(ErrorCode::OutOfSupport, "categorical action " + std::to_string(action) +
                                             " with " + std::to_string(logits.size()) + " classes");
  const double lse = static_cast<double>(log_sum_exp(logits));
  double h = 0;
  for (T z : logits) {
    const double lp = static_cast<double>(z) - lse;
    h -= std::exp(lp) * lp;
  }
  return {static_cast<double>(logits[static_cast<std::size_t>(action)]) - lse, h};
}

/// Exact diagonal-Gaussian log density and entropy. Throws OutOfSupport for
/// non-finite actions.
template <class T, class A>
LogProbEntropy gaussian_log_prob_entropy(std::span<const T> mean, std::span<const T> log_std,
                                         std::span<const A> action) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  LogProbEntropy out;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    if (!std::isfinite(static_cast<double>(action[d])))
      throw Error(ErrorCode::OutOfSupport, "non-finite continuous action");
    const double ls = clamp_log_std(static_cast<double>(log_std[d]));
    const double u = (static_cast<double>(action[d]) - static_cast<double>(mean[d])) / std::exp(ls);
    out.log_prob += -0.5 * u * u - ls - half_log_2pi;
    out.entropy += 0.5 + half_log_2pi + ls;
  }
  return out;
}

extern template class PolicyNetwork<float>;
extern template class PolicyNetwork<double>;

using Policy = PolicyNetwork<float>;

}  // namespace batchrl
