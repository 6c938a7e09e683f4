#include "batchrl/policy.hpp"

#include <cmath>

namespace batchrl {

std::size_t NetworkShape::param_count() const {
  std::size_t n = 0;
  std::size_t in = obs_dim;
  for (std::size_t h : hidden) {
    n += 2 * (in * h + h);
    in = h;
  }
  n += in * action_dim + action_dim;  // actor
  n += in + 1;                        // critic
  if (head == HeadKind::Gaussian) n += action_dim;
  return n;
}

template <class T>
PolicyNetwork<T>::PolicyNetwork(NetworkShape shape) : shape_(std::move(shape)) {
  if (shape_.obs_dim == 0 || shape_.action_dim == 0)
    throw Error(ErrorCode::ShapeMismatch, "obs_dim and action_dim must be positive");
  for (std::size_t h : shape_.hidden)
    if (h == 0) throw Error(ErrorCode::ShapeMismatch, "hidden layer of width 0");
  std::size_t off = 0;
  std::size_t in = shape_.obs_dim;
  for (std::size_t h : shape_.hidden) {
    layers_.push_back({in, h, off, off + in * h});
    off += in * h + h;
    in = h;
  }
  in = shape_.obs_dim;
  for (std::size_t h : shape_.hidden) {
    vlayers_.push_back({in, h, off, off + in * h});
    off += in * h + h;
    in = h;
  }
  actor_ = {in, shape_.action_dim, off, off + in * shape_.action_dim};
  off += in * shape_.action_dim + shape_.action_dim;
  critic_ = {in, 1, off, off + in};
  off += in + 1;
  log_std_offset_ = off;
  if (shape_.head == HeadKind::Gaussian) off += shape_.action_dim;
  params_.assign(off, T{0});
}

template <class T>
void PolicyNetwork<T>::init(std::uint64_t seed) {
  RngStream rng(seed, {0, 0, StreamPurpose::Init});
  auto fill = [&](const Layer& l, double gain) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(std::max(l.in, l.out)));
    for (std::size_t i = 0; i < l.in * l.out; ++i)
      params_[l.weights + i] = static_cast<T>(rng.uniform(-bound, bound));
    for (std::size_t i = 0; i < l.out; ++i) params_[l.bias + i] = T{0};
  };
  for (const auto& l : layers_) fill(l, std::sqrt(2.0));
  for (const auto& l : vlayers_) fill(l, std::sqrt(2.0));
  fill(actor_, 0.01);
  fill(critic_, 1.0);
  if (shape_.head == HeadKind::Gaussian)
    for (std::size_t d = 0; d < shape_.action_dim; ++d) params_[log_std_offset_ + d] = T{0};
}

template <class T>
void PolicyNetwork<T>::project() {
  if (shape_.head != HeadKind::Gaussian) return;
  for (std::size_t d = 0; d < shape_.action_dim; ++d) {
    T& v = params_[log_std_offset_ + d];
    v = std::clamp(v, static_cast<T>(kLogStdMin), static_cast<T>(kLogStdMax));
  }
}

template <class T>
typename PolicyNetwork<T>::Workspace PolicyNetwork<T>::make_workspace(std::size_t rows) const {
  Workspace ws;
  ws.capacity = rows;
  std::size_t widest = std::max(shape_.obs_dim, shape_.action_dim);
  for (const auto& l : layers_) {
    ws.hidden.emplace_back(rows * l.out);
    widest = std::max(widest, l.out);
  }
  for (const auto& l : vlayers_) ws.hidden.emplace_back(rows * l.out);
  ws.head.resize(rows * shape_.action_dim);
  ws.values.resize(rows);
  ws.grad_a.resize(widest);
  ws.grad_b.resize(widest);
  return ws;
}

namespace {

template <class T>
inline void dense(const T* __restrict x, const T* __restrict w, const T* __restrict b, std::size_t in,
                  std::size_t out, T* __restrict z) {
  for (std::size_t j = 0; j < out; ++j) z[j] = b[j];
  for (std::size_t k = 0; k < in; ++k) {
    const T xk = x[k];
    const T* wk = w + k * out;
    for (std::size_t j = 0; j < out; ++j) z[j] += xk * wk[j];
  }
}

/// Dot product with eight fixed partial sums so it vectorizes without
/// reassociating; the summation order is the same for every call.
template <class T>
inline T dot8(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T acc[8] = {};
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[j + l] * b[j + l];
  for (std::size_t l = 0; j < n; ++j, ++l) acc[l] += a[j] * b[j];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

template <class T>
void PolicyNetwork<T>::forward(std::span<const T> input, std::span<const std::uint32_t> rows,
                               std::size_t count, Workspace& ws) const {
  if (count > ws.capacity)
    throw Error(ErrorCode::ShapeMismatch, "batch of " + std::to_string(count) +
                                              " rows exceeds workspace of " + std::to_string(ws.capacity));
  if (!rows.empty() && rows.size() != count)
    throw Error(ErrorCode::ShapeMismatch, "row index list does not match count");
  const std::size_t in0 = shape_.obs_dim;
  const std::size_t available = input.size() / in0;
  if (input.size() % in0 != 0)
    throw Error(ErrorCode::ShapeMismatch, "input size is not a multiple of obs_dim");
  if (rows.empty() && count > available) throw Error(ErrorCode::ShapeMismatch, "not enough input rows");
  for (std::uint32_t r : rows)
    if (r >= available) throw Error(ErrorCode::ShapeMismatch, "row index past the input");

  const T* p = params_.data();
  const std::size_t adim = shape_.action_dim;
  const std::size_t depth = layers_.size();
  auto trunk = [&](const std::vector<Layer>& layers, std::size_t base, const T* x, std::size_t n) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      T* z = ws.hidden[base + l].data() + n * L.out;
      dense(x, p + L.weights, p + L.bias, L.in, L.out, z);
      for (std::size_t j = 0; j < L.out; ++j) z[j] = activation(z[j]);
      x = z;
    }
    return x;
  };
  for (std::size_t n = 0; n < count; ++n) {
    const T* x = input.data() + (rows.empty() ? n : rows[n]) * in0;
    const T* ha = trunk(layers_, 0, x, n);
    const T* hv = trunk(vlayers_, depth, x, n);
    dense(ha, p + actor_.weights, p + actor_.bias, actor_.in, adim, ws.head.data() + n * adim);
    dense(hv, p + critic_.weights, p + critic_.bias, critic_.in, 1, ws.values.data() + n);
  }
  ws.rows = count;
}

template <class T>
void PolicyNetwork<T>::backward(std::span<const T> input, std::span<const std::uint32_t> rows,
                                Workspace& ws, std::span<const T> head_seed,
                                std::span<const T> value_seed, std::span<T> grad) const {
  const std::size_t count = ws.rows;
  const std::size_t adim = shape_.action_dim;
  if (head_seed.size() != count * adim || value_seed.size() != count)
    throw Error(ErrorCode::ShapeMismatch, "loss-gradient seeds do not match the forward batch");
  if (grad.size() != params_.size())
    throw Error(ErrorCode::ShapeMismatch, "gradient buffer does not match the parameter count");
  if (!rows.empty() && rows.size() != count)
    throw Error(ErrorCode::ShapeMismatch, "row index list does not match the forward batch");

  const T* p = params_.data();
  T* g = grad.data();
  const std::size_t in0 = shape_.obs_dim;
  const std::size_t depth = layers_.size();
  T* dh = ws.grad_a.data();
  T* dz = ws.grad_b.data();

  // dh holds d/d(post-activation) of the current layer on entry.
  auto trunk_back = [&](const std::vector<Layer>& layers, std::size_t base, const T* x0, std::size_t n) {
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& L = layers[l];
      const T* h = ws.hidden[base + l].data() + n * L.out;
      for (std::size_t j = 0; j < L.out; ++j) dz[j] = dh[j] * (T{1} - h[j] * h[j]);
      const T* xprev = l == 0 ? x0 : ws.hidden[base + l - 1].data() + n * L.in;
      for (std::size_t k = 0; k < L.in; ++k) {
        const T xk = xprev[k];
        T* gw = g + L.weights + k * L.out;
        for (std::size_t j = 0; j < L.out; ++j) gw[j] += xk * dz[j];
      }
      T* gb = g + L.bias;
      for (std::size_t j = 0; j < L.out; ++j) gb[j] += dz[j];
      if (l > 0)
        for (std::size_t k = 0; k < L.in; ++k) dh[k] = dot8(p + L.weights + k * L.out, dz, L.out);
    }
  };

  for (std::size_t n = 0; n < count; ++n) {
    const T* x0 = input.data() + (rows.empty() ? n : rows[n]) * in0;
    const T* ha = depth == 0 ? x0 : ws.hidden[depth - 1].data() + n * layers_.back().out;
    const T* hv = depth == 0 ? x0 : ws.hidden[2 * depth - 1].data() + n * vlayers_.back().out;
    const T* hs = head_seed.data() + n * adim;
    const T vs = value_seed[n];
    const std::size_t width = actor_.in;

    // Actor head, then its trunk.
    for (std::size_t j = 0; j < width; ++j) {
      const T* wa = p + actor_.weights + j * adim;
      T acc = 0;
      for (std::size_t a = 0; a < adim; ++a) acc += wa[a] * hs[a];
      dh[j] = acc;
      T* ga = g + actor_.weights + j * adim;
      for (std::size_t a = 0; a < adim; ++a) ga[a] += ha[j] * hs[a];
    }
    for (std::size_t a = 0; a < adim; ++a) g[actor_.bias + a] += hs[a];
    trunk_back(layers_, 0, x0, n);

    for (std::size_t j = 0; j < width; ++j) {
      dh[j] = p[critic_.weights + j] * vs;
      g[critic_.weights + j] += hv[j] * vs;
    }
    g[critic_.bias] += vs;
    trunk_back(vlayers_, depth, x0, n);
  }
}

template class PolicyNetwork<float>;
template class PolicyNetwork<double>;

}  // namespace batchrl
