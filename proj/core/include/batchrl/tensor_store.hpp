#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "batchrl/error.hpp"

namespace batchrl {

enum class ElementKind : std::uint8_t { Float32, Float64, Int32, Boolean };

/// constant: written during setup only. state: rewritten every step.
/// logged: state that is also recorded into the rollout slab every step.
enum class Role : std::uint8_t { Constant, State, Logged };

/// When a logged array is recorded relative to the environment step: inputs to
/// the step (observations, actions) before it, outcomes (rewards, dones) after.
enum class LogPoint : std::uint8_t { BeforeStep, AfterStep };

std::size_t element_size(ElementKind kind) noexcept;
std::string_view to_string(ElementKind kind) noexcept;

template <class T>
struct KindOf;
template <>
struct KindOf<float> {
  static constexpr ElementKind value = ElementKind::Float32;
};
template <>
struct KindOf<double> {
  static constexpr ElementKind value = ElementKind::Float64;
};
template <>
struct KindOf<std::int32_t> {
  static constexpr ElementKind value = ElementKind::Int32;
};
/// Booleans are stored one byte each.
template <>
struct KindOf<std::uint8_t> {
  static constexpr ElementKind value = ElementKind::Boolean;
};

struct ArraySpec {
  std::string name;
  /// Leading dims are [num_envs] or [num_envs, num_agents].
  std::vector<std::size_t> dims;
  ElementKind kind = ElementKind::Float32;
  Role role = Role::State;
  LogPoint log_point = LogPoint::BeforeStep;
};

/// Index of a registered array. Stable for the lifetime of the store.
struct ArrayId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const noexcept { return index != UINT32_MAX; }
  friend bool operator==(ArrayId, ArrayId) = default;
};

/// Named, pre-allocated arrays holding every byte touched by rollout and
/// training. Each array is one zero-initialized, 64-byte aligned allocation
/// made at registration time; nothing is ever resized, so addresses are stable
/// for the lifetime of the store.
///
/// After finalize() several lanes may write concurrently as long as each lane
/// only touches its own environments' slices.
class TensorStore {
 public:
  TensorStore() = default;
  TensorStore(const TensorStore&) = delete;
  TensorStore& operator=(const TensorStore&) = delete;
  TensorStore(TensorStore&&) noexcept = default;
  TensorStore& operator=(TensorStore&&) noexcept = default;

  ArrayId register_array(ArraySpec spec);
  void finalize();

  bool finalized() const noexcept { return finalized_; }
  std::size_t size() const noexcept { return arrays_.size(); }
  bool contains(std::string_view name) const;
  ArrayId find(std::string_view name) const;

  const ArraySpec& spec(ArrayId id) const { return checked(id).spec; }
  std::size_t num_envs(ArrayId id) const { return checked(id).spec.dims.front(); }
  std::size_t element_count(ArrayId id) const { return checked(id).count; }
  std::size_t elements_per_env(ArrayId id) const { return checked(id).per_env; }
  std::size_t byte_size(ArrayId id) const {
    const auto& a = checked(id);
    return a.count * element_size(a.spec.kind);
  }
  std::size_t total_bytes() const noexcept;

  const std::byte* raw(ArrayId id) const { return checked(id).data.get(); }
  /// Untyped writable bytes of a non-constant array.
  std::span<std::byte> bytes(ArrayId id) {
    auto& a = const_cast<Array&>(checked(id));
    if (finalized_ && a.spec.role == Role::Constant)
      throw Error(ErrorCode::ReadOnly, "array '" + a.spec.name + "' is constant");
    return {a.data.get(), a.count * element_size(a.spec.kind)};
  }
  std::vector<ArrayId> ids() const;

  template <class T>
  std::span<T> view(ArrayId id) {
    auto& a = writable<T>(id);
    return {reinterpret_cast<T*>(a.data.get()), a.count};
  }
  template <class T>
  std::span<const T> cview(ArrayId id) const {
    const auto& a = typed<T>(id);
    return {reinterpret_cast<const T*>(a.data.get()), a.count};
  }
  template <class T>
  std::span<T> view(std::string_view name) {
    return view<T>(find(name));
  }
  template <class T>
  std::span<const T> cview(std::string_view name) const {
    return cview<T>(find(name));
  }

  /// The [agent, feature...] sub-array owned by one environment. Slices of
  /// different environments never overlap.
  template <class T>
  std::span<T> env_slice(ArrayId id, std::size_t env) {
    auto& a = writable<T>(id);
    check_env(a, env);
    return {reinterpret_cast<T*>(a.data.get()) + env * a.per_env, a.per_env};
  }
  template <class T>
  std::span<const T> env_cslice(ArrayId id, std::size_t env) const {
    const auto& a = typed<T>(id);
    check_env(a, env);
    return {reinterpret_cast<const T*>(a.data.get()) + env * a.per_env, a.per_env};
  }
  template <class T>
  std::span<T> env_slice(std::string_view name, std::size_t env) {
    return env_slice<T>(find(name), env);
  }

 private:
  struct AlignedFree {
    void operator()(std::byte* p) const noexcept;
  };
  struct Array {
    ArraySpec spec;
    std::size_t count = 0;
    std::size_t per_env = 0;
    std::unique_ptr<std::byte[], AlignedFree> data;
  };

  const Array& checked(ArrayId id) const;
  void check_env(const Array& a, std::size_t env) const;
  [[noreturn]] void kind_error(const Array& a, ElementKind wanted) const;

  template <class T>
  const Array& typed(ArrayId id) const {
    const auto& a = checked(id);
    if (a.spec.kind != KindOf<T>::value) kind_error(a, KindOf<T>::value);
    return a;
  }
  template <class T>
  Array& writable(ArrayId id) {
    const auto& a = typed<T>(id);
    if (finalized_ && a.spec.role == Role::Constant)
      throw Error(ErrorCode::ReadOnly, "array '" + a.spec.name + "' is constant");
    return const_cast<Array&>(a);
  }

  std::vector<Array> arrays_;
  std::unordered_map<std::string, std::uint32_t> by_name_;
  bool finalized_ = false;
};

namespace names {
inline constexpr std::string_view kObservations = "obs";
inline constexpr std::string_view kActions = "actions";
inline constexpr std::string_view kLogProbs = "log_probs";
inline constexpr std::string_view kValues = "values";
inline constexpr std::string_view kRewards = "rewards";
inline constexpr std::string_view kDones = "dones";
inline constexpr std::string_view kTruncated = "truncated";
inline constexpr std::string_view kTerminalValues = "terminal_values";
}  // namespace names

/// Time-major history of every logged array: one slab of shape [T, dims...]
/// per logged array, allocated once at construction. Recording a step copies
/// the live array into slot t; the slot is then immutable history.
class RolloutBuffer {
 public:
  RolloutBuffer(const TensorStore& store, std::size_t horizon);
  RolloutBuffer(const RolloutBuffer&) = delete;
  RolloutBuffer& operator=(const RolloutBuffer&) = delete;
  RolloutBuffer(RolloutBuffer&&) noexcept = default;

  std::size_t horizon() const noexcept { return horizon_; }
  bool has(std::string_view name) const;
  std::size_t total_bytes() const noexcept;

  /// Whole slab [T, dims...].
  template <class T>
  std::span<T> slab(std::string_view name) {
    auto& s = slab_for<T>(name);
    return {reinterpret_cast<T*>(s.data.get()), s.step_count * horizon_};
  }
  template <class T>
  std::span<const T> slab(std::string_view name) const {
    auto& s = const_cast<RolloutBuffer*>(this)->slab_for<T>(name);
    return {reinterpret_cast<const T*>(s.data.get()), s.step_count * horizon_};
  }
  /// Slot t of a slab, shaped like the live array.
  template <class T>
  std::span<const T> at(std::string_view name, std::size_t t) const {
    auto whole = slab<T>(name);
    const std::size_t n = whole.size() / horizon_;
    check_slot(t);
    return whole.subspan(t * n, n);
  }
  template <class T>
  std::span<T> at(std::string_view name, std::size_t t) {
    auto whole = slab<T>(name);
    const std::size_t n = whole.size() / horizon_;
    check_slot(t);
    return whole.subspan(t * n, n);
  }

  /// FNV-1a over every slab, in registration order.
  std::uint64_t checksum() const noexcept;

  void record(const TensorStore& store, std::size_t t, LogPoint point);
  void check_slot(std::size_t t) const;

 private:
  struct Slab {
    std::string name;
    ArrayId source;
    ElementKind kind;
    LogPoint point;
    std::size_t step_count = 0;  // elements per slot
    std::size_t step_bytes = 0;
    std::unique_ptr<std::byte[]> data;
  };

  template <class T>
  Slab& slab_for(std::string_view name) {
    auto& s = find_slab(name);
    if (s.kind != KindOf<T>::value)
      throw Error(ErrorCode::KindMismatch, "slab '" + s.name + "' holds " +
                                               std::string(to_string(s.kind)));
    return s;
  }
  Slab& find_slab(std::string_view name);

  std::size_t horizon_;
  std::vector<Slab> slabs_;
};

/// Record every logged array of the given log point into slot t.
void log_step(const TensorStore& store, RolloutBuffer& buffer, std::size_t t, LogPoint point);
/// Record every logged array regardless of log point.
void log_step(const TensorStore& store, RolloutBuffer& buffer, std::size_t t);

}  // namespace batchrl
