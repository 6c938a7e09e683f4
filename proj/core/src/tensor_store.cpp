#include "batchrl/tensor_store.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <new>
#include <numeric>

namespace batchrl {

namespace {
constexpr std::align_val_t kAlignment{64};
}

std::size_t element_size(ElementKind kind) noexcept {
  switch (kind) {
    case ElementKind::Float32: return 4;
    case ElementKind::Float64: return 8;
    case ElementKind::Int32: return 4;
    case ElementKind::Boolean: return 1;
  }
  return 0;
}

std::string_view to_string(ElementKind kind) noexcept {
  switch (kind) {
    case ElementKind::Float32: return "float32";
    case ElementKind::Float64: return "float64";
    case ElementKind::Int32: return "int32";
    case ElementKind::Boolean: return "boolean";
  }
  return "?";
}

void TensorStore::AlignedFree::operator()(std::byte* p) const noexcept {
  ::operator delete[](p, kAlignment);
}

ArrayId TensorStore::register_array(ArraySpec spec) {
  if (finalized_) throw Error(ErrorCode::StoreFinalized, "cannot register '" + spec.name + "'");
  if (spec.name.empty()) throw Error(ErrorCode::InvalidParams, "array name is empty");
  if (by_name_.contains(spec.name)) throw Error(ErrorCode::DuplicateName, spec.name);
  if (spec.dims.empty() ||
      std::any_of(spec.dims.begin(), spec.dims.end(), [](std::size_t d) { return d == 0; }))
    throw Error(ErrorCode::ZeroDimension, spec.name);

  Array a;
  a.count = std::accumulate(spec.dims.begin(), spec.dims.end(), std::size_t{1},
                            std::multiplies<>());
  a.per_env = a.count / spec.dims.front();
  const std::size_t bytes = a.count * element_size(spec.kind);
  a.data.reset(static_cast<std::byte*>(::operator new[](bytes, kAlignment)));
  std::memset(a.data.get(), 0, bytes);
  a.spec = std::move(spec);

  const auto index = static_cast<std::uint32_t>(arrays_.size());
  by_name_.emplace(a.spec.name, index);
  arrays_.push_back(std::move(a));
  return ArrayId{index};
}

void TensorStore::finalize() {
  if (arrays_.empty()) throw Error(ErrorCode::EmptyStore, "no arrays registered");
  finalized_ = true;
}

bool TensorStore::contains(std::string_view name) const {
  return by_name_.find(std::string(name)) != by_name_.end();
}

ArrayId TensorStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw Error(ErrorCode::UnknownName, std::string(name));
  return ArrayId{it->second};
}

std::size_t TensorStore::total_bytes() const noexcept {
  std::size_t total = 0;
  for (const auto& a : arrays_) total += a.count * element_size(a.spec.kind);
  return total;
}

std::vector<ArrayId> TensorStore::ids() const {
  std::vector<ArrayId> out(arrays_.size());
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = ArrayId{i};
  return out;
}

const TensorStore::Array& TensorStore::checked(ArrayId id) const {
  if (id.index >= arrays_.size())
    throw Error(ErrorCode::UnknownName, "array id " + std::to_string(id.index));
  return arrays_[id.index];
}

void TensorStore::check_env(const Array& a, std::size_t env) const {
  if (env >= a.spec.dims.front())
    throw Error(ErrorCode::IndexOutOfRange, "env " + std::to_string(env) + " of '" +
                                                a.spec.name + "' with " +
                                                std::to_string(a.spec.dims.front()) + " envs");
}

void TensorStore::kind_error(const Array& a, ElementKind wanted) const {
  throw Error(ErrorCode::KindMismatch, "'" + a.spec.name + "' is " +
                                           std::string(to_string(a.spec.kind)) + ", not " +
                                           std::string(to_string(wanted)));
}

RolloutBuffer::RolloutBuffer(const TensorStore& store, std::size_t horizon) : horizon_(horizon) {
  if (horizon == 0) throw Error(ErrorCode::InvalidParams, "rollout horizon must be >= 1");
  if (!store.finalized()) throw Error(ErrorCode::StoreNotFinalized, "rollout buffer needs a finalized store");
  for (ArrayId id : store.ids()) {
    const auto& spec = store.spec(id);
    if (spec.role != Role::Logged) continue;
    Slab s;
    s.name = spec.name;
    s.source = id;
    s.kind = spec.kind;
    s.point = spec.log_point;
    s.step_count = store.element_count(id);
    s.step_bytes = store.byte_size(id);
    s.data = std::make_unique<std::byte[]>(s.step_bytes * horizon);
    slabs_.push_back(std::move(s));
  }
}

bool RolloutBuffer::has(std::string_view name) const {
  return std::any_of(slabs_.begin(), slabs_.end(), [&](const Slab& s) { return s.name == name; });
}

std::size_t RolloutBuffer::total_bytes() const noexcept {
  std::size_t total = 0;
  for (const auto& s : slabs_) total += s.step_bytes * horizon_;
  return total;
}

RolloutBuffer::Slab& RolloutBuffer::find_slab(std::string_view name) {
  for (auto& s : slabs_)
    if (s.name == name) return s;
  throw Error(ErrorCode::UnknownName, "no slab for '" + std::string(name) + "'");
}

void RolloutBuffer::check_slot(std::size_t t) const {
  if (t >= horizon_)
    throw Error(ErrorCode::SlotOutOfRange,
                "slot " + std::to_string(t) + " with horizon " + std::to_string(horizon_));
}

void RolloutBuffer::record(const TensorStore& store, std::size_t t, LogPoint point) {
  check_slot(t);
  for (auto& s : slabs_) {
    if (s.point != point) continue;
    std::memcpy(s.data.get() + t * s.step_bytes, store.raw(s.source), s.step_bytes);
  }
}

std::uint64_t RolloutBuffer::checksum() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& s : slabs_) {
    const std::byte* p = s.data.get();
    const std::size_t n = s.step_bytes * horizon_;
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<std::uint64_t>(p[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

void log_step(const TensorStore& store, RolloutBuffer& buffer, std::size_t t, LogPoint point) {
  if (!store.finalized()) throw Error(ErrorCode::StoreNotFinalized, "log_step before finalize");
  buffer.record(store, t, point);
}

void log_step(const TensorStore& store, RolloutBuffer& buffer, std::size_t t) {
  log_step(store, buffer, t, LogPoint::BeforeStep);
  buffer.record(store, t, LogPoint::AfterStep);
}

}  // namespace batchrl
