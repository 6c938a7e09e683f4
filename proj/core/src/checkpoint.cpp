#include "batchrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace batchrl {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class U>
  void le(U v) {
    static_assert(std::is_integral_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i)
      out_.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  template <class U>
  U le() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(std::to_integer<std::uint8_t>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::IoError, "checkpoint truncated");
  }
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_checkpoint(const Policy& policy) {
  const auto& s = policy.shape();
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.head));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(1 + s.hidden.size()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.obs_dim));
  for (std::size_t h : s.hidden) w.le<std::uint32_t>(static_cast<std::uint32_t>(h));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.action_dim));
  w.le<std::uint64_t>(policy.size());
  for (float v : policy.params()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  return w.take();
}

Policy decode_checkpoint(std::span<const std::byte> bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw Error(ErrorCode::IoError, "not a policy checkpoint");
  if (r.le<std::uint32_t>() != kCheckpointVersion) throw Error(ErrorCode::IoError, "unsupported checkpoint version");
  const auto head = r.le<std::uint32_t>();
  if (head > 1) throw Error(ErrorCode::IoError, "unknown head type");
  const auto layers = r.le<std::uint32_t>();
  if (layers == 0 || layers > 64) throw Error(ErrorCode::IoError, "bad layer count");
  NetworkShape shape;
  shape.head = static_cast<HeadKind>(head);
  shape.obs_dim = r.le<std::uint32_t>();
  shape.hidden.clear();
  for (std::uint32_t i = 1; i < layers; ++i) shape.hidden.push_back(r.le<std::uint32_t>());
  shape.action_dim = r.le<std::uint32_t>();
  const auto count = r.le<std::uint64_t>();
  Policy policy(shape);
  if (count != policy.size() || r.remaining() != count * 4)
    throw Error(ErrorCode::IoError, "parameter count does not match the header");
  for (float& v : policy.params()) v = std::bit_cast<float>(r.le<std::uint32_t>());
  return policy;
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy) {
  const auto bytes = encode_checkpoint(policy);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Policy load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::as_bytes(std::span(raw)));
}

}  // namespace batchrl
