#pragma once

#include <atomic>
#include <cstdint>
#include <type_traits>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace batchrl {

/// Half-open range of environment indices owned by one worker lane.
struct LaneRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  friend bool operator==(LaneRange, LaneRange) = default;
};

/// Split [0, num_envs) into `lanes` contiguous ranges whose sizes differ by at
/// most one; the first num_envs % lanes ranges get the extra element. With
/// more lanes than environments the trailing ranges are empty.
std::vector<LaneRange> partition_lanes(std::size_t num_envs, std::size_t lanes);

/// Number of worker lanes to use when none is configured: the BATCHRL_LANES
/// environment variable if set, otherwise the hardware concurrency.
std::size_t default_lane_count();

/// Fixed pool of worker lanes. run() executes a task on every lane and returns
/// once all lanes have finished, so consecutive run() calls are separated by a
/// barrier. Lane 0 is the calling thread; with one lane nothing is spawned.
/// Dispatch does not allocate.
class LanePool {
 public:
  explicit LanePool(std::size_t lanes = 1);
  ~LanePool();
  LanePool(const LanePool&) = delete;
  LanePool& operator=(const LanePool&) = delete;

  std::size_t lanes() const noexcept { return lanes_; }

  /// Calls fn(lane) for lane in [0, lanes()). Exceptions thrown on any lane
  /// are rethrown here (lowest lane first) after every lane has stopped.
  template <class F>
  void run(F&& fn) {
    using Fn = std::remove_reference_t<F>;
    dispatch(&fn, [](void* ctx, std::size_t lane) { (*static_cast<Fn*>(ctx))(lane); });
  }

 private:
  using Trampoline = void (*)(void*, std::size_t);

  void dispatch(void* ctx, Trampoline call);
  void worker(std::size_t lane);
  void invoke(std::size_t lane) noexcept;

  std::size_t lanes_;
  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> errors_;

  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;

  void* ctx_ = nullptr;
  Trampoline call_ = nullptr;
};

}  // namespace batchrl
