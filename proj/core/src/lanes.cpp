#include "batchrl/lanes.hpp"

#include <cstdlib>
#include <string>

namespace batchrl {

std::vector<LaneRange> partition_lanes(std::size_t num_envs, std::size_t lanes) {
  if (lanes == 0) lanes = 1;
  std::vector<LaneRange> ranges(lanes);
  const std::size_t base = num_envs / lanes;
  const std::size_t extra = num_envs % lanes;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < lanes; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    ranges[i] = {begin, begin + size};
    begin += size;
  }
  return ranges;
}

std::size_t default_lane_count() {
  if (const char* env = std::getenv("BATCHRL_LANES")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

LanePool::LanePool(std::size_t lanes) : lanes_(lanes == 0 ? 1 : lanes), errors_(lanes_) {
  threads_.reserve(lanes_ - 1);
  for (std::size_t lane = 1; lane < lanes_; ++lane) threads_.emplace_back([this, lane] { worker(lane); });
}

LanePool::~LanePool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void LanePool::invoke(std::size_t lane) noexcept {
  try {
    call_(ctx_, lane);
  } catch (...) {
    errors_[lane] = std::current_exception();
  }
}

void LanePool::dispatch(void* ctx, Trampoline call) {
  ctx_ = ctx;
  call_ = call;
  if (lanes_ > 1) {
    {
      std::lock_guard lock(mutex_);
      pending_ = lanes_ - 1;
      ++generation_;
    }
    start_cv_.notify_all();
  }
  invoke(0);
  if (lanes_ > 1) {
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
  }
  for (auto& err : errors_) {
    if (err) {
      auto e = err;
      for (auto& other : errors_) other = nullptr;
      std::rethrow_exception(e);
    }
  }
}

void LanePool::worker(std::size_t lane) {
  std::uint64_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
    }
    invoke(lane);
    bool last = false;
    {
      std::lock_guard lock(mutex_);
      last = --pending_ == 0;
    }
    if (last) done_cv_.notify_one();
  }
}

}  // namespace batchrl
