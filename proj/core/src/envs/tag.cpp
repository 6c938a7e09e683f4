#include "batchrl/envs/tag.hpp"

#include <algorithm>
#include <string>

#include "batchrl/error.hpp"

namespace batchrl::envs {

bool tag_step(TagView state, std::span<const std::int32_t> actions, std::span<float> rewards) {
  const std::size_t agents = state.is_tagger.size();
  for (std::size_t i = 0; i < agents; ++i)
    if (actions[i] < 0 || actions[i] >= kTagMoves)
      throw Error(ErrorCode::InvalidAction, "tag move " + std::to_string(actions[i]));

  const std::int32_t hi = state.grid_size - 1;
  for (std::size_t i = 0; i < agents; ++i) {
    rewards[i] = 0.0f;
    if (!state.is_tagger[i] && !state.active[i]) continue;
    std::int32_t& x = state.positions[2 * i];
    std::int32_t& y = state.positions[2 * i + 1];
    switch (static_cast<TagMove>(actions[i])) {
      case TagMove::Stay: break;
      case TagMove::North: y = std::min(y + 1, hi); break;
      case TagMove::South: y = std::max(y - 1, 0); break;
      case TagMove::East: x = std::min(x + 1, hi); break;
      case TagMove::West: x = std::max(x - 1, 0); break;
    }
  }

  bool any_runner_left = false;
  for (std::size_t r = 0; r < agents; ++r) {
    if (state.is_tagger[r] || !state.active[r]) continue;
    int taggers_here = 0;
    for (std::size_t t = 0; t < agents; ++t)
      if (state.is_tagger[t] && state.positions[2 * t] == state.positions[2 * r] &&
          state.positions[2 * t + 1] == state.positions[2 * r + 1])
        ++taggers_here;
    if (taggers_here == 0) {
      rewards[r] += kSurvivalReward;
      any_runner_left = true;
      continue;
    }
    const float share = kTagReward / static_cast<float>(taggers_here);
    for (std::size_t t = 0; t < agents; ++t)
      if (state.is_tagger[t] && state.positions[2 * t] == state.positions[2 * r] &&
          state.positions[2 * t + 1] == state.positions[2 * r + 1])
        rewards[t] += share;
    rewards[r] += kTaggedPenalty;
    state.active[r] = 0;
  }
  return !any_runner_left;
}

}  // namespace batchrl::envs
