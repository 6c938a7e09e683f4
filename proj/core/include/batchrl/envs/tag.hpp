#pragma once

#include <cstdint>
#include <span>

namespace batchrl::envs {

enum class TagMove : std::int32_t { Stay = 0, North = 1, South = 2, East = 3, West = 4 };
inline constexpr int kTagMoves = 5;

/// One replica of the tag gridworld, as views over store slices.
/// positions holds (x, y) pairs; North is +y, East is +x.
struct TagView {
  std::int32_t grid_size = 8;
  std::span<std::int32_t> positions;       // [A * 2]
  std::span<const std::uint8_t> is_tagger;  // [A]
  std::span<std::uint8_t> active;          // [A]
};

inline constexpr float kTagReward = 1.0f;
inline constexpr float kTaggedPenalty = -1.0f;
inline constexpr float kSurvivalReward = 0.01f;

/// Simultaneous moves clipped to the grid, then tagging. An active runner that
/// shares a cell with k >= 1 taggers is tagged: it gets -1 and deactivates,
/// each of those taggers gets +1/k. Surviving active runners get +0.01.
/// Inactive runners stay put and earn nothing. Returns true when no runner is
/// left active. Throws InvalidAction for moves outside [0, 5).
bool tag_step(TagView state, std::span<const std::int32_t> actions, std::span<float> rewards);

}  // namespace batchrl::envs
