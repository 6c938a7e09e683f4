#pragma once

#include <filesystem>

#include "batchrl/policy.hpp"

namespace batchrl {

/// Policy checkpoint layout, all integers and floats little-endian:
///
///   char[4]  magic "BRLP"
///   u32      format version (1)
///   u32      head type (0 categorical, 1 gaussian)
///   u32      L, number of layer sizes
///   u32[L]   layer sizes: obs_dim, hidden widths...
///   u32      action dim
///   u64      parameter count
///   f32[n]   flat parameters
inline constexpr char kCheckpointMagic[4] = {'B', 'R', 'L', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Policy& policy);
Policy load_checkpoint(const std::filesystem::path& path);

std::vector<std::byte> encode_checkpoint(const Policy& policy);
Policy decode_checkpoint(std::span<const std::byte> bytes);

}  // namespace batchrl
