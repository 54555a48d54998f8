#pragma once

#include <cstdint>
#include <filesystem>

#include "dixon/volume.hpp"

namespace dixon {

// DVOL layout, little-endian throughout:
//   magic "DVOL" | version u32 | nx ny nz u32 | sx sy sz f32 | dtype u32 | nx*ny*nz f32 samples (x-fastest)
inline constexpr std::uint32_t kDvolVersion = 1;
inline constexpr std::uint32_t kDvolFloat32 = 1;
inline constexpr std::size_t kDvolHeaderBytes = 36;

// Samples are narrowed to float32; values that are not finite as float32 are
// rejected with kFormat.
void write_volume(const Volume& v, const std::filesystem::path& path);

Volume read_volume(const std::filesystem::path& path, Channel tag = Channel::Other);

}  // namespace dixon
