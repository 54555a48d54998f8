#pragma once

#include <vector>

#include "dixon/volume.hpp"

namespace dixon {

enum class Blend : std::uint8_t { Overwrite, Average };

// Tile grid for piece-wise inference. Origins run x-fastest (x, then y, then z)
// and that order is the paste order used by Blend::Overwrite.
struct TileLayout {
  Index3 volume_dims;
  Index3 tile_dims;
  std::vector<Index3> origins;
  Blend blend = Blend::Average;
};

// Origins along one axis: 0, tile, 2*tile, ... with the last one clamped to
// extent - tile so the final tile stays inside the volume.
std::vector<int> axis_origins(int extent, int tile);

TileLayout plan_tiles(Index3 volume_dims, Index3 tile_dims, Blend blend = Blend::Average);

std::vector<Volume> crop_tiles(const Volume& v, const TileLayout& layout);

Volume reassemble(const TileLayout& layout, const std::vector<Volume>& tiles);

}  // namespace dixon
