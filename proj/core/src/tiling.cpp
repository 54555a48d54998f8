#include "dixon/tiling.hpp"

#include <algorithm>

namespace dixon {

std::vector<int> axis_origins(int extent, int tile) {
  if (tile <= 0 || tile > extent) {
    fail(ErrorCode::kSize, "tile extent " + std::to_string(tile) + " does not fit volume extent " +
                               std::to_string(extent));
  }
  std::vector<int> origins;
  for (int o = 0; o + tile < extent; o += tile) origins.push_back(o);
  const int last = extent - tile;
  if (origins.empty() || origins.back() != last) origins.push_back(last);
  return origins;
}

TileLayout plan_tiles(Index3 volume_dims, Index3 tile_dims, Blend blend) {
  TileLayout layout{volume_dims, tile_dims, {}, blend};
  const auto ox = axis_origins(volume_dims.x, tile_dims.x);
  const auto oy = axis_origins(volume_dims.y, tile_dims.y);
  const auto oz = axis_origins(volume_dims.z, tile_dims.z);
  layout.origins.reserve(ox.size() * oy.size() * oz.size());
  for (int z : oz) {
    for (int y : oy) {
      for (int x : ox) layout.origins.push_back({x, y, z});
    }
  }
  return layout;
}

std::vector<Volume> crop_tiles(const Volume& v, const TileLayout& layout) {
  if (v.dims() != layout.volume_dims) {
    fail(ErrorCode::kShape, "volume " + to_string(v.dims()) + " does not match layout " +
                                to_string(layout.volume_dims));
  }
  std::vector<Volume> tiles;
  tiles.reserve(layout.origins.size());
  for (const auto& o : layout.origins) tiles.push_back(crop(v, o, layout.tile_dims));
  return tiles;
}

Volume reassemble(const TileLayout& layout, const std::vector<Volume>& tiles) {
  if (tiles.size() != layout.origins.size()) {
    fail(ErrorCode::kShape, "layout has " + std::to_string(layout.origins.size()) + " tiles, got " +
                                std::to_string(tiles.size()));
  }
  if (tiles.empty()) fail(ErrorCode::kShape, "no tiles to reassemble");
  for (const auto& t : tiles) {
    if (t.dims() != layout.tile_dims) {
      fail(ErrorCode::kShape, "tile dims " + to_string(t.dims()) + " differ from layout " +
                                  to_string(layout.tile_dims));
    }
  }

  Volume out(layout.volume_dims, tiles.front().spacing(), tiles.front().tag());
  if (layout.blend == Blend::Overwrite) {
    for (std::size_t n = 0; n < tiles.size(); ++n) paste(out, tiles[n], layout.origins[n]);
    return out;
  }

  std::vector<std::uint16_t> hits(out.size(), 0);
  const Index3 td = layout.tile_dims;
  for (std::size_t n = 0; n < tiles.size(); ++n) {
    const Index3 o = layout.origins[n];
    const Volume& t = tiles[n];
    for (int k = 0; k < td.z; ++k) {
      for (int j = 0; j < td.y; ++j) {
        const std::size_t dst = out.index(o.x, o.y + j, o.z + k);
        const std::size_t src = t.index(0, j, k);
        for (int i = 0; i < td.x; ++i) {
          out[dst + i] += t[src + i];
          ++hits[dst + i];
        }
      }
    }
  }
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (hits[n] == 0) fail(ErrorCode::kShape, "layout leaves voxel " + std::to_string(n) + " uncovered");
    // Single contributions are copied untouched so exact tilings round-trip bitwise.
    if (hits[n] > 1) out[n] /= static_cast<double>(hits[n]);
  }
  return out;
}

}  // namespace dixon
