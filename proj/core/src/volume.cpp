#include "dixon/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dixon {

std::string to_string(const Index3& v) {
  return "(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ", " + std::to_string(v.z) + ")";
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::IP: return "IP";
    case Channel::OP: return "OP";
    case Channel::Fat: return "F";
    case Channel::Water: return "W";
    case Channel::Other: return "OTHER";
  }
  return "OTHER";
}

namespace {

void check_grid(Index3 dims, Spacing spacing) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) {
    fail(ErrorCode::kShape, "volume dims must be positive, got " + to_string(dims));
  }
  if (!(spacing.x > 0.0F && spacing.y > 0.0F && spacing.z > 0.0F)) {
    fail(ErrorCode::kShape, "voxel spacing must be strictly positive");
  }
}

}  // namespace

Volume::Volume(Index3 dims, Spacing spacing, Channel tag, double fill)
    : dims_(dims), spacing_(spacing), tag_(tag) {
  check_grid(dims, spacing);
  data_.assign(dims.count(), fill);
}

Volume::Volume(Index3 dims, Spacing spacing, std::vector<double> data, Channel tag)
    : dims_(dims), spacing_(spacing), tag_(tag), data_(std::move(data)) {
  check_grid(dims, spacing);
  if (data_.size() != dims.count()) {
    fail(ErrorCode::kLength, "data length " + std::to_string(data_.size()) + " does not match dims " +
                                 to_string(dims));
  }
}

bool Volume::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool bitwise_equal(const Volume& a, const Volume& b) {
  if (!a.same_grid(b)) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

namespace {

bool box_fits(Index3 dims, Index3 origin, Index3 size) {
  for (int a = 0; a < 3; ++a) {
    if (origin[a] < 0 || size[a] <= 0 || origin[a] + size[a] > dims[a]) return false;
  }
  return true;
}

}  // namespace

Volume crop(const Volume& v, Index3 origin, Index3 size) {
  if (!box_fits(v.dims(), origin, size)) {
    fail(ErrorCode::kBounds, "crop origin " + to_string(origin) + " size " + to_string(size) +
                                 " exceeds volume " + to_string(v.dims()));
  }
  Volume out(size, v.spacing(), v.tag());
  for (int k = 0; k < size.z; ++k) {
    for (int j = 0; j < size.y; ++j) {
      const double* src = &v.data()[v.index(origin.x, origin.y + j, origin.z + k)];
      std::copy_n(src, size.x, &out.data()[out.index(0, j, k)]);
    }
  }
  return out;
}

void paste(Volume& dst, const Volume& tile, Index3 origin) {
  if (!box_fits(dst.dims(), origin, tile.dims())) {
    fail(ErrorCode::kBounds, "paste origin " + to_string(origin) + " size " + to_string(tile.dims()) +
                                 " exceeds volume " + to_string(dst.dims()));
  }
  const Index3 size = tile.dims();
  for (int k = 0; k < size.z; ++k) {
    for (int j = 0; j < size.y; ++j) {
      const double* src = &tile.data()[tile.index(0, j, k)];
      std::copy_n(src, size.x, &dst.data()[dst.index(origin.x, origin.y + j, origin.z + k)]);
    }
  }
}

}  // namespace dixon
