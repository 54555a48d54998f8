#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dixon/error.hpp"

namespace dixon {

// Integer voxel triple. Used for dims, origins and sizes.
struct Index3 {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr int& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
  friend constexpr Index3 operator+(Index3 a, Index3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }

  static constexpr Index3 cube(int n) { return {n, n, n}; }
};

std::string to_string(const Index3& v);

// Voxel spacing in millimetres.
struct Spacing {
  float x = 1.0F;
  float y = 1.0F;
  float z = 1.0F;

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

enum class Channel : std::uint8_t { IP, OP, Fat, Water, Other };

std::string_view to_string(Channel c);

// Dense scalar grid, x-fastest: index = i + nx * (j + ny * k).
//
// Samples are held in double precision in memory; DVOL files store float32.
class Volume {
 public:
  Volume() = default;
  Volume(Index3 dims, Spacing spacing, Channel tag = Channel::Other, double fill = 0.0);
  Volume(Index3 dims, Spacing spacing, std::vector<double> data, Channel tag = Channel::Other);

  const Index3& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  Channel tag() const noexcept { return tag_; }
  void set_tag(Channel tag) noexcept { tag_ = tag; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.x) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(k));
  }
  double at(int i, int j, int k) const noexcept { return data_[index(i, j, k)]; }
  double& at(int i, int j, int k) noexcept { return data_[index(i, j, k)]; }
  double operator[](std::size_t n) const noexcept { return data_[n]; }
  double& operator[](std::size_t n) noexcept { return data_[n]; }

  bool contains(int i, int j, int k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_.x && j < dims_.y && k < dims_.z;
  }
  bool same_grid(const Volume& other) const noexcept {
    return dims_ == other.dims_ && spacing_ == other.spacing_;
  }
  bool all_finite() const noexcept;

 private:
  Index3 dims_{};
  Spacing spacing_{};
  Channel tag_ = Channel::Other;
  std::vector<double> data_;
};

// Same dims, spacing and bit pattern of every sample. The channel tag is not
// compared because it is not part of the on-disk format.
bool bitwise_equal(const Volume& a, const Volume& b);

// Sub-volume starting at `origin`. Throws kBounds when the box leaves the volume.
Volume crop(const Volume& v, Index3 origin, Index3 size);

// Writes `tile` into `dst` at `origin`. Throws kBounds when it does not fit.
void paste(Volume& dst, const Volume& tile, Index3 origin);

}  // namespace dixon
