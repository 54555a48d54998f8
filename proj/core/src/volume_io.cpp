#include "dixon/volume_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "dixon/binary_io.hpp"

namespace dixon {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'V', 'O', 'L'};

}  // namespace

void write_volume(const Volume& v, const std::filesystem::path& path) {
  std::vector<float> samples(v.size());
  for (std::size_t n = 0; n < v.size(); ++n) {
    const double value = v[n];
    if (!std::isfinite(value) || std::abs(value) > std::numeric_limits<float>::max()) {
      fail(ErrorCode::kFormat, "sample " + std::to_string(n) + " is not representable as float32");
    }
    samples[n] = static_cast<float>(value);
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  io::put<std::uint32_t>(os, kDvolVersion);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(v.dims().x));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(v.dims().y));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(v.dims().z));
  io::put<float>(os, v.spacing().x);
  io::put<float>(os, v.spacing().y);
  io::put<float>(os, v.spacing().z);
  io::put<std::uint32_t>(os, kDvolFloat32);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(samples.data()),
             static_cast<std::streamsize>(samples.size() * sizeof(float)));
  } else {
    for (float s : samples) io::put<float>(os, s);
  }
  os.flush();
  if (!os) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Volume read_volume(const std::filesystem::path& path, Channel tag) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());

  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    fail(ErrorCode::kFormat, path.string() + " does not start with the DVOL magic");
  }
  const auto version = io::get<std::uint32_t>(is);
  if (version != kDvolVersion) fail(ErrorCode::kFormat, "unsupported DVOL version " + std::to_string(version));
  Index3 dims;
  dims.x = static_cast<int>(io::get<std::uint32_t>(is));
  dims.y = static_cast<int>(io::get<std::uint32_t>(is));
  dims.z = static_cast<int>(io::get<std::uint32_t>(is));
  Spacing spacing;
  spacing.x = io::get<float>(is);
  spacing.y = io::get<float>(is);
  spacing.z = io::get<float>(is);
  const auto dtype = io::get<std::uint32_t>(is);
  if (dtype != kDvolFloat32) fail(ErrorCode::kFormat, "unsupported DVOL dtype " + std::to_string(dtype));
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) fail(ErrorCode::kFormat, "non-positive dims " + to_string(dims));
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0)) fail(ErrorCode::kFormat, "non-positive spacing");

  std::vector<float> samples(dims.count());
  const auto bytes = static_cast<std::streamsize>(samples.size() * sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(samples.data()), bytes);
    if (is.gcount() != bytes) {
      fail(ErrorCode::kLength, path.string() + ": payload has " + std::to_string(is.gcount()) +
                                   " bytes, expected " + std::to_string(bytes));
    }
  } else {
    for (float& s : samples) s = io::get<float>(is, ErrorCode::kLength);
  }
  std::vector<double> data(samples.begin(), samples.end());
  return Volume(dims, spacing, std::move(data), tag);
}

}  // namespace dixon
