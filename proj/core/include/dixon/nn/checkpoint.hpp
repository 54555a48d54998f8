#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dixon/nn/adam.hpp"

namespace dixon::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct NamedOptimizer {
  std::string name;
  AdamState state;
};

// DCKP layout, little-endian:
//   magic "DCKP" | version u32 | config (u32 length + bytes) | step i64
//   | u32 count, then per parameter: u32 name length, name, u32 rank, rank x u32 dims, f32 data
//   | u32 count, then per optimizer: name, lr beta1 beta2 eps f64, step i64, u64 n, n f64 m, n f64 v
// Nothing time-dependent is written, so equal inputs give equal bytes.
struct Checkpoint {
  std::string config;
  std::int64_t step = 0;
  std::vector<NamedTensor> params;
  std::vector<NamedOptimizer> optimizers;

  const AdamState* optimizer(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Appends the parameters of `set` under "<prefix><name>".
void export_parameters(const ParameterSet<float>& set, const std::string& prefix, Checkpoint& ck);

// Copies matching "<prefix><name>" tensors into `set`. Every parameter of the
// set must be present with the same shape (kFormat / kShape otherwise).
void import_parameters(const Checkpoint& ck, const std::string& prefix, ParameterSet<float>& set);

}  // namespace dixon::nn
