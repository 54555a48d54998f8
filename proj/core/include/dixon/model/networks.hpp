#pragma once

#include <cstdint>
#include <vector>

#include "dixon/model/config.hpp"
#include "dixon/nn/conv.hpp"

namespace dixon::model {

// 3D U-Net: `levels` stride-2 encoder convolutions, mirrored stride-2
// transpose convolutions with concatenated skips, sigmoid output with
// channel 0 = fat and channel 1 = water.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t seed);

  // (batch, 1 or 2, x, y, z) -> (batch, 2, x, y, z). Spatial dims must be
  // divisible by 2^levels; they need not equal the configured crop.
  nn::Var<T> forward(const nn::Var<T>& input) const;

  const GeneratorConfig& config() const noexcept { return cfg_; }
  nn::ParameterSet<T>& params() noexcept { return params_; }
  const nn::ParameterSet<T>& params() const noexcept { return params_; }

 private:
  struct Norm {
    nn::Var<T> gamma;
    nn::Var<T> beta;
  };
  GeneratorConfig cfg_;
  nn::ParameterSet<T> params_;
  std::vector<nn::ConvParams<T>> down_;
  std::vector<Norm> down_norm_;  // empty gamma for unnormalized levels
  std::vector<nn::ConvParams<T>> up_;
  std::vector<Norm> up_norm_;
};

// PatchGAN: k=4 convolutions with the configured strides ending in a
// 1-channel logit map.
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, int conditioning_channels, std::uint64_t seed);

  // Concatenates the conditioning input (if any) with the judged pair.
  nn::Var<T> forward(const nn::Var<T>& conditioning, const nn::Var<T>& fat_water) const;
  nn::Var<T> forward(const nn::Var<T>& input) const;

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  int input_channels() const noexcept { return in_channels_; }
  nn::ParameterSet<T>& params() noexcept { return params_; }
  const nn::ParameterSet<T>& params() const noexcept { return params_; }

 private:
  struct Norm {
    nn::Var<T> gamma;
    nn::Var<T> beta;
  };
  DiscriminatorConfig cfg_;
  int in_channels_ = 0;
  nn::ParameterSet<T> params_;
  std::vector<nn::ConvParams<T>> layers_;
  std::vector<Norm> norms_;
};

inline constexpr double kInitStd = 0.02;
inline constexpr double kLeakySlope = 0.2;

}  // namespace dixon::model
