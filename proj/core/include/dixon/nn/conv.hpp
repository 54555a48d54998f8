#pragma once

#include <array>

#include "dixon/nn/autograd.hpp"

namespace dixon::nn {

inline constexpr int kKernel = 4;

// Parameters of a 4x4x4 convolution. For conv3d the weight is
// (out_ch, in_ch, 4, 4, 4); conv_transpose3d reads the same layout with the
// channel roles exchanged, i.e. (in_ch, out_ch, 4, 4, 4), so one ConvParams
// drives both directions of the adjoint pair. Kernel taps are x-fastest.
template <typename T>
struct ConvParams {
  Var<T> weight;
  Var<T> bias;  // (out_ch) of the op that uses it
  int stride = 2;
  int padding = 1;
};

// floor((n + 2p - 4) / s) + 1
int conv_output_extent(int n, int stride, int padding);
// (n - 1) s - 2p + 4
int conv_transpose_output_extent(int n, int stride, int padding);

template <typename T>
Var<T> conv3d(const Var<T>& input, const ConvParams<T>& p);

template <typename T>
Var<T> conv_transpose3d(const Var<T>& input, const ConvParams<T>& p);

}  // namespace dixon::nn
