#pragma once

#include "dixon/nn/autograd.hpp"

namespace dixon::nn {

// Elementwise activations.
template <typename T> Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);

enum class NormMode : std::uint8_t { Batch, Instance };

inline constexpr double kNormEpsilon = 1e-5;

// Standardizes each channel (over batch and space for Batch, over space only
// for Instance) then applies the per-channel affine gamma/beta.
template <typename T>
Var<T> norm_layer(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, NormMode mode);

// Channel concatenation of two rank-5 tensors with equal batch and spatial dims.
template <typename T> Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> slice_channels(const Var<T>& x, int first, int count);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);

// Mean of the logistic cross-entropy of `logits` against a constant label
// (1 = real, 0 = fake), evaluated in log-space from the logits.
template <typename T> Var<T> sigmoid_cross_entropy(const Var<T>& logits, T label);

// Mean absolute error over both channels jointly.
template <typename T>
Var<T> l1_loss(const Var<T>& pred_f, const Var<T>& pred_w, const Var<T>& true_f, const Var<T>& true_w);

enum class DixonNorm : std::uint8_t { Rms, MeanSquare };

// Physics consistency of a fat/water prediction with the acquired echoes:
//   rms(IP - (W + F)) + rms(OP - |W - F|)
// MeanSquare drops the square roots. The subgradient of |W - F| at 0 is 0.
template <typename T>
Var<T> dixon_loss(const Var<T>& pred_f, const Var<T>& pred_w, const Var<T>& ip, const Var<T>& op,
                  DixonNorm norm = DixonNorm::Rms);

}  // namespace dixon::nn
