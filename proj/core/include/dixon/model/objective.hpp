#pragma once

#include "dixon/model/config.hpp"
#include "dixon/nn/autograd.hpp"

namespace dixon::model {

inline constexpr double kDefaultLambda = 100.0;

struct LossBundle {
  double adv_g = 0.0;
  double adv_d = 0.0;
  double recon = 0.0;
  double total_g = 0.0;
  double lambda = kDefaultLambda;

  bool finite() const noexcept;
};

// total_g = adv_g + lambda * recon
LossBundle combine_losses(double adv_g, double adv_d, double recon, double lambda);

struct AdversarialValues {
  double adv_d = 0.0;
  double adv_g = 0.0;
};

// adv_d = CE(real -> 1) + CE(fake -> 0), adv_g = CE(fake -> 1), from logits.
AdversarialValues adversarial_losses(const nn::Tensor<double>& real_logits, const nn::Tensor<double>& fake_logits);

template <typename T>
nn::Var<T> discriminator_loss(const nn::Var<T>& real_logits, const nn::Var<T>& fake_logits);

template <typename T>
nn::Var<T> generator_adversarial_loss(const nn::Var<T>& fake_logits);

// Inputs to the reconstruction term. `true_fat`/`true_water` are read only in
// L1 mode and `ip`/`op` only in Dixon mode.
template <typename T>
struct ReconInputs {
  nn::Var<T> pred_fat;
  nn::Var<T> pred_water;
  nn::Var<T> true_fat;
  nn::Var<T> true_water;
  nn::Var<T> ip;
  nn::Var<T> op;
};

template <typename T>
nn::Var<T> reconstruction_loss(const ReconInputs<T>& in, ReconMode mode, nn::DixonNorm norm = nn::DixonNorm::Rms);

// Differentiable adv_g + lambda * recon.
template <typename T>
nn::Var<T> generator_objective(const nn::Var<T>& adv_g, const nn::Var<T>& recon, double lambda);

}  // namespace dixon::model
