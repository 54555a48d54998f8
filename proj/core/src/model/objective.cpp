#include "dixon/model/objective.hpp"

#include <cmath>

#include "dixon/nn/ops.hpp"

namespace dixon::model {

bool LossBundle::finite() const noexcept {
  return std::isfinite(adv_g) && std::isfinite(adv_d) && std::isfinite(recon) && std::isfinite(total_g);
}

LossBundle combine_losses(double adv_g, double adv_d, double recon, double lambda) {
  return LossBundle{adv_g, adv_d, recon, adv_g + lambda * recon, lambda};
}

AdversarialValues adversarial_losses(const nn::Tensor<double>& real_logits, const nn::Tensor<double>& fake_logits) {
  nn::require_same_shape(real_logits, fake_logits, "adversarial_losses");
  const auto real = nn::Var<double>::constant(real_logits);
  const auto fake = nn::Var<double>::constant(fake_logits);
  return {discriminator_loss(real, fake).item(), generator_adversarial_loss(fake).item()};
}

template <typename T>
nn::Var<T> discriminator_loss(const nn::Var<T>& real_logits, const nn::Var<T>& fake_logits) {
  nn::require_same_shape(real_logits.value(), fake_logits.value(), "discriminator_loss");
  return nn::add(nn::sigmoid_cross_entropy(real_logits, T(1)), nn::sigmoid_cross_entropy(fake_logits, T(0)));
}

template <typename T>
nn::Var<T> generator_adversarial_loss(const nn::Var<T>& fake_logits) {
  return nn::sigmoid_cross_entropy(fake_logits, T(1));
}

template <typename T>
nn::Var<T> reconstruction_loss(const ReconInputs<T>& in, ReconMode mode, nn::DixonNorm norm) {
  if (mode == ReconMode::L1) {
    if (!in.true_fat || !in.true_water) fail(ErrorCode::kInput, "L1 reconstruction needs fat/water labels");
    return nn::l1_loss(in.pred_fat, in.pred_water, in.true_fat, in.true_water);
  }
  if (!in.ip || !in.op) fail(ErrorCode::kInput, "Dixon reconstruction needs IP and OP");
  return nn::dixon_loss(in.pred_fat, in.pred_water, in.ip, in.op, norm);
}

template <typename T>
nn::Var<T> generator_objective(const nn::Var<T>& adv_g, const nn::Var<T>& recon, double lambda) {
  return nn::add(adv_g, nn::scale(recon, static_cast<T>(lambda)));
}

#define DIXON_INSTANTIATE_OBJECTIVE(T)                                                          \
  template nn::Var<T> discriminator_loss<T>(const nn::Var<T>&, const nn::Var<T>&);              \
  template nn::Var<T> generator_adversarial_loss<T>(const nn::Var<T>&);                         \
  template nn::Var<T> reconstruction_loss<T>(const ReconInputs<T>&, ReconMode, nn::DixonNorm); \
  template nn::Var<T> generator_objective<T>(const nn::Var<T>&, const nn::Var<T>&, double);

DIXON_INSTANTIATE_OBJECTIVE(float)
DIXON_INSTANTIATE_OBJECTIVE(double)

}  // namespace dixon::model
