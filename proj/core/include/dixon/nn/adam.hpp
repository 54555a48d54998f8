#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dixon/nn/autograd.hpp"

namespace dixon::nn {

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments are flattened in parameter-set order.
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

template <typename T>
AdamState make_adam_state(const ParameterSet<T>& params, AdamHyper hyper = {}) {
  AdamState s;
  s.hyper = hyper;
  s.first_moment.assign(params.total_size(), 0.0);
  s.second_moment.assign(params.total_size(), 0.0);
  return s;
}

// One bias-corrected Adam update. Every parameter must hold a gradient.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState& state) {
  const std::size_t total = params.total_size();
  if (state.first_moment.size() != total || state.second_moment.size() != total) {
    fail(ErrorCode::kState, "Adam moments hold " + std::to_string(state.first_moment.size()) +
                                " values but the parameter set has " + std::to_string(total));
  }
  for (const auto& e : params.entries()) {
    if (!e.var.has_grad()) fail(ErrorCode::kState, "parameter " + e.name + " has no gradient");
  }
  state.step += 1;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  std::size_t offset = 0;
  for (auto& e : params.entries()) {
    Node<T>& node = *e.var.node();
    const std::size_t n = node.value.size();
    T* w = node.value.data();
    const T* g = node.grad.data();
    double* m = state.first_moment.data() + offset;
    double* v = state.second_moment.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - h.lr * mhat / (std::sqrt(vhat) + h.epsilon));
    }
    offset += n;
  }
}

}  // namespace dixon::nn
