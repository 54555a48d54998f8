#pragma once

// Central finite-difference gradient checks used across the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dixon/nn/autograd.hpp"
#include "dixon/nn/ops.hpp"

namespace dixon::testing {

using nn::Tensor;
using nn::Var;

inline Tensor<double> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::size_t checked = 0;
};

// Compares backward() against central differences for every element of every
// input (or a strided subset when `max_per_input` is smaller than the size).
// The error of one input is ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12).
inline GradCheckResult gradcheck(const std::function<Var<double>()>& loss_fn, std::vector<Var<double>> inputs,
                                 double h = 1e-5, std::size_t max_per_input = 4096) {
  for (auto& in : inputs) in.clear_grad();
  Var<double> loss = loss_fn();
  nn::backward(loss);
  GradCheckResult r;
  for (auto& in : inputs) {
    const std::size_t n = in.value().size();
    const Tensor<double> analytic = in.has_grad() ? in.grad() : nn::zeros_like(in.value());
    const std::size_t stride = std::max<std::size_t>(1, n / max_per_input);
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = in.mutable_value()[i];
      const double saved = x;
      x = saved + h;
      const double up = loss_fn().item();
      x = saved - h;
      const double down = loss_fn().item();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++r.checked;
    }
    const double denom = std::max(std::sqrt(a2) + std::sqrt(n2), 1e-12);
    r.worst_relative_error = std::max(r.worst_relative_error, std::sqrt(diff2) / denom);
  }
  return r;
}

// Fixed random weighting turns a tensor output into a scalar with a
// non-degenerate gradient.
inline Var<double> weighted_sum(const Var<double>& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor<double> w = random_tensor(x.value().shape(), rng);
  const Tensor<double>& v = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
  return nn::make_op<double>(Tensor<double>::scalar(s), {x}, [w](nn::Node<double>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * w[i];
  });
}

}  // namespace dixon::testing
