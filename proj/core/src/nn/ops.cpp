#include "dixon/nn/ops.hpp"

#include <cmath>

namespace dixon::nn {

namespace {

thread_local bool g_grad_mode = true;

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.value().shape());
  const Tensor<T>& in = x.value();
  for (std::size_t n = 0; n < in.size(); ++n) out[n] = fwd(in[n]);
  return make_op<T>(std::move(out), {x}, [deriv](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    Tensor<T>& g = p.grad_buffer();
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += self.grad[n] * deriv(p.value[n], self.value[n]);
  });
}

template <typename T>
T softplus(T x) {
  // log(1 + e^x) without overflow.
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

bool grad_mode_enabled() noexcept { return g_grad_mode; }
NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T in, T) { return in > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return stable_sigmoid(v); }, [](T, T out) { return out * (T(1) - out); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T out) { return T(1) - out * out; });
}

template <typename T>
Var<T> norm_layer(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, NormMode mode) {
  const Tensor<T>& in = x.value();
  require_rank5(in, "norm_layer");
  const int batch = in.batch();
  const int channels = in.channels();
  if (gamma.value().size() != static_cast<std::size_t>(channels) ||
      beta.value().size() != static_cast<std::size_t>(channels)) {
    fail(ErrorCode::kShape, "norm_layer: gamma/beta length must equal channel count " + std::to_string(channels));
  }
  const std::size_t spatial = in.spatial_size();
  // Statistics groups: one per channel (Batch) or per (sample, channel) (Instance).
  const int groups = mode == NormMode::Batch ? channels : batch * channels;
  const std::size_t group_size = mode == NormMode::Batch ? spatial * static_cast<std::size_t>(batch) : spatial;
  auto group_of = [&](int b, int c) { return mode == NormMode::Batch ? c : b * channels + c; };

  std::vector<double> mu(static_cast<std::size_t>(groups), 0.0);
  std::vector<double> inv_std(static_cast<std::size_t>(groups), 0.0);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const T* src = in.data() + (static_cast<std::size_t>(b) * channels + c) * spatial;
      double s = 0.0;
      for (std::size_t n = 0; n < spatial; ++n) s += src[n];
      mu[static_cast<std::size_t>(group_of(b, c))] += s;
    }
  }
  for (double& m : mu) m /= static_cast<double>(group_size);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t g = static_cast<std::size_t>(group_of(b, c));
      const T* src = in.data() + (static_cast<std::size_t>(b) * channels + c) * spatial;
      double s = 0.0;
      for (std::size_t n = 0; n < spatial; ++n) {
        const double d = src[n] - mu[g];
        s += d * d;
      }
      inv_std[g] += s;
    }
  }
  for (double& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(group_size) + kNormEpsilon);

  Tensor<T> xhat(in.shape());
  Tensor<T> out(in.shape());
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t g = static_cast<std::size_t>(group_of(b, c));
      const std::size_t off = (static_cast<std::size_t>(b) * channels + c) * spatial;
      const T ga = gamma.value()[static_cast<std::size_t>(c)];
      const T be = beta.value()[static_cast<std::size_t>(c)];
      for (std::size_t n = 0; n < spatial; ++n) {
        const T h = static_cast<T>((in[off + n] - mu[g]) * inv_std[g]);
        xhat[off + n] = h;
        out[off + n] = ga * h + be;
      }
    }
  }

  return make_op<T>(std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std, mode, batch, channels, spatial, group_size,
                     groups](Node<T>& self) {
                      auto group_of = [&](int b, int c) { return mode == NormMode::Batch ? c : b * channels + c; };
                      Node<T>& px = *self.parents[0];
                      Node<T>& pg = *self.parents[1];
                      Node<T>& pb = *self.parents[2];
                      const Tensor<T>& dy = self.grad;
                      const Tensor<T>& gam = pg.value;
                      if (pg.requires_grad || pb.requires_grad) {
                        for (int b = 0; b < batch; ++b) {
                          for (int c = 0; c < channels; ++c) {
                            const std::size_t off = (static_cast<std::size_t>(b) * channels + c) * spatial;
                            double sg = 0.0;
                            double sb = 0.0;
                            for (std::size_t n = 0; n < spatial; ++n) {
                              sg += dy[off + n] * xhat[off + n];
                              sb += dy[off + n];
                            }
                            if (pg.requires_grad) pg.grad_buffer()[static_cast<std::size_t>(c)] += static_cast<T>(sg);
                            if (pb.requires_grad) pb.grad_buffer()[static_cast<std::size_t>(c)] += static_cast<T>(sb);
                          }
                        }
                      }
                      if (!px.requires_grad) return;
                      // dx = inv_std / N * (N * dxh - sum(dxh) - xhat * sum(dxh * xhat)), dxh = dy * gamma
                      std::vector<double> sum_d(static_cast<std::size_t>(groups), 0.0);
                      std::vector<double> sum_dx(static_cast<std::size_t>(groups), 0.0);
                      for (int b = 0; b < batch; ++b) {
                        for (int c = 0; c < channels; ++c) {
                          const std::size_t g = static_cast<std::size_t>(group_of(b, c));
                          const std::size_t off = (static_cast<std::size_t>(b) * channels + c) * spatial;
                          const double ga = gam[static_cast<std::size_t>(c)];
                          for (std::size_t n = 0; n < spatial; ++n) {
                            const double d = dy[off + n] * ga;
                            sum_d[g] += d;
                            sum_dx[g] += d * xhat[off + n];
                          }
                        }
                      }
                      Tensor<T>& gx = px.grad_buffer();
                      const double count = static_cast<double>(group_size);
                      for (int b = 0; b < batch; ++b) {
                        for (int c = 0; c < channels; ++c) {
                          const std::size_t g = static_cast<std::size_t>(group_of(b, c));
                          const std::size_t off = (static_cast<std::size_t>(b) * channels + c) * spatial;
                          const double ga = gam[static_cast<std::size_t>(c)];
                          const double k = inv_std[g] / count;
                          for (std::size_t n = 0; n < spatial; ++n) {
                            const double d = dy[off + n] * ga;
                            gx[off + n] += static_cast<T>(k * (count * d - sum_d[g] - xhat[off + n] * sum_dx[g]));
                          }
                        }
                      }
                    });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& va = a.value();
  const Tensor<T>& vb = b.value();
  require_rank5(va, "concat_channels");
  require_rank5(vb, "concat_channels");
  if (va.batch() != vb.batch() || va.spatial() != vb.spatial()) {
    fail(ErrorCode::kShape, "concat_channels: " + va.shape_string() + " vs " + vb.shape_string());
  }
  const int ca = va.channels();
  const int cb = vb.channels();
  const std::size_t spatial = va.spatial_size();
  Tensor<T> out({va.batch(), ca + cb, va.dim(2), va.dim(3), va.dim(4)});
  for (int n = 0; n < va.batch(); ++n) {
    T* dst = out.data() + static_cast<std::size_t>(n) * (ca + cb) * spatial;
    std::copy_n(va.data() + static_cast<std::size_t>(n) * ca * spatial, ca * spatial, dst);
    std::copy_n(vb.data() + static_cast<std::size_t>(n) * cb * spatial, cb * spatial, dst + ca * spatial);
  }
  return make_op<T>(std::move(out), {a, b}, [ca, cb, spatial](Node<T>& self) {
    const int batch = self.value.batch();
    for (int side = 0; side < 2; ++side) {
      Node<T>& p = *self.parents[static_cast<std::size_t>(side)];
      if (!p.requires_grad) continue;
      Tensor<T>& g = p.grad_buffer();
      const int c = side == 0 ? ca : cb;
      const std::size_t skip = side == 0 ? 0 : static_cast<std::size_t>(ca) * spatial;
      for (int n = 0; n < batch; ++n) {
        const T* src = self.grad.data() + static_cast<std::size_t>(n) * (ca + cb) * spatial + skip;
        T* dst = g.data() + static_cast<std::size_t>(n) * c * spatial;
        for (std::size_t i = 0; i < c * spatial; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int first, int count) {
  const Tensor<T>& v = x.value();
  require_rank5(v, "slice_channels");
  if (first < 0 || count <= 0 || first + count > v.channels()) {
    fail(ErrorCode::kShape, "slice_channels: [" + std::to_string(first) + ", +" + std::to_string(count) +
                                ") outside " + v.shape_string());
  }
  const int channels = v.channels();
  const std::size_t spatial = v.spatial_size();
  Tensor<T> out({v.batch(), count, v.dim(2), v.dim(3), v.dim(4)});
  for (int n = 0; n < v.batch(); ++n) {
    std::copy_n(v.data() + (static_cast<std::size_t>(n) * channels + first) * spatial, count * spatial,
                out.data() + static_cast<std::size_t>(n) * count * spatial);
  }
  return make_op<T>(std::move(out), {x}, [first, count, channels, spatial](Node<T>& self) {
    Tensor<T>& g = self.parents[0]->grad_buffer();
    for (int n = 0; n < self.value.batch(); ++n) {
      const T* src = self.grad.data() + static_cast<std::size_t>(n) * count * spatial;
      T* dst = g.data() + (static_cast<std::size_t>(n) * channels + first) * spatial;
      for (std::size_t i = 0; i < count * spatial; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out(a.value().shape());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a.value()[n] + b.value()[n];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor<T>& g = p->grad_buffer();
      for (std::size_t n = 0; n < g.size(); ++n) g[n] += self.grad[n];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.value().shape());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a.value()[n] * factor;
  return make_op<T>(std::move(out), {a}, [factor](Node<T>& self) {
    Tensor<T>& g = self.parents[0]->grad_buffer();
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += self.grad[n] * factor;
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  double s = 0.0;
  for (T v : x.value().values()) s += v;
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(s)), {x}, [](Node<T>& self) {
    Tensor<T>& g = self.parents[0]->grad_buffer();
    const T d = self.grad[0];
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += d;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const auto count = static_cast<T>(x.value().size());
  return scale(sum(x), T(1) / count);
}

template <typename T>
Var<T> sigmoid_cross_entropy(const Var<T>& logits, T label) {
  const Tensor<T>& z = logits.value();
  if (z.empty()) fail(ErrorCode::kShape, "sigmoid_cross_entropy on an empty tensor");
  double s = 0.0;
  for (T v : z.values()) s += label * softplus(-v) + (T(1) - label) * softplus(v);
  const double count = static_cast<double>(z.size());
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(s / count)), {logits}, [label, count](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    Tensor<T>& g = p.grad_buffer();
    const T d = static_cast<T>(self.grad[0] / count);
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += d * (stable_sigmoid(p.value[n]) - label);
  });
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred_f, const Var<T>& pred_w, const Var<T>& true_f, const Var<T>& true_w) {
  require_same_shape(pred_f.value(), true_f.value(), "l1_loss fat");
  require_same_shape(pred_w.value(), true_w.value(), "l1_loss water");
  require_same_shape(pred_f.value(), pred_w.value(), "l1_loss channels");
  const std::size_t n = pred_f.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::abs(static_cast<double>(pred_f.value()[i]) - true_f.value()[i]);
    s += std::abs(static_cast<double>(pred_w.value()[i]) - true_w.value()[i]);
  }
  const double count = 2.0 * static_cast<double>(n);
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(s / count)), {pred_f, pred_w, true_f, true_w},
                    [count](Node<T>& self) {
                      const T d = static_cast<T>(self.grad[0] / count);
                      for (int pair = 0; pair < 2; ++pair) {
                        Node<T>& pred = *self.parents[static_cast<std::size_t>(pair)];
                        Node<T>& truth = *self.parents[static_cast<std::size_t>(pair + 2)];
                        for (std::size_t i = 0; i < pred.value.size(); ++i) {
                          const T diff = pred.value[i] - truth.value[i];
                          const T sgn = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
                          if (pred.requires_grad) pred.grad_buffer()[i] += d * sgn;
                          if (truth.requires_grad) truth.grad_buffer()[i] -= d * sgn;
                        }
                      }
                    });
}

template <typename T>
Var<T> dixon_loss(const Var<T>& pred_f, const Var<T>& pred_w, const Var<T>& ip, const Var<T>& op, DixonNorm norm) {
  require_same_shape(pred_f.value(), pred_w.value(), "dixon_loss predictions");
  require_same_shape(pred_f.value(), ip.value(), "dixon_loss in-phase");
  require_same_shape(pred_f.value(), op.value(), "dixon_loss opposed-phase");
  const std::size_t n = pred_f.value().size();
  if (n == 0) fail(ErrorCode::kShape, "dixon_loss on empty tensors");
  // r_ip = IP - (W + F), r_op = OP - |W - F|
  std::vector<double> r_ip(n);
  std::vector<double> r_op(n);
  double s_ip = 0.0;
  double s_op = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Residuals in T so that data built as ip = w + f, op = |w - f| gives exactly 0.
    const T f = pred_f.value()[i];
    const T w = pred_w.value()[i];
    r_ip[i] = static_cast<double>(ip.value()[i] - (w + f));
    r_op[i] = static_cast<double>(op.value()[i] - std::abs(w - f));
    s_ip += r_ip[i] * r_ip[i];
    s_op += r_op[i] * r_op[i];
  }
  const double count = static_cast<double>(n);
  const double ms_ip = s_ip / count;
  const double ms_op = s_op / count;
  const double value = norm == DixonNorm::Rms ? std::sqrt(ms_ip) + std::sqrt(ms_op) : ms_ip + ms_op;

  return make_op<T>(
      Tensor<T>::scalar(static_cast<T>(value)), {pred_f, pred_w, ip, op},
      [r_ip = std::move(r_ip), r_op = std::move(r_op), ms_ip, ms_op, count, norm](Node<T>& self) {
        // d(term)/d(r_i): r_i / (N * rms) for Rms, 2 r_i / N for MeanSquare; 0 when rms = 0.
        auto coeff = [&](double ms) {
          if (norm == DixonNorm::MeanSquare) return 2.0 / count;
          return ms > 0.0 ? 1.0 / (count * std::sqrt(ms)) : 0.0;
        };
        const double g = self.grad[0];
        const double k_ip = g * coeff(ms_ip);
        const double k_op = g * coeff(ms_op);
        Node<T>& pf = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pip = *self.parents[2];
        Node<T>& pop = *self.parents[3];
        for (std::size_t i = 0; i < r_ip.size(); ++i) {
          const double d_ip = k_ip * r_ip[i];
          const double d_op = k_op * r_op[i];
          const double diff = static_cast<double>(pw.value[i]) - pf.value[i];
          const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          // r_ip depends on W and F with slope -1; r_op on W with -sgn and on F with +sgn.
          if (pf.requires_grad) pf.grad_buffer()[i] += static_cast<T>(-d_ip + d_op * sgn);
          if (pw.requires_grad) pw.grad_buffer()[i] += static_cast<T>(-d_ip - d_op * sgn);
          if (pip.requires_grad) pip.grad_buffer()[i] += static_cast<T>(d_ip);
          if (pop.requires_grad) pop.grad_buffer()[i] += static_cast<T>(d_op);
        }
      });
}

#define DIXON_INSTANTIATE_OPS(T)                                                                          \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                                        \
  template Var<T> relu<T>(const Var<T>&);                                                                 \
  template Var<T> sigmoid<T>(const Var<T>&);                                                              \
  template Var<T> tanh<T>(const Var<T>&);                                                                 \
  template Var<T> norm_layer<T>(const Var<T>&, const Var<T>&, const Var<T>&, NormMode);                   \
  template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> slice_channels<T>(const Var<T>&, int, int);                                             \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> scale<T>(const Var<T>&, T);                                                             \
  template Var<T> sum<T>(const Var<T>&);                                                                  \
  template Var<T> mean<T>(const Var<T>&);                                                                 \
  template Var<T> sigmoid_cross_entropy<T>(const Var<T>&, T);                                             \
  template Var<T> l1_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);                 \
  template Var<T> dixon_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, DixonNorm);

DIXON_INSTANTIATE_OPS(float)
DIXON_INSTANTIATE_OPS(double)

#undef DIXON_INSTANTIATE_OPS

}  // namespace dixon::nn
