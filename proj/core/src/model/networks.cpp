#include "dixon/model/networks.hpp"

#include <random>

namespace dixon::model {

namespace {

template <typename T>
nn::Tensor<T> gaussian(std::vector<int> shape, std::mt19937_64& rng) {
  nn::Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, kInitStd);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
nn::ConvParams<T> make_conv(nn::ParameterSet<T>& ps, const std::string& name, int a, int b, int bias_len,
                            int stride, std::mt19937_64& rng) {
  nn::ConvParams<T> p;
  p.weight = ps.add(name + ".weight", gaussian<T>({a, b, nn::kKernel, nn::kKernel, nn::kKernel}, rng));
  p.bias = ps.add(name + ".bias", nn::Tensor<T>({bias_len}));
  p.stride = stride;
  p.padding = 1;
  return p;
}

template <typename NormT, typename T>
NormT make_norm(nn::ParameterSet<T>& ps, const std::string& name, int channels) {
  return NormT{ps.add(name + ".gamma", nn::Tensor<T>({channels}, T(1))), ps.add(name + ".beta", nn::Tensor<T>({channels}))};
}

}  // namespace

template <typename T>
Generator<T>::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int levels = cfg_.levels;
  const auto& f = cfg_.filters;
  int in = input_channels(cfg_.input_mode);
  for (int l = 0; l < levels; ++l) {
    const std::string name = "down" + std::to_string(l);
    down_.push_back(make_conv<T>(params_, name, f[static_cast<std::size_t>(l)], in, f[static_cast<std::size_t>(l)], 2, rng));
    // Outermost and innermost encoder levels are not normalized.
    if (l > 0 && l < levels - 1) {
      down_norm_.push_back(make_norm<Norm>(params_, name + ".norm", f[static_cast<std::size_t>(l)]));
    } else {
      down_norm_.push_back(Norm{});
    }
    in = f[static_cast<std::size_t>(l)];
  }
  // up_[l] maps level l+1 features back to level l resolution.
  up_.resize(static_cast<std::size_t>(levels));
  up_norm_.resize(static_cast<std::size_t>(levels));
  for (int l = levels - 1; l >= 0; --l) {
    const std::string name = "up" + std::to_string(l);
    const int from = (l == levels - 1) ? f[static_cast<std::size_t>(l)] : 2 * f[static_cast<std::size_t>(l)];
    const int to = (l == 0) ? cfg_.output_channels : f[static_cast<std::size_t>(l - 1)];
    // Transpose weights are (in, out, 4, 4, 4).
    up_[static_cast<std::size_t>(l)] = make_conv<T>(params_, name, from, to, to, 2, rng);
    if (l > 0) up_norm_[static_cast<std::size_t>(l)] = make_norm<Norm>(params_, name + ".norm", to);
  }
}

template <typename T>
nn::Var<T> Generator<T>::forward(const nn::Var<T>& input) const {
  nn::require_rank5(input.value(), "generator input");
  const int expected = input_channels(cfg_.input_mode);
  if (input.value().channels() != expected) {
    fail(ErrorCode::kShape, "generator expects " + std::to_string(expected) + " input channels, got " +
                                std::to_string(input.value().channels()));
  }
  const int div = 1 << cfg_.levels;
  for (int s : input.value().spatial()) {
    if (s % div != 0) fail(ErrorCode::kConfig, "input extent " + std::to_string(s) + " not divisible by " + std::to_string(div));
  }
  const auto slope = static_cast<T>(kLeakySlope);
  std::vector<nn::Var<T>> skips;
  nn::Var<T> h = input;
  for (std::size_t l = 0; l < down_.size(); ++l) {
    if (l > 0) h = nn::leaky_relu(h, slope);
    h = nn::conv3d(h, down_[l]);
    if (down_norm_[l].gamma) h = nn::norm_layer(h, down_norm_[l].gamma, down_norm_[l].beta, cfg_.norm);
    skips.push_back(h);
  }
  for (std::size_t l = up_.size(); l-- > 0;) {
    h = nn::relu(h);
    h = nn::conv_transpose3d(h, up_[l]);
    if (l == 0) break;
    h = nn::norm_layer(h, up_norm_[l].gamma, up_norm_[l].beta, cfg_.norm);
    h = nn::concat_channels(h, skips[l - 1]);
  }
  return nn::sigmoid(h);
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& cfg, int conditioning_channels, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  in_channels_ = (cfg_.conditioned ? conditioning_channels : 0) + 2;
  std::mt19937_64 rng(seed);
  int in = in_channels_;
  const std::size_t n = cfg_.strides.size();
  for (std::size_t l = 0; l < n; ++l) {
    const std::string name = "layer" + std::to_string(l);
    const int out = l + 1 == n ? 1 : cfg_.filters[l];
    layers_.push_back(make_conv<T>(params_, name, out, in, out, cfg_.strides[l], rng));
    if (l > 0 && l + 1 < n) {
      norms_.push_back(make_norm<Norm>(params_, name + ".norm", out));
    } else {
      norms_.push_back(Norm{});
    }
    in = out;
  }
}

template <typename T>
nn::Var<T> Discriminator<T>::forward(const nn::Var<T>& input) const {
  nn::require_rank5(input.value(), "discriminator input");
  if (input.value().channels() != in_channels_) {
    fail(ErrorCode::kShape, "discriminator expects " + std::to_string(in_channels_) + " channels, got " +
                                std::to_string(input.value().channels()));
  }
  const auto slope = static_cast<T>(kLeakySlope);
  nn::Var<T> h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = nn::conv3d(h, layers_[l]);
    if (l + 1 == layers_.size()) break;
    if (norms_[l].gamma) h = nn::norm_layer(h, norms_[l].gamma, norms_[l].beta, cfg_.norm);
    h = nn::leaky_relu(h, slope);
  }
  return h;
}

template <typename T>
nn::Var<T> Discriminator<T>::forward(const nn::Var<T>& conditioning, const nn::Var<T>& fat_water) const {
  if (!cfg_.conditioned || !conditioning) return forward(fat_water);
  return forward(nn::concat_channels(conditioning, fat_water));
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace dixon::model
