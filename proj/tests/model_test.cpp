#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dixon/model/config.hpp"
#include "dixon/model/networks.hpp"
#include "dixon/model/objective.hpp"
#include "dixon/nn/conv.hpp"
#include "gradcheck.hpp"

namespace dixon::model {
namespace {

using nn::Tensor;
using nn::Var;
using testing::gradcheck;
using testing::random_tensor;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kState;
}

GeneratorConfig toy_generator(InputMode mode, int levels, int crop) {
  GeneratorConfig g;
  g.input_mode = mode;
  g.levels = levels;
  g.filters.clear();
  for (int l = 0; l < levels; ++l) g.filters.push_back(std::min(4 << l, 16));
  g.crop_size = Index3::cube(crop);
  return g;
}

TEST(Generator, PreservesSpatialDims) {
  for (int crop : {16, 32, 64}) {
    for (InputMode mode : {InputMode::SingleIp, InputMode::DualIpOp}) {
      const Generator<float> g(toy_generator(mode, 3, crop), 1);
      std::mt19937_64 rng(2);
      Tensor<float> x({1, input_channels(mode), crop, crop, crop});
      for (float& v : x.values()) v = std::uniform_real_distribution<float>(0, 1)(rng);
      nn::NoGradGuard guard;
      const auto y = g.forward(Var<float>::constant(x));
      EXPECT_EQ(y.value().shape(), (std::vector<int>{1, 2, crop, crop, crop}));
      for (float v : y.value().values()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
      }
    }
  }
}

TEST(Generator, FiveLevelsOn32) {
  const Generator<float> g(toy_generator(InputMode::DualIpOp, 5, 32), 1);
  nn::NoGradGuard guard;
  EXPECT_EQ(g.forward(Var<float>::constant(Tensor<float>({1, 2, 32, 32, 32}, 0.5f))).value().shape(),
            (std::vector<int>{1, 2, 32, 32, 32}));
}

TEST(Generator, DefaultSixLevelsOnFullCrop) {
  GeneratorConfig cfg;
  cfg.input_mode = InputMode::SingleIp;
  cfg.filters = {4, 8, 8, 8, 8, 8};  // narrow to keep the 128^3 pass quick
  const Generator<float> g(cfg, 1);
  nn::NoGradGuard guard;
  EXPECT_EQ(g.forward(Var<float>::constant(Tensor<float>({1, 1, 128, 128, 128}, 0.5f))).value().shape(),
            (std::vector<int>{1, 2, 128, 128, 128}));
}

TEST(Generator, ConfigErrors) {
  GeneratorConfig g = toy_generator(InputMode::DualIpOp, 5, 48);
  EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::kConfig);
  g = toy_generator(InputMode::DualIpOp, 3, 16);
  g.filters.pop_back();
  EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::kConfig);
  g = toy_generator(InputMode::DualIpOp, 3, 16);
  const Generator<float> gen(g, 1);
  EXPECT_EQ(code_of([&] { gen.forward(Var<float>::constant(Tensor<float>({1, 1, 16, 16, 16}))); }), ErrorCode::kShape);
}

TEST(Generator, SeedDeterminesWeights) {
  const auto cfg = toy_generator(InputMode::DualIpOp, 3, 16);
  const Generator<float> a(cfg, 5), b(cfg, 5), c(cfg, 6);
  const auto& wa = a.params().entries()[0].var.value();
  const auto& wb = b.params().entries()[0].var.value();
  const auto& wc = c.params().entries()[0].var.value();
  EXPECT_TRUE(std::equal(wa.values().begin(), wa.values().end(), wb.values().begin()));
  EXPECT_FALSE(std::equal(wa.values().begin(), wa.values().end(), wc.values().begin()));
}

TEST(Generator, InitialisationStatistics) {
  GeneratorConfig cfg;
  cfg.levels = 4;
  cfg.filters = {16, 32, 64, 64};
  cfg.crop_size = Index3::cube(16);
  const Generator<double> g(cfg, 3);
  double s = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (const auto& e : g.params().entries()) {
    const auto& v = e.var.value();
    if (e.name.ends_with(".weight")) {
      for (double x : v.values()) {
        s += x;
        ss += x * x;
        ++n;
      }
    } else if (e.name.ends_with(".bias") || e.name.ends_with(".beta")) {
      for (double x : v.values()) EXPECT_EQ(x, 0.0) << e.name;
    } else if (e.name.ends_with(".gamma")) {
      for (double x : v.values()) EXPECT_EQ(x, 1.0) << e.name;
    }
  }
  EXPECT_NEAR(s / n, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(ss / n), 0.02, 1e-3);
}

TEST(Discriminator, DefaultReceptiveFieldIs16) {
  const DiscriminatorConfig d;
  EXPECT_EQ(receptive_field(d.strides), 16);
  d.validate();
}

TEST(Discriminator, ReceptiveFieldRecurrence) {
  EXPECT_EQ(receptive_field({1}), 4);
  EXPECT_EQ(receptive_field({2}), 4);
  EXPECT_EQ(receptive_field({2, 1}), 10);
  EXPECT_EQ(receptive_field({2, 1, 1, 1}), 22);
  EXPECT_EQ(receptive_field({2, 2, 1, 1}), 34);
  DiscriminatorConfig d;
  d.strides = {2, 2, 1, 1};
  d.filters = {8, 8, 8};
  EXPECT_EQ(code_of([&] { d.validate(); }), ErrorCode::kConfig);
}

TEST(Discriminator, LogitMapSize) {
  DiscriminatorConfig d;
  d.strides = {2, 1, 1, 1};
  d.filters = {4, 4, 4};
  d.expected_receptive_field = 22;
  const Discriminator<float> disc(d, 2, 1);
  EXPECT_EQ(disc.input_channels(), 4);
  nn::NoGradGuard guard;
  EXPECT_EQ(disc.forward(Var<float>::constant(Tensor<float>({1, 4, 32, 32, 32}, 0.3f))).value().shape(),
            (std::vector<int>{1, 1, 13, 13, 13}));
  const Discriminator<float> def(DiscriminatorConfig{}, 2, 1);
  EXPECT_EQ(def.forward(Var<float>::constant(Tensor<float>({1, 4, 32, 32, 32}, 0.3f))).value().shape(),
            (std::vector<int>{1, 1, 14, 14, 14}));
}

TEST(Discriminator, ConditioningChannels) {
  DiscriminatorConfig d;
  EXPECT_EQ(Discriminator<float>(d, 1, 1).input_channels(), 3);
  EXPECT_EQ(Discriminator<float>(d, 2, 1).input_channels(), 4);
  d.conditioned = false;
  const Discriminator<float> plain(d, 2, 1);
  EXPECT_EQ(plain.input_channels(), 2);
  nn::NoGradGuard guard;
  const auto out = plain.forward(Var<float>::constant(Tensor<float>({1, 2, 16, 16, 16}, 0.1f)),
                                 Var<float>::constant(Tensor<float>({1, 2, 16, 16, 16}, 0.2f)));
  EXPECT_EQ(out.value().dim(1), 1);
}

// The receptive field of the stride plan, measured by back-propagating a single
// interior logit through plain 4^3 convolutions with leaky ReLU.
TEST(Discriminator, ReceptiveFieldByGradientSupport) {
  const std::vector<int> strides = DiscriminatorConfig{}.strides;
  std::mt19937_64 rng(11);
  const int n = 40;
  Var<double> x = Var<double>::parameter(random_tensor({1, 1, n, n, n}, rng));
  Var<double> h = x;
  for (std::size_t l = 0; l < strides.size(); ++l) {
    nn::ConvParams<double> p;
    p.weight = Var<double>::constant(random_tensor({1, 1, 4, 4, 4}, rng));
    p.bias = Var<double>::constant(Tensor<double>({1}));
    p.stride = strides[l];
    h = nn::conv3d(h, p);
    if (l + 1 < strides.size()) h = nn::leaky_relu(h, 0.2);
  }
  const auto s = h.value().spatial();
  const int c = s[0] / 2;
  Tensor<double> pick(h.value().shape());
  pick[static_cast<std::size_t>(c + s[0] * (c + s[1] * c))] = 1.0;
  const Tensor<double> mask = pick;
  const auto logit = nn::make_op<double>(Tensor<double>::scalar(0.0), {h}, [mask](nn::Node<double>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * mask[i];
  });
  nn::backward(logit);
  std::array<int, 3> lo{n, n, n}, hi{-1, -1, -1};
  const auto& g = x.grad();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (g[static_cast<std::size_t>(i + n * (j + n * k))] == 0.0) continue;
        const std::array<int, 3> p{i, j, k};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
  for (int a = 0; a < 3; ++a) EXPECT_EQ(hi[a] - lo[a] + 1, 16) << "axis " << a;
}

Tensor<double> logits(std::vector<int> shape, double v) { return Tensor<double>(std::move(shape), v); }

TEST(Adversarial, ZeroLogitsGiveLn2) {
  const auto v = adversarial_losses(logits({1, 1, 3, 3, 3}, 0.0), logits({1, 1, 3, 3, 3}, 0.0));
  EXPECT_NEAR(v.adv_d, 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(v.adv_g, std::log(2.0), 1e-15);
}

TEST(Adversarial, PerfectDiscriminator) {
  const auto v = adversarial_losses(logits({1, 1, 2, 2, 2}, 60.0), logits({1, 1, 2, 2, 2}, -60.0));
  EXPECT_LT(v.adv_d, 1e-20);
  EXPECT_NEAR(v.adv_g, 60.0, 1e-9);
}

TEST(Adversarial, GeneratorLossDecreasesWithFakeLogit) {
  double prev = std::numeric_limits<double>::infinity();
  for (double z = -30.0; z <= 30.0; z += 0.5) {
    const double g = adversarial_losses(logits({1, 1, 1, 1, 1}, 0.0), logits({1, 1, 1, 1, 1}, z)).adv_g;
    EXPECT_LT(g, prev);
    EXPECT_GE(g, 0.0);
    prev = g;
  }
}

TEST(Adversarial, ShapeMismatch) {
  EXPECT_EQ(code_of([] { adversarial_losses(logits({1, 1, 2, 2, 2}, 0), logits({1, 1, 3, 2, 2}, 0)); }),
            ErrorCode::kShape);
}

TEST(Adversarial, VarLossesAgreeWithValues) {
  std::mt19937_64 rng(3);
  const auto r = random_tensor({2, 1, 3, 3, 3}, rng, -4, 4);
  const auto f = random_tensor({2, 1, 3, 3, 3}, rng, -4, 4);
  const auto v = adversarial_losses(r, f);
  EXPECT_NEAR(discriminator_loss(Var<double>::constant(r), Var<double>::constant(f)).item(), v.adv_d, 1e-12);
  EXPECT_NEAR(generator_adversarial_loss(Var<double>::constant(f)).item(), v.adv_g, 1e-12);
}

Var<double> cst(const Tensor<double>& t) { return Var<double>::constant(t); }

TEST(L1, Examples) {
  std::mt19937_64 rng(4);
  const auto f = random_tensor({1, 1, 4, 4, 4}, rng, 0, 1);
  const auto w = random_tensor({1, 1, 4, 4, 4}, rng, 0, 1);
  EXPECT_EQ(nn::l1_loss(cst(f), cst(w), cst(f), cst(w)).item(), 0.0);
  Tensor<double> f2 = f, w2 = w;
  for (double& v : f2.values()) v += 0.5;
  for (double& v : w2.values()) v += 0.5;
  EXPECT_NEAR(nn::l1_loss(cst(f2), cst(w2), cst(f), cst(w)).item(), 0.5, 1e-12);
  const auto a = random_tensor({2, 1, 3, 4, 5}, rng), b = random_tensor({2, 1, 3, 4, 5}, rng);
  const auto c = random_tensor({2, 1, 3, 4, 5}, rng), d = random_tensor({2, 1, 3, 4, 5}, rng);
  double oracle = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) oracle += std::abs(a[i] - c[i]) + std::abs(b[i] - d[i]);
  oracle /= 2.0 * static_cast<double>(a.size());
  EXPECT_NEAR(nn::l1_loss(cst(a), cst(b), cst(c), cst(d)).item(), oracle, 1e-12);
  EXPECT_EQ(code_of([&] { nn::l1_loss(cst(a), cst(b), cst(f), cst(w)); }), ErrorCode::kShape);
}

TEST(DixonLoss, ZeroOnConsistentPairsAndSwapInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_tensor({2, 1, 5, 4, 3}, rng, 0, 1);
    const auto w = random_tensor({2, 1, 5, 4, 3}, rng, 0, 1);
    Tensor<double> ip(f.shape()), op(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) {
      ip[i] = w[i] + f[i];
      op[i] = std::abs(w[i] - f[i]);
    }
    for (auto norm : {nn::DixonNorm::Rms, nn::DixonNorm::MeanSquare}) {
      EXPECT_EQ(nn::dixon_loss(cst(f), cst(w), cst(ip), cst(op), norm).item(), 0.0);
      EXPECT_EQ(nn::dixon_loss(cst(w), cst(f), cst(ip), cst(op), norm).item(), 0.0);
    }
    const auto pf = random_tensor(f.shape(), rng, 0, 1), pw = random_tensor(f.shape(), rng, 0, 1);
    for (auto norm : {nn::DixonNorm::Rms, nn::DixonNorm::MeanSquare}) {
      const double a = nn::dixon_loss(cst(pf), cst(pw), cst(ip), cst(op), norm).item();
      const double b = nn::dixon_loss(cst(pw), cst(pf), cst(ip), cst(op), norm).item();
      EXPECT_EQ(a, b);
      EXPECT_GT(a, 0.0);
    }
  }
}

TEST(DixonLoss, MatchesTwoTermOracle) {
  std::mt19937_64 rng(6);
  const auto f = random_tensor({1, 1, 6, 6, 6}, rng, 0, 1), w = random_tensor({1, 1, 6, 6, 6}, rng, 0, 1);
  const auto ip = random_tensor({1, 1, 6, 6, 6}, rng, 0, 2), op = random_tensor({1, 1, 6, 6, 6}, rng, 0, 1);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s1 += std::pow(ip[i] - (w[i] + f[i]), 2);
    s2 += std::pow(op[i] - std::abs(w[i] - f[i]), 2);
  }
  const double n = static_cast<double>(f.size());
  EXPECT_NEAR(nn::dixon_loss(cst(f), cst(w), cst(ip), cst(op), nn::DixonNorm::Rms).item(),
              std::sqrt(s1 / n) + std::sqrt(s2 / n), 1e-10);
  EXPECT_NEAR(nn::dixon_loss(cst(f), cst(w), cst(ip), cst(op), nn::DixonNorm::MeanSquare).item(), s1 / n + s2 / n,
              1e-10);
}

TEST(Objective, TotalIsAdvPlusLambdaRecon) {
  const auto b = combine_losses(0.7, 1.2, 0.01, 100.0);
  EXPECT_NEAR(b.total_g, 1.7, 1e-12);
  EXPECT_TRUE(b.finite());
  EXPECT_EQ(combine_losses(0.7, 1.2, 0.5, 0.0).total_g, 0.7);
  const auto v = generator_objective(Var<double>::constant(Tensor<double>::scalar(0.7)),
                                     Var<double>::constant(Tensor<double>::scalar(0.01)), 100.0);
  EXPECT_NEAR(v.item(), 1.7, 1e-12);
  EXPECT_FALSE(combine_losses(std::nan(""), 0, 0, 1).finite());
}

TEST(Objective, SingleInputDixonIsRejected) {
  EXPECT_EQ(code_of([] { check_objective(InputMode::SingleIp, ReconMode::Dixon); }), ErrorCode::kConfig);
  check_objective(InputMode::SingleIp, ReconMode::L1);
  check_objective(InputMode::DualIpOp, ReconMode::Dixon);
  ModelConfig m;
  m.generator.input_mode = InputMode::SingleIp;
  m.recon = ReconMode::Dixon;
  EXPECT_EQ(code_of([&] { m.validate(); }), ErrorCode::kConfig);
}

TEST(Objective, DixonReconNeedsNoLabels) {
  std::mt19937_64 rng(7);
  ReconInputs<double> in;
  in.pred_fat = cst(random_tensor({1, 1, 3, 3, 3}, rng, 0, 1));
  in.pred_water = cst(random_tensor({1, 1, 3, 3, 3}, rng, 0, 1));
  in.ip = cst(random_tensor({1, 1, 3, 3, 3}, rng, 0, 1));
  in.op = cst(random_tensor({1, 1, 3, 3, 3}, rng, 0, 1));
  EXPECT_GT(reconstruction_loss(in, ReconMode::Dixon).item(), 0.0);
  EXPECT_EQ(code_of([&] { reconstruction_loss(in, ReconMode::L1); }), ErrorCode::kInput);
}

// Finite differences of the full generator objective against a sampled
// subset of generator parameters, 8^3 crops and two levels, in double.
TEST(Gradients, EndToEndGeneratorObjective) {
  for (ReconMode recon : {ReconMode::L1, ReconMode::Dixon}) {
    GeneratorConfig gc = toy_generator(InputMode::DualIpOp, 2, 8);
    gc.filters = {3, 4};
    Generator<double> g(gc, 21);
    DiscriminatorConfig dc;
    dc.filters = {3, 3};
    const Discriminator<double> d(dc, 2, 22);
    std::mt19937_64 rng(23);
    const auto input = cst(random_tensor({1, 2, 8, 8, 8}, rng, 0, 1));
    const auto labels = cst(random_tensor({1, 2, 8, 8, 8}, rng, 0, 1));
    for (auto& e : d.params().entries()) e.var.node()->requires_grad = false;
    auto loss = [&] {
      const auto fake = g.forward(input);
      ReconInputs<double> in;
      in.pred_fat = nn::slice_channels(fake, 0, 1);
      in.pred_water = nn::slice_channels(fake, 1, 1);
      in.true_fat = nn::slice_channels(labels, 0, 1);
      in.true_water = nn::slice_channels(labels, 1, 1);
      in.ip = nn::slice_channels(input, 0, 1);
      in.op = nn::slice_channels(input, 1, 1);
      const auto adv = generator_adversarial_loss(d.forward(input, fake));
      return generator_objective(adv, reconstruction_loss(in, recon), 100.0);
    };
    // A bias that feeds instance norm is cancelled by the mean subtraction, so
    // its gradient is exactly zero and only finite-difference noise remains.
    std::vector<Var<double>> params;
    std::vector<Var<double>> cancelled;
    for (auto& e : g.params().entries()) {
      const std::string layer = e.name.substr(0, e.name.find('.'));
      const bool normed = g.params().find(layer + ".norm.gamma") != nullptr;
      (normed && e.name == layer + ".bias" ? cancelled : params).push_back(e.var);
    }
    ASSERT_FALSE(cancelled.empty());
    g.params().zero_grad();
    nn::backward(loss());
    for (const auto& c : cancelled) {
      for (double v : c.grad().values()) EXPECT_NEAR(v, 0.0, 1e-12);
    }
    const auto r = gradcheck(loss, params, 1e-6, 24);
    EXPECT_LT(r.worst_relative_error, 1e-4) << to_string(recon);
    EXPECT_GT(r.checked, 100u);
  }
}

TEST(Config, KeyValueRoundTrip) {
  ModelConfig m;
  m.generator.input_mode = InputMode::SingleIp;
  m.generator.levels = 3;
  m.generator.filters = {8, 16, 32};
  m.generator.crop_size = {16, 16, 32};
  m.generator.norm = nn::NormMode::Batch;
  m.discriminator.filters = {8, 16};
  m.discriminator.conditioned = false;
  m.lambda = 12.5;
  m.dixon_norm = nn::DixonNorm::MeanSquare;
  const ModelConfig r = ModelConfig::from_key_values(KeyValueConfig::parse(m.to_key_values().to_text()));
  EXPECT_EQ(r.to_key_values().to_text(), m.to_key_values().to_text());
  EXPECT_EQ(r.generator.crop_size, m.generator.crop_size);
  EXPECT_EQ(r.lambda, 12.5);
}

TEST(Config, Parsers) {
  EXPECT_EQ(parse_input_mode("SINGLE_IP"), InputMode::SingleIp);
  EXPECT_EQ(parse_input_mode("dual"), InputMode::DualIpOp);
  EXPECT_EQ(parse_recon_mode("DIXON"), ReconMode::Dixon);
  EXPECT_EQ(code_of([] { parse_input_mode("triple"); }), ErrorCode::kConfig);
  EXPECT_EQ(paper_scale_filters(6), (std::vector<int>{64, 128, 256, 512, 512, 512}));
}

}  // namespace
}  // namespace dixon::model
