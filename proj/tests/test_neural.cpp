#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "rcg/error.hpp"
#include "rcg/gradcheck_suite.hpp"
#include "rcg/neural.hpp"

using rcg::Activation;
using rcg::Matrix;
using rcg::Mlp;
using rcg::Rng;
using rcg::Vector;

namespace {

Mlp constant_dis(double logit) {
  // One sigmoid layer with zero weights: Dis(x) = sigmoid(logit) for all x.
  rcg::Layer l{Matrix(1, 2), Vector{logit}, Activation::sigmoid};
  return Mlp({l});
}

double half_sq_norm(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return 0.5 * s;
}

}  // namespace

TEST(Mlp, IdentityLayerPassesInputThrough) {
  const Mlp net({rcg::Layer{Matrix::identity(3), Vector(3), Activation::linear}});
  const Vector x{1, -2, 3};
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, ZeroTanhNetOutputsZero) {
  const Mlp net({rcg::Layer{Matrix(2, 3), Vector(2), Activation::tanh}});
  EXPECT_EQ(net.forward(Vector{1, 2, 3}), Vector(2));
}

TEST(Mlp, ForwardIsPure) {
  Rng rng(1);
  const Mlp net({4, 8, 3}, {Activation::tanh, Activation::linear}, rng);
  const Vector x{0.1, 0.2, -0.3, 0.4};
  EXPECT_EQ(net.forward(x), net.forward(x));
}

TEST(Mlp, InitIsScaledUniformWithZeroBias) {
  Rng rng(2);
  const Mlp net({10, 6}, {Activation::linear}, rng);
  const double r = std::sqrt(6.0 / 16.0);
  for (double w : net.layers()[0].weight.span()) EXPECT_LE(std::abs(w), r);
  for (double b : net.layers()[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(Mlp, DimensionMismatchThrows) {
  Rng rng(3);
  const Mlp net({4, 2}, {Activation::linear}, rng);
  EXPECT_THROW(net.forward(Vector{1, 2}), rcg::InvalidArgument);
}

TEST(Mlp, LinearLayerWeightGradIsOuterProduct) {
  Rng rng(4);
  const Mlp net({3, 2}, {Activation::linear}, rng);
  const Vector x{0.5, -1, 2};
  rcg::MlpCache cache;
  const Vector f = net.forward(x, &cache);
  auto grads = net.zero_grads();
  net.backward(cache, f, &grads);  // d(1/2 |f|^2)/df = f
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(grads.bias[0][i], f[i], 1e-15);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(grads.weight[0](i, j), f[i] * x[j], 1e-15);
  }
}

TEST(Mlp, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const Mlp net({3, 4, 2}, {Activation::relu, Activation::sigmoid}, rng);
  rcg::MlpCache cache;
  net.forward(Vector{1, 2, 3}, &cache);
  auto grads = net.zero_grads();
  const Vector gx = net.backward(cache, Vector(2), &grads);
  EXPECT_EQ(grads.max_abs(), 0.0);
  EXPECT_EQ(gx, Vector(3));
}

TEST(Mlp, BackwardMatchesFiniteDifferencesOnRandomNets) {
  Rng rng(6);
  const Activation acts[] = {Activation::tanh, Activation::sigmoid, Activation::linear,
                             Activation::relu};
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t depth = 1 + rng.below(3);
    std::vector<std::size_t> dims{2 + rng.below(5)};
    std::vector<Activation> act;
    for (std::size_t l = 0; l < depth; ++l) {
      dims.push_back(1 + rng.below(6));
      act.push_back(acts[rng.below(4)]);
    }
    Mlp net(dims, act, rng);
    for (auto& layer : net.layers())
      for (double& b : layer.bias) b = 0.3 * rng.normal();
    const Vector x = rcg::normal_draws(rng, dims.front());

    rcg::MlpCache cache;
    const Vector f = net.forward(x, &cache);
    auto grads = net.zero_grads();
    net.backward(cache, f, &grads);
    auto params = net.blocks("net");
    auto gblocks = grads.blocks("net");
    for (std::size_t b = 0; b < params.size(); ++b) {
      const auto r = rcg::gradcheck(params[b].values, gblocks[b].values,
                                    [&] { return half_sq_norm(net.forward(x)); });
      worst = std::max(worst, r.max_rel_error);
    }
  }
  // ReLU kinks are avoided in practice at these scales; a hit would show up
  // as an O(1) error.
  EXPECT_LT(worst, 1e-4);
}

TEST(CrossEntropy, UniformLogits) {
  EXPECT_NEAR(rcg::cross_entropy(Vector(5), 3).loss, std::log(5.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrect) {
  const auto r = rcg::cross_entropy(Vector{10, 0, 0}, 0);
  EXPECT_NEAR(r.loss, std::log1p(2.0 * std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(r.loss, 9.08e-5, 1e-7);
}

TEST(CrossEntropy, GradientSumsToZero) {
  const auto r = rcg::cross_entropy(Vector{0.3, -1, 2, 0.5}, 2);
  EXPECT_NEAR(std::accumulate(r.grad.begin(), r.grad.end(), 0.0), 0.0, 1e-15);
  EXPECT_LT(r.grad[2], 0.0);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  EXPECT_THROW(rcg::cross_entropy(Vector(3), 3), rcg::InvalidArgument);
  EXPECT_THROW(rcg::cross_entropy(Vector(3), -1), rcg::InvalidArgument);
}

TEST(L1Loss, SumOfAbsoluteResidualsWithSignGradient) {
  const auto r = rcg::l1_loss(Vector{1, 2, 3}, Vector{1.5, 2, 1});
  EXPECT_DOUBLE_EQ(r.loss, 2.5);
  EXPECT_EQ(r.grad, (Vector{1, 0, -1}));
}

TEST(Adversarial, HalfDiscriminatorGivesTwoLn2) {
  const auto r = rcg::adversarial_losses(constant_dis(0.0), Vector{1, 2}, Vector{3, 4});
  EXPECT_NEAR(r.discriminator_loss, 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(r.generator_loss, std::log(2.0), 1e-12);
}

TEST(Adversarial, PerfectDiscriminatorHasVanishingLoss) {
  // Dis(real) -> 1 through a large positive weight on the first input.
  rcg::Layer l{Matrix{{50, 0}}, Vector{0}, Activation::sigmoid};
  const auto r = rcg::adversarial_losses(Mlp({l}), Vector{1, 0}, Vector{-1, 0});
  // Clipping at 1 - 1e-12 leaves a floor of about 1e-12 per log term.
  EXPECT_LT(r.discriminator_loss, 1e-10);
}

TEST(Adversarial, GeneratorLossDecreasesInDisFake) {
  double prev = 1e300;
  for (double logit = -5; logit <= 5; logit += 0.5) {
    const double g = rcg::adversarial_losses(constant_dis(logit), Vector{0, 0}, Vector{0, 0})
                         .generator_loss;
    EXPECT_LT(g, prev);
    prev = g;
  }
}

TEST(Adversarial, ClippingKeepsLossesFinite) {
  const auto r = rcg::adversarial_losses(constant_dis(-1000), Vector{0, 0}, Vector{0, 0});
  EXPECT_TRUE(std::isfinite(r.generator_loss));
  EXPECT_TRUE(std::isfinite(r.discriminator_loss));
  EXPECT_NEAR(r.generator_loss, -std::log(1e-12), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  rcg::Adam adam;
  const rcg::ParamBlock pb{"p", p}, gb{"p", g};
  adam.step({&pb, 1}, {&gb, 1});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepIsStepSizeTimesSign) {
  for (double grad : {3.0, -0.01}) {
    std::vector<double> p{0.0}, g{grad};
    rcg::Adam adam;
    const rcg::ParamBlock pb{"p", p}, gb{"p", g};
    adam.step({&pb, 1}, {&gb, 1});
    // m_hat = g, v_hat = g^2, so the update is -lr * g / (|g| + eps).
    EXPECT_NEAR(p[0], -1e-3 * grad / (std::abs(grad) + 1e-8), 1e-15);
  }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  std::vector<double> p{1.0}, g{std::nan("")};
  rcg::Adam adam;
  const rcg::ParamBlock pb{"enc.w0", p}, gb{"enc.w0", g};
  try {
    adam.step({&pb, 1}, {&gb, 1});
    FAIL();
  } catch (const rcg::NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("enc.w0"), std::string::npos);
  }
  EXPECT_EQ(p[0], 1.0);
}

TEST(Adam, DeterministicTrajectories) {
  auto run = [] {
    Rng rng(7);
    std::vector<double> p{0.5, 0.5, 0.5}, g(3);
    rcg::Adam adam;
    for (int t = 0; t < 50; ++t) {
      for (std::size_t i = 0; i < 3; ++i) g[i] = p[i] + rng.normal();
      const rcg::ParamBlock pb{"p", p}, gb{"p", g};
      adam.step({&pb, 1}, {&gb, 1});
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, SeparableToyReachesFullAccuracy) {
  Rng rng(8);
  std::vector<Vector> xs;
  std::vector<int> ys;
  for (int i = 0; i < 100; ++i) {
    Vector x{rng.normal(), rng.normal()};
    const int y = x[0] + 0.5 * x[1] > 0 ? 1 : 0;
    if (std::abs(x[0] + 0.5 * x[1]) < 0.1) continue;
    xs.push_back(x);
    ys.push_back(y);
  }
  Mlp net({2, 8, 2}, {Activation::tanh, Activation::linear}, rng);
  rcg::Adam adam({.step_size = 0.05});
  auto accuracy = [&] {
    int ok = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Vector o = net.forward(xs[i]);
      ok += (o[1] > o[0]) == (ys[i] == 1);
    }
    return static_cast<double>(ok) / xs.size();
  };
  int step = 0;
  for (; step < 500 && accuracy() < 1.0; ++step) {
    auto grads = net.zero_grads();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      rcg::MlpCache cache;
      const auto ce = rcg::cross_entropy(net.forward(xs[i], &cache), ys[i]);
      net.backward(cache, ce.grad, &grads);
    }
    grads.scale(1.0 / xs.size());
    const auto pb = net.blocks("net");
    const auto gb = grads.blocks("net");
    adam.step(pb, gb);
  }
  EXPECT_EQ(accuracy(), 1.0) << "after " << step << " steps";
}

TEST(GradcheckSuite, AllLossesAndNetworksPass) {
  const auto result = rcg::run_gradcheck_suite(123, 4);
  EXPECT_FALSE(result.entries.empty());
  EXPECT_LT(result.max_rel_error(), rcg::kGradcheckTolerance) << result.worst().block;
}
