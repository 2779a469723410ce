#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "rcg/error.hpp"
#include "rcg/monte_carlo.hpp"
#include "rcg/rcg_prior.hpp"
#include "rcg/variational.hpp"

using rcg::DiagGaussian;
using rcg::RcgParams;
using rcg::Rng;
using rcg::Vector;

namespace {

DiagGaussian gauss(std::initializer_list<double> mean, std::initializer_list<double> var) {
  Vector lv(var);
  for (double& v : lv) v = std::log(v);
  return DiagGaussian(Vector(mean), lv);
}

DiagGaussian random_gauss(Rng& rng, std::size_t d, double spread = 1.0) {
  Vector m(d), lv(d);
  for (std::size_t i = 0; i < d; ++i) {
    m[i] = spread * rng.normal();
    lv[i] = 0.5 * rng.normal();
  }
  return DiagGaussian(m, lv);
}

RcgParams three_class_example() {
  return RcgParams::from_constrained(3, 1, 3.0, {0.0}, {{3.0, 3.0}}, {{1.0, 1.0}});
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-6); }

}  // namespace

TEST(DiagGaussian, ClampsLogvar) {
  const DiagGaussian q(Vector{0, 0}, Vector{-50, 50});
  EXPECT_EQ(q.logvar()[0], rcg::kLogvarMin);
  EXPECT_EQ(q.logvar()[1], rcg::kLogvarMax);
}

TEST(PoeFuse, EqualExpertsHalveVariance) {
  const DiagGaussian m[] = {gauss({0}, {1}), gauss({0}, {1})};
  const DiagGaussian f = rcg::poe_fuse(m);
  EXPECT_NEAR(f.mean()[0], 0.0, 1e-15);
  EXPECT_NEAR(f.variance(0), 0.5, 1e-15);
}

TEST(PoeFuse, PrecisionWeightedMean) {
  const DiagGaussian m[] = {gauss({1}, {1}), gauss({3}, {1})};
  const DiagGaussian f = rcg::poe_fuse(m);
  EXPECT_NEAR(f.mean()[0], 2.0, 1e-15);
  EXPECT_NEAR(f.variance(0), 0.5, 1e-15);
}

TEST(PoeFuse, SingleExpertUnchanged) {
  const DiagGaussian m[] = {gauss({1.5, -2}, {0.3, 4})};
  const DiagGaussian f = rcg::poe_fuse(m);
  EXPECT_NEAR(rcg::max_abs_diff(f.mean(), m[0].mean()), 0.0, 1e-15);
  EXPECT_NEAR(rcg::max_abs_diff(f.logvar(), m[0].logvar()), 0.0, 1e-15);
}

TEST(PoeFuse, EmptyThrows) {
  EXPECT_THROW(rcg::poe_fuse(std::span<const DiagGaussian>{}), rcg::InvalidArgument);
}

TEST(PoeFuse, ProductOverFusedRatioIsConstant) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<DiagGaussian> members;
    const std::size_t dim = 1 + rng.below(4);
    for (std::size_t n = 0, count = 1 + rng.below(5); n < count; ++n)
      members.push_back(random_gauss(rng, dim));
    const DiagGaussian fused = rcg::poe_fuse(members);
    double lo = 1e300, hi = -1e300;
    for (int p = 0; p < 10; ++p) {
      Vector x = rcg::normal_draws(rng, dim);
      double log_ratio = -rcg::diag_log_density(fused, x.span());
      for (const auto& m : members) log_ratio += rcg::diag_log_density(m, x.span());
      lo = std::min(lo, log_ratio);
      hi = std::max(hi, log_ratio);
    }
    // Relative spread of the ratio itself.
    EXPECT_LT(std::expm1(hi - lo), 1e-8);
  }
}

TEST(Reparam, ClampedVarianceReturnsMean) {
  Rng rng(2);
  const DiagGaussian q(Vector{1.5}, Vector{-1000});
  EXPECT_NEAR(rcg::reparam_sample(q, rng)[0], 1.5, 1e-3);
}

TEST(Reparam, SameSeedSameDraw) {
  const DiagGaussian q = gauss({0.2, 1}, {2, 0.5});
  Rng a(3), b(3);
  EXPECT_EQ(rcg::reparam_sample(q, a), rcg::reparam_sample(q, b));
}

TEST(Reparam, MomentsMatch) {
  const DiagGaussian q = gauss({0.5, -1}, {2.0, 0.25});
  Rng rng(4);
  const std::size_t n = 100000;
  double s[2] = {}, ss[2] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const Vector x = rcg::reparam_sample(q, rng);
    for (int d = 0; d < 2; ++d) {
      s[d] += x[d];
      ss[d] += x[d] * x[d];
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double mean = s[d] / n;
    const double var = (ss[d] - n * mean * mean) / (n - 1);
    const double v = q.variance(d);
    EXPECT_LT(std::abs(mean - q.mean()[d]), 3.0 * std::sqrt(v / n));
    // Var of the sample variance of a Gaussian is 2 v^2 / (n - 1).
    EXPECT_LT(std::abs(var - v), 3.0 * v * std::sqrt(2.0 / (n - 1)));
  }
}

TEST(KlStyle, Examples) {
  EXPECT_DOUBLE_EQ(rcg::kl_style(gauss({0, 0, 0}, {1, 1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(rcg::kl_style(gauss({1}, {1})), 0.5);
}

TEST(KlStyle, MatchesMonteCarlo) {
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const DiagGaussian q = random_gauss(rng, 1 + rng.below(6));
    const double closed = rcg::kl_style(q);
    const auto mc = rcg::mc_kl_style(q, 200000, rng);
    EXPECT_LT(rel_err(mc.value, closed), 0.02) << closed << " vs " << mc.value;
  }
}

TEST(KlContent, MatchingSingleClassIsZero) {
  RcgParams p(1, 1, 3.0);
  p.mu1_values()[0] = 0.4;
  const DiagGaussian fused[] = {gauss({0.4}, {1.0})};
  EXPECT_NEAR(rcg::kl_content(fused, rcg::build_joint(p)), 0.0, 1e-14);
}

TEST(KlContent, ThreeClassMatchesMonteCarlo) {
  const RcgParams p = three_class_example();
  const DiagGaussian fused[] = {gauss({1}, {0.25}), gauss({2}, {0.25}), gauss({3}, {0.25})};
  const double closed = rcg::kl_content(fused, rcg::build_joint(p));
  Rng rng(6);
  const auto mc = rcg::mc_kl_content(fused, p, 200000, rng);
  EXPECT_LT(rel_err(mc.value, closed), 0.02) << closed << " vs " << mc.value;
}

TEST(KlContent, AdditiveOverDimensions) {
  const RcgParams one = three_class_example();
  const RcgParams two = RcgParams::from_constrained(3, 2, 3.0, {0.0, 0.0}, {{3.0, 3.0}, {3.0, 3.0}},
                                                    {{1.0, 1.0}, {1.0, 1.0}});
  const DiagGaussian f1[] = {gauss({1}, {0.25}), gauss({2}, {0.5}), gauss({3}, {2})};
  const DiagGaussian f2[] = {gauss({1, 1}, {0.25, 0.25}), gauss({2, 2}, {0.5, 0.5}),
                             gauss({3, 3}, {2, 2})};
  EXPECT_DOUBLE_EQ(rcg::kl_content(f2, rcg::build_joint(two)),
                   2.0 * rcg::kl_content(f1, rcg::build_joint(one)));
}

TEST(KlContent, NonNegativeOnRandomInputs) {
  Rng rng(7);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t k = 1 + rng.below(6), d = 1 + rng.below(6);
    RcgParams p(k, d, 3.0);
    for (double& v : p.delta_raw()) v = rng.normal();
    for (double& v : p.sigma_raw()) v = rng.normal();
    std::vector<DiagGaussian> fused;
    for (std::size_t c = 0; c < k; ++c) fused.push_back(random_gauss(rng, d, 3.0));
    EXPECT_GE(rcg::kl_content(fused, rcg::build_joint(p)), -1e-12);
  }
}

TEST(KlContent, MissingClassThrows) {
  std::vector<std::vector<DiagGaussian>> members(3);
  members[0].push_back(gauss({0}, {1}));
  members[2].push_back(gauss({1}, {1}));
  const auto group = rcg::GroupPosterior::build(members);
  ASSERT_EQ(group.missing_classes(), std::vector<std::size_t>{1});
  EXPECT_THROW(rcg::kl_content(group, rcg::build_joint(three_class_example())), rcg::Error);
}

TEST(KlContent, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const double h = 1e-5;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t k = 2 + rng.below(4), d = 1 + rng.below(3);
    RcgParams p(k, d, 2.0 + rng.uniform());
    for (double& v : p.mu1_values()) v = rng.normal();
    for (double& v : p.delta_raw()) v = 0.5 * rng.normal();
    for (double& v : p.sigma_raw()) v = rng.normal();
    std::vector<DiagGaussian> fused;
    for (std::size_t c = 0; c < k; ++c) fused.push_back(random_gauss(rng, d));
    const auto g = rcg::kl_content_grad(fused, p);
    EXPECT_NEAR(g.value, rcg::kl_content(fused, rcg::build_joint(p)), 1e-10);

    auto check = [&](double analytic, const std::function<double(double)>& f) {
      const double numeric = (f(h) - f(-h)) / (2 * h);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      EXPECT_LT(std::abs(analytic - numeric) / denom, 1e-4) << analytic << " vs " << numeric;
    };
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        check(g.fused[c].mean[j], [&](double e) {
          auto f = fused;
          Vector m = f[c].mean();
          m[j] += e;
          f[c] = DiagGaussian(m, f[c].logvar());
          return rcg::kl_content(f, rcg::build_joint(p));
        });
        check(g.fused[c].logvar[j], [&](double e) {
          auto f = fused;
          Vector lv = f[c].logvar();
          lv[j] += e;
          f[c] = DiagGaussian(f[c].mean(), lv);
          return rcg::kl_content(f, rcg::build_joint(p));
        });
      }
    }
    for (std::size_t i = 0; i < p.mu1_values().size(); ++i)
      check(g.prior.mu1[i], [&](double e) {
        RcgParams q = p;
        q.mu1_values()[i] += e;
        return rcg::kl_content(fused, rcg::build_joint(q));
      });
    for (std::size_t i = 0; i < p.delta_raw().size(); ++i)
      check(g.prior.delta_raw[i], [&](double e) {
        RcgParams q = p;
        q.delta_raw()[i] += e;
        return rcg::kl_content(fused, rcg::build_joint(q));
      });
    for (std::size_t i = 0; i < p.sigma_raw().size(); ++i)
      check(g.prior.sigma_raw[i], [&](double e) {
        RcgParams q = p;
        q.sigma_raw()[i] += e;
        return rcg::kl_content(fused, rcg::build_joint(q));
      });
  }
}

TEST(KlStyle, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  const DiagGaussian q = random_gauss(rng, 4);
  const auto g = rcg::kl_style_grad(q);
  const double h = 1e-5;
  for (std::size_t j = 0; j < 4; ++j) {
    Vector mp = q.mean(), mm = q.mean();
    mp[j] += h;
    mm[j] -= h;
    const double dm = (rcg::kl_style(DiagGaussian(mp, q.logvar())) -
                       rcg::kl_style(DiagGaussian(mm, q.logvar()))) / (2 * h);
    EXPECT_NEAR(g.mean[j], dm, 1e-6);
    Vector lp = q.logvar(), lm = q.logvar();
    lp[j] += h;
    lm[j] -= h;
    const double dl = (rcg::kl_style(DiagGaussian(q.mean(), lp)) -
                       rcg::kl_style(DiagGaussian(q.mean(), lm))) / (2 * h);
    EXPECT_NEAR(g.logvar[j], dl, 1e-6);
  }
}

TEST(Elbo, Examples) {
  EXPECT_DOUBLE_EQ(rcg::elbo_terms(0, 0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(rcg::elbo_terms(-1, -1, 0.5, 0.5, 1), -4.0);
  EXPECT_LT(rcg::elbo_terms(-1, -1, 0.5, 0.5, 1.1), rcg::elbo_terms(-1, -1, 0.5, 0.5, 1.0));
}
