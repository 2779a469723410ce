#include "rcg/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rcg {

namespace {

Estimate finish(double sum, double sum_sq, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, sum_sq / nn - mean * mean) * nn / (nn - 1.0);
  return {mean, std::sqrt(var / nn)};
}

}  // namespace

std::vector<Matrix> draw_chains(const RcgParams& params, std::size_t n, Rng& rng) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  std::vector<Matrix> draws(D, Matrix(n, K));
  for (std::size_t s = 0; s < n; ++s) {
    const Matrix c = sample_chain(params, rng);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t k = 0; k < K; ++k) draws[d](s, k) = c(k, d);
  }
  return draws;
}

std::vector<MomentEstimate> moments_from_draws(const std::vector<Matrix>& draws) {
  std::vector<MomentEstimate> out(draws.size());
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const Matrix& x = draws[d];
    const std::size_t n = x.rows();
    const std::size_t K = x.cols();
    if (n < 2) throw InvalidArgument("moments_from_draws: need at least two draws");
    const double nn = static_cast<double>(n);
    MomentEstimate& m = out[d];
    m.mean = Vector(K);
    m.mean_se = Vector(K);
    m.cov = Matrix(K, K);
    m.cov_se = Matrix(K, K);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t k = 0; k < K; ++k) m.mean[k] += x(s, k);
    for (std::size_t k = 0; k < K; ++k) m.mean[k] /= nn;

    // Products of centred draws; their spread gives the covariance error.
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          const double p = (x(s, i) - m.mean[i]) * (x(s, j) - m.mean[j]);
          sum += p;
          sum_sq += p * p;
        }
        const Estimate e = finish(sum, sum_sq, n);
        m.cov(i, j) = m.cov(j, i) = sum / (nn - 1.0);
        m.cov_se(i, j) = m.cov_se(j, i) = e.std_error;
      }
      m.mean_se[i] = std::sqrt(m.cov(i, i) / nn);
    }
  }
  return out;
}

std::vector<MomentEstimate> sample_moments(const RcgParams& params, std::size_t n, Rng& rng) {
  if (n < 2) throw InvalidArgument("sample_moments: need at least two draws");
  return moments_from_draws(draw_chains(params, n, rng));
}

double diag_log_density(const DiagGaussian& q, std::span<const double> x) {
  double lp = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double r = x[i] - q.mean()[i];
    lp += -0.5 * (std::log(2.0 * std::numbers::pi) + q.logvar()[i] + r * r / q.variance(i));
  }
  return lp;
}

Estimate mc_kl_content(std::span<const DiagGaussian> fused, const RcgParams& params,
                       std::size_t n, Rng& rng) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  if (fused.size() != K) throw InvalidArgument("mc_kl_content: need one posterior per class");
  if (n < 2) throw InvalidArgument("mc_kl_content: need at least two draws");
  Matrix c(K, D);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double log_q = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const Vector draw = reparam_sample(fused[k], rng);
      std::copy(draw.begin(), draw.end(), c.row(k).begin());
      log_q += diag_log_density(fused[k], draw.span());
    }
    const double r = log_q - chain_log_density(params, c);
    sum += r;
    sum_sq += r * r;
  }
  return finish(sum, sum_sq, n);
}

Estimate mc_kl_style(const DiagGaussian& q, std::size_t n, Rng& rng) {
  if (n < 2) throw InvalidArgument("mc_kl_style: need at least two draws");
  const DiagGaussian standard(Vector(q.dim()), Vector(q.dim()));
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Vector u = reparam_sample(q, rng);
    const double r = diag_log_density(q, u.span()) - diag_log_density(standard, u.span());
    sum += r;
    sum_sq += r * r;
  }
  return finish(sum, sum_sq, n);
}

}  // namespace rcg
