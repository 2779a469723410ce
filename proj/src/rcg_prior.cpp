#include "rcg/rcg_prior.hpp"

#include <cmath>
#include <numbers>
#include <thread>

namespace rcg {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (p <= 0.0) return -kRawSaturation;
  if (p >= 1.0) return kRawSaturation;
  return std::log(p) - std::log1p(-p);
}

RcgParams::RcgParams(std::size_t num_classes, std::size_t content_dim, double sigma_rule)
    : num_classes_(num_classes),
      content_dim_(content_dim),
      sigma_rule_(sigma_rule),
      mu1_(content_dim, 0.0),
      delta_raw_(content_dim * (num_classes ? num_classes - 1 : 0), 0.0),
      sigma_raw_(content_dim * (num_classes ? num_classes - 1 : 0), 0.0) {
  if (num_classes == 0 || content_dim == 0)
    throw InvalidArgument("RcgParams: K and D must be positive");
  if (!(sigma_rule > 0.0) || !std::isfinite(sigma_rule))
    throw InvalidArgument("RcgParams: sigma_rule must be a positive real");
}

RcgParams RcgParams::from_constrained(std::size_t num_classes, std::size_t content_dim,
                                      double sigma_rule, const std::vector<double>& mu1,
                                      const std::vector<std::vector<double>>& delta,
                                      const std::vector<std::vector<double>>& sigma) {
  RcgParams p(num_classes, content_dim, sigma_rule);
  if (mu1.size() != content_dim || delta.size() != content_dim || sigma.size() != content_dim)
    throw InvalidArgument("RcgParams::from_constrained: expected one entry per dimension");
  for (std::size_t d = 0; d < content_dim; ++d) {
    p.mu1_[d] = mu1[d];
    if (delta[d].size() != num_classes - 1 || sigma[d].size() != num_classes - 1)
      throw InvalidArgument("RcgParams::from_constrained: expected K-1 gaps per dimension");
    for (std::size_t k = 1; k < num_classes; ++k) {
      const double dk = delta[d][k - 1];
      const double sk = sigma[d][k - 1];
      if (!(dk > 0.0)) throw InvalidArgument("RcgParams::from_constrained: delta must be > 0");
      const double ratio = sk * sigma_rule / dk;
      if (ratio < 0.0 || ratio > 1.0 + 1e-12)
        throw InvalidArgument("RcgParams::from_constrained: sigma outside [0, delta/m]");
      p.delta_raw(d, k) = std::log(dk);
      p.sigma_raw(d, k) = ratio <= 0.0 ? -1000.0 : logit(std::min(ratio, 1.0));
    }
  }
  return p;
}

double RcgParams::delta(std::size_t d, std::size_t k) const {
  return std::exp(delta_raw_[index(d, k)]);
}

double RcgParams::sigma(std::size_t d, std::size_t k) const {
  if (k == 0) return 1.0;
  const double dk = delta(d, k);
  double s = dk / sigma_rule_ * sigmoid(sigma_raw_[index(d, k)]);
  // Rounding can leave m * s one ulp above delta; step down so the rule
  // holds exactly in floating point.
  while (sigma_rule_ * s > dk) s = std::nextafter(s, 0.0);
  return s;
}

void RcgGradient::scale(double s) {
  for (auto* v : {&mu1, &delta_raw, &sigma_raw})
    for (double& x : *v) x *= s;
}

void RcgGradient::add(const RcgGradient& other, double weight) {
  for (std::size_t i = 0; i < mu1.size(); ++i) mu1[i] += weight * other.mu1[i];
  for (std::size_t i = 0; i < delta_raw.size(); ++i) delta_raw[i] += weight * other.delta_raw[i];
  for (std::size_t i = 0; i < sigma_raw.size(); ++i) sigma_raw[i] += weight * other.sigma_raw[i];
}

JointGaussianChain build_joint(const RcgParams& params) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  JointGaussianChain joint;
  joint.mean.reserve(D);
  joint.cov.reserve(D);
  for (std::size_t d = 0; d < D; ++d) {
    Vector a(K);
    std::vector<double> sig(K);
    a[0] = params.mu1(d);
    sig[0] = 1.0;
    for (std::size_t k = 1; k < K; ++k) {
      a[k] = a[k - 1] + params.delta(d, k);
      sig[k] = params.sigma(d, k);
    }
    Matrix c(K, K);
    Matrix l(K, K);
    double running = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      running += sig[j] * sig[j];
      // Cov(c_i, c_j) for i >= j depends on j = min(i, j) only.
      for (std::size_t i = j; i < K; ++i) {
        c(i, j) = running;
        c(j, i) = running;
        l(i, j) = sig[j];
      }
    }
    joint.mean.push_back(std::move(a));
    joint.cov.emplace_back(std::move(c), std::move(l));
  }
  return joint;
}

Matrix sample_chain(const RcgParams& params, Rng& rng) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  Matrix c(K, D);
  for (std::size_t d = 0; d < D; ++d) {
    c(0, d) = params.mu1(d) + rng.normal();
    for (std::size_t k = 1; k < K; ++k)
      c(k, d) = c(k - 1, d) + params.delta(d, k) + params.sigma(d, k) * rng.normal();
  }
  return c;
}

double log_density(const JointGaussianChain& joint, const Matrix& anchors) {
  const std::size_t K = joint.num_classes();
  const std::size_t D = joint.content_dim();
  if (anchors.rows() != K || anchors.cols() != D)
    throw InvalidArgument("log_density: anchors must be K x D");
  double total = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    Vector r(K);
    for (std::size_t k = 0; k < K; ++k) r[k] = anchors(k, d) - joint.mean[d][k];
    const Matrix& l = joint.chol(d);
    const Vector z = solve_lower(l, r);
    double quad = 0.0;
    for (double v : z) quad += v * v;
    total += -0.5 * (static_cast<double>(K) * kLog2Pi + logdet_from_chol(l) + quad);
  }
  return total;
}

double chain_log_density(const RcgParams& params, const Matrix& anchors) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  if (anchors.rows() != K || anchors.cols() != D)
    throw InvalidArgument("chain_log_density: anchors must be K x D");
  auto log_normal = [](double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * (kLog2Pi + z * z) - std::log(sd);
  };
  double total = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    total += log_normal(anchors(0, d), params.mu1(d), 1.0);
    for (std::size_t k = 1; k < K; ++k)
      total += log_normal(anchors(k, d), anchors(k - 1, d) + params.delta(d, k),
                          params.sigma(d, k));
  }
  return total;
}

Matrix poset_violation_rate(const RcgParams& params, std::size_t n, Rng& rng,
                            std::size_t workers) {
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();
  if (K < 2) throw InvalidArgument("poset_violation_rate: needs K >= 2");
  if (n == 0) throw InvalidArgument("poset_violation_rate: n must be positive");
  workers = std::max<std::size_t>(1, std::min(workers, n));
  const std::uint64_t base = rng.next_u64();

  std::vector<std::vector<std::size_t>> counts(workers,
                                               std::vector<std::size_t>((K - 1) * D, 0));
  auto run = [&](std::size_t w) {
    Rng local(base + w);
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    auto& cnt = counts[w];
    for (std::size_t s = begin; s < end; ++s) {
      const Matrix c = sample_chain(params, local);
      for (std::size_t k = 1; k < K; ++k)
        for (std::size_t d = 0; d < D; ++d)
          if (c(k, d) <= c(k - 1, d)) ++cnt[(k - 1) * D + d];
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  Matrix rate(K - 1, D);
  for (std::size_t w = 0; w < workers; ++w)
    for (std::size_t i = 0; i < rate.size(); ++i) rate.span()[i] += static_cast<double>(counts[w][i]);
  for (double& v : rate.span()) v /= static_cast<double>(n);
  return rate;
}

bool triplet_check(const Matrix& anchors) {
  const std::size_t K = anchors.rows();
  if (K < 3) throw InvalidArgument("triplet_check: needs K >= 3");
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < anchors.cols(); ++d) {
      const double diff = anchors(a, d) - anchors(b, d);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j)
      for (std::size_t k = j + 1; k < K; ++k)
        if (!(dist(i, k) > std::max(dist(i, j), dist(j, k)))) return false;
  return true;
}

bool is_poset_aligned(const Matrix& anchors) {
  for (std::size_t k = 1; k < anchors.rows(); ++k)
    for (std::size_t d = 0; d < anchors.cols(); ++d)
      if (!(anchors(k, d) > anchors(k - 1, d))) return false;
  return true;
}

}  // namespace rcg
