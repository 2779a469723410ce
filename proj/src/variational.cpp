#include "rcg/variational.hpp"

#include "rcg/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rcg {

namespace {

double clamp_logvar(double lv) { return std::clamp(lv, kLogvarMin, kLogvarMax); }

void check_same_dim(std::span<const DiagGaussian> members, const char* who) {
  if (members.empty()) throw InvalidArgument(std::string(who) + ": no members");
  for (const auto& m : members)
    if (m.dim() != members.front().dim())
      throw InvalidArgument(std::string(who) + ": members differ in dimension");
}

struct DimTerms {
  Vector a;
  Vector m;
  Vector s;
};

// Assembles the d-th coordinate of every fused class posterior.
DimTerms collect_dim(std::span<const DiagGaussian> fused, const JointGaussianChain& joint,
                     std::size_t d) {
  const std::size_t K = fused.size();
  DimTerms t{joint.mean[d], Vector(K), Vector(K)};
  for (std::size_t k = 0; k < K; ++k) {
    t.m[k] = fused[k].mean()[d];
    t.s[k] = fused[k].variance(d);
  }
  return t;
}

void check_content_inputs(std::span<const DiagGaussian> fused, const JointGaussianChain& joint) {
  if (fused.size() != joint.num_classes())
    throw InvalidArgument("kl_content: need one fused posterior per class");
  for (const auto& q : fused)
    if (q.dim() != joint.content_dim())
      throw InvalidArgument("kl_content: posterior dimension differs from prior");
}

}  // namespace

DiagGaussian::DiagGaussian(Vector mean, Vector logvar)
    : mean_(std::move(mean)), logvar_(std::move(logvar)) {
  if (mean_.size() != logvar_.size())
    throw InvalidArgument("DiagGaussian: mean and logvar lengths differ");
  for (double& lv : logvar_) lv = clamp_logvar(lv);
}

double DiagGaussian::variance(std::size_t i) const { return std::exp(logvar_[i]); }

void GaussianGrad::add(const GaussianGrad& other, double weight) {
  simd::axpy(weight, other.mean.span(), mean.span());
  simd::axpy(weight, other.logvar.span(), logvar.span());
}

DiagGaussian poe_fuse(std::span<const DiagGaussian> members) {
  check_same_dim(members, "poe_fuse");
  const std::size_t n = members.front().dim();
  Vector mean(n), logvar(n);
  for (std::size_t i = 0; i < n; ++i) {
    double precision = 0.0;
    double weighted = 0.0;
    for (const auto& q : members) {
      const double p = std::exp(-q.logvar()[i]);
      precision += p;
      weighted += p * q.mean()[i];
    }
    mean[i] = weighted / precision;
    logvar[i] = -std::log(precision);
  }
  return DiagGaussian(std::move(mean), std::move(logvar));
}

std::vector<GaussianGrad> poe_fuse_backward(std::span<const DiagGaussian> members,
                                            const DiagGaussian& fused,
                                            const GaussianGrad& upstream) {
  check_same_dim(members, "poe_fuse_backward");
  const std::size_t n = fused.dim();
  std::vector<GaussianGrad> out(members.size(), GaussianGrad(n));
  for (std::size_t i = 0; i < n; ++i) {
    double precision = 0.0;
    for (const auto& q : members) precision += std::exp(-q.logvar()[i]);
    const double raw_lv = -std::log(precision);
    const double g_lv = (raw_lv > kLogvarMin && raw_lv < kLogvarMax) ? upstream.logvar[i] : 0.0;
    const double g_mu = upstream.mean[i];
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& q = members[j];
      const double w = std::exp(-q.logvar()[i]) / precision;
      out[j].mean[i] = g_mu * w;
      out[j].logvar[i] = g_lv * w - g_mu * w * (q.mean()[i] - fused.mean()[i]);
    }
  }
  return out;
}

Vector reparameterize(const DiagGaussian& q, const Vector& eps) {
  if (eps.size() != q.dim()) throw InvalidArgument("reparameterize: noise length mismatch");
  Vector z(q.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = q.mean()[i] + std::exp(0.5 * q.logvar()[i]) * eps[i];
  return z;
}

Vector reparam_sample(const DiagGaussian& q, Rng& rng) {
  return reparameterize(q, normal_draws(rng, q.dim()));
}

GaussianGrad reparameterize_backward(const DiagGaussian& q, const Vector& eps,
                                     const Vector& upstream) {
  GaussianGrad g(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) {
    g.mean[i] = upstream[i];
    g.logvar[i] = upstream[i] * 0.5 * std::exp(0.5 * q.logvar()[i]) * eps[i];
  }
  return g;
}

double kl_style(const DiagGaussian& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double mu = q.mean()[i];
    s += mu * mu + q.variance(i) - 1.0 - q.logvar()[i];
  }
  return 0.5 * s;
}

GaussianGrad kl_style_grad(const DiagGaussian& q) {
  GaussianGrad g(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) {
    g.mean[i] = q.mean()[i];
    g.logvar[i] = 0.5 * (q.variance(i) - 1.0);
  }
  return g;
}

GroupPosterior GroupPosterior::build(std::vector<std::vector<DiagGaussian>> members) {
  GroupPosterior g;
  g.fused.resize(members.size());
  for (std::size_t k = 0; k < members.size(); ++k)
    if (!members[k].empty()) g.fused[k] = poe_fuse(members[k]);
  g.members = std::move(members);
  return g;
}

std::vector<std::size_t> GroupPosterior::missing_classes() const {
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < fused.size(); ++k)
    if (!fused[k]) missing.push_back(k);
  return missing;
}

std::vector<DiagGaussian> GroupPosterior::complete() const {
  const auto missing = missing_classes();
  if (!missing.empty())
    throw InvalidArgument("kl_content: class " + std::to_string(missing.front()) +
                          " has no members in this batch; draw class-complete groups");
  std::vector<DiagGaussian> out;
  out.reserve(fused.size());
  for (const auto& f : fused) out.push_back(*f);
  return out;
}

double kl_content(const GroupPosterior& group, const JointGaussianChain& joint) {
  const auto fused = group.complete();
  return kl_content(fused, joint);
}

double kl_content(std::span<const DiagGaussian> fused, const JointGaussianChain& joint) {
  check_content_inputs(fused, joint);
  const std::size_t K = fused.size();
  double total = 0.0;
  for (std::size_t d = 0; d < joint.content_dim(); ++d) {
    const DimTerms t = collect_dim(fused, joint, d);
    const Matrix& l = joint.chol(d);
    // tr(C^-1 S) = sum_k s_k |L^-1 e_k|^2
    double trace = 0.0;
    Vector e(K);
    for (std::size_t k = 0; k < K; ++k) {
      e.fill(0.0);
      e[k] = 1.0;
      const Vector col = solve_lower(l, e);
      double sq = 0.0;
      for (double v : col) sq += v * v;
      trace += t.s[k] * sq;
    }
    Vector r(K);
    for (std::size_t k = 0; k < K; ++k) r[k] = t.a[k] - t.m[k];
    const Vector z = solve_lower(l, r);
    double quad = 0.0;
    for (double v : z) quad += v * v;
    double logdet_s = 0.0;
    for (std::size_t k = 0; k < K; ++k) logdet_s += fused[k].logvar()[d];
    total += 0.5 * (trace + quad - static_cast<double>(K) + logdet_from_chol(l) - logdet_s);
  }
  return total;
}

ContentKlGrad kl_content_grad(std::span<const DiagGaussian> fused, const RcgParams& params) {
  const JointGaussianChain joint = build_joint(params);
  check_content_inputs(fused, joint);
  const std::size_t K = fused.size();
  const std::size_t D = joint.content_dim();
  const double m_rule = params.sigma_rule();

  ContentKlGrad out{0.0, std::vector<GaussianGrad>(K, GaussianGrad(D)), RcgGradient(params)};
  for (std::size_t d = 0; d < D; ++d) {
    const DimTerms t = collect_dim(fused, joint, d);
    const Matrix& l = joint.chol(d);
    const Matrix cinv = inverse_from_chol(l);

    Vector r(K);
    for (std::size_t k = 0; k < K; ++k) r[k] = t.a[k] - t.m[k];
    const Vector w = solve_lower_transposed(l, solve_lower(l, r));  // C^-1 r

    double trace = 0.0, quad = 0.0, logdet_s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      trace += cinv(k, k) * t.s[k];
      quad += r[k] * w[k];
      logdet_s += fused[k].logvar()[d];
    }
    out.value += 0.5 * (trace + quad - static_cast<double>(K) + logdet_from_chol(l) - logdet_s);

    for (std::size_t k = 0; k < K; ++k) {
      out.fused[k].mean[d] = -w[k];
      // d/dlogvar = s_k * d/ds_k; zero where the posterior logvar sits on the clamp
      const double lv = fused[k].logvar()[d];
      const bool clamped = lv <= kLogvarMin || lv >= kLogvarMax;
      out.fused[k].logvar[d] = clamped ? 0.0 : 0.5 * (cinv(k, k) * t.s[k] - 1.0);
    }

    // dKL/dC_ij = 1/2 (C^-1 - C^-1 S C^-1 - w w^T)_ij
    Matrix gc(K, K);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        double csc = 0.0;
        for (std::size_t k = 0; k < K; ++k) csc += cinv(i, k) * t.s[k] * cinv(k, j);
        gc(i, j) = 0.5 * (cinv(i, j) - csc - w[i] * w[j]);
      }
    // C_ij = sum_{l <= min(i,j)} sigma_l^2, so dKL/d(sigma_l^2) sums gc over min(i,j) >= l.
    std::vector<double> g_var(K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) g_var[std::min(i, j)] += gc(i, j);
    for (std::size_t lvl = K - 1; lvl-- > 0;) g_var[lvl] += g_var[lvl + 1];

    // a_k = mu1 + sum_{l=1..k} delta_l, so dKL/d delta_l = sum_{k >= l} w_k.
    std::vector<double> g_a_tail(K + 1, 0.0);
    for (std::size_t k = K; k-- > 0;) g_a_tail[k] = g_a_tail[k + 1] + w[k];
    out.prior.mu1[d] += g_a_tail[0];

    for (std::size_t k = 1; k < K; ++k) {
      const std::size_t idx = d * (K - 1) + k - 1;
      const double delta = params.delta(d, k);
      const double sig = sigmoid(params.sigma_raw(d, k));
      const double sigma = params.sigma(d, k);
      const double g_sigma = g_var[k] * 2.0 * sigma;
      // sigma = delta/m * sig(raw_s), delta = exp(raw_d)
      const double g_delta = g_a_tail[k] + g_sigma * sig / m_rule;
      out.prior.delta_raw[idx] += g_delta * delta;
      out.prior.sigma_raw[idx] += g_sigma * delta / m_rule * sig * (1.0 - sig);
    }
  }
  return out;
}

double elbo_terms(double recon_s, double recon_t, double kl_u_s, double kl_u_t, double kl_c) {
  return recon_s + recon_t - kl_u_s - kl_u_t - kl_c;
}

}  // namespace rcg
