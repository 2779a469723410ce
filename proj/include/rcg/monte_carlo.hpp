#pragma once

// Sampling estimators used to cross-check the closed forms. They only use
// chain sampling and factor-by-factor densities, never the joint moments.

#include <cstddef>
#include <span>
#include <vector>

#include "rcg/rcg_prior.hpp"
#include "rcg/tensor.hpp"
#include "rcg/variational.hpp"

namespace rcg {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample moments of n chain draws for one latent dimension, with the
/// standard error of every entry.
struct MomentEstimate {
  Vector mean;          // K
  Vector mean_se;       // K
  Matrix cov;           // K x K
  Matrix cov_se;        // K x K
};

/// n chain draws arranged per latent dimension: draws[d](s, k).
std::vector<Matrix> draw_chains(const RcgParams& params, std::size_t n, Rng& rng);

/// Sample moments of per-dimension draws as produced by draw_chains.
std::vector<MomentEstimate> moments_from_draws(const std::vector<Matrix>& draws);

/// Moments of the chain per latent dimension from n draws.
std::vector<MomentEstimate> sample_moments(const RcgParams& params, std::size_t n, Rng& rng);

/// E_q[log q(c) - log p(c)] with q the product of the fused diagonal
/// posteriors and p the chain density, from n draws of q.
Estimate mc_kl_content(std::span<const DiagGaussian> fused, const RcgParams& params,
                       std::size_t n, Rng& rng);

/// E_q[log q(u) - log N(u; 0, I)] from n draws.
Estimate mc_kl_style(const DiagGaussian& q, std::size_t n, Rng& rng);

/// log density of a diagonal Gaussian at x.
double diag_log_density(const DiagGaussian& q, std::span<const double> x);

}  // namespace rcg
