#pragma once

// Diagonal-Gaussian posteriors, product-of-experts fusion, and the KL terms
// of the evidence lower bound, with reverse-mode gradients.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rcg/rcg_prior.hpp"
#include "rcg/tensor.hpp"

namespace rcg {

inline constexpr double kLogvarMin = -20.0;
inline constexpr double kLogvarMax = 20.0;

class DiagGaussian {
public:
  DiagGaussian() = default;
  /// Clamps logvar into [kLogvarMin, kLogvarMax].
  DiagGaussian(Vector mean, Vector logvar);

  const Vector& mean() const { return mean_; }
  const Vector& logvar() const { return logvar_; }
  double variance(std::size_t i) const;
  std::size_t dim() const { return mean_.size(); }

private:
  Vector mean_;
  Vector logvar_;
};

/// Gradient w.r.t. a DiagGaussian's (mean, logvar).
struct GaussianGrad {
  Vector mean;
  Vector logvar;

  GaussianGrad() = default;
  explicit GaussianGrad(std::size_t dim) : mean(dim), logvar(dim) {}
  void add(const GaussianGrad& other, double weight = 1.0);
};

/// Precision-weighted product of the members: v = (sum 1/v_n)^-1,
/// mean = v * sum(mu_n / v_n), per dimension. Throws on an empty list.
DiagGaussian poe_fuse(std::span<const DiagGaussian> members);

/// Pulls a gradient on the fused (mean, logvar) back to every member.
/// Entries where the fused logvar was clamped receive no logvar gradient.
std::vector<GaussianGrad> poe_fuse_backward(std::span<const DiagGaussian> members,
                                            const DiagGaussian& fused,
                                            const GaussianGrad& upstream);

/// mean + exp(logvar / 2) * eps.
Vector reparameterize(const DiagGaussian& q, const Vector& eps);
Vector reparam_sample(const DiagGaussian& q, Rng& rng);
/// Gradient of the sample w.r.t. (mean, logvar) contracted with `upstream`.
GaussianGrad reparameterize_backward(const DiagGaussian& q, const Vector& eps,
                                     const Vector& upstream);

/// KL(q || N(0, I)) = 1/2 sum(mu^2 + v - 1 - log v).
double kl_style(const DiagGaussian& q);
GaussianGrad kl_style_grad(const DiagGaussian& q);

/// Per-class fused content posteriors q(c_k | G_k) with their members.
struct GroupPosterior {
  std::vector<std::vector<DiagGaussian>> members;  // index = class
  std::vector<std::optional<DiagGaussian>> fused;  // nullopt for an empty class

  /// Fuses each non-empty member list.
  static GroupPosterior build(std::vector<std::vector<DiagGaussian>> members);
  std::size_t num_classes() const { return fused.size(); }
  std::vector<std::size_t> missing_classes() const;
  /// Fused posteriors in class order; throws if any class is empty.
  std::vector<DiagGaussian> complete() const;
};

/// Closed-form KL( prod_k q(c_k|G_k) || RCG joint ), summed over dimensions:
/// 1/2 [ tr(C^-1 S) + (a-m)^T C^-1 (a-m) - K + log|C| - log|S| ] per d.
double kl_content(const GroupPosterior& group, const JointGaussianChain& joint);
double kl_content(std::span<const DiagGaussian> fused, const JointGaussianChain& joint);

struct ContentKlGrad {
  double value = 0.0;
  std::vector<GaussianGrad> fused;  // per class
  RcgGradient prior;
};

/// Value plus gradients w.r.t. the fused posteriors and every raw prior
/// parameter. Cost is O(D K^3).
ContentKlGrad kl_content_grad(std::span<const DiagGaussian> fused, const RcgParams& params);

/// recon_s + recon_t - kl_u_s - kl_u_t - kl_c
double elbo_terms(double recon_s, double recon_t, double kl_u_s, double kl_u_t, double kl_c);

}  // namespace rcg
