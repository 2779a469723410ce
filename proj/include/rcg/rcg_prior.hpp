#pragma once

// Recursively conditional Gaussian (RCG) ordinal prior.
//
// Per latent dimension d the K class anchors form a Markov chain
//   c_1 ~ N(mu1, 1),   c_k | c_{k-1} ~ N(c_{k-1} + delta_k, sigma_k^2),
// with delta_k = exp(delta_raw) and sigma_k = (delta_k / m) * sigmoid(sigma_raw),
// so delta_k >= m * sigma_k for every raw value. The chain is a joint
// Gaussian with mean a_k = mu1 + delta_2 + ... + delta_k and covariance
// C_ij = sigma_1^2 + ... + sigma_min(i,j)^2, whose Cholesky factor is
// L_ij = sigma_j for j <= i.
//
// Class indices are 0-based throughout: class 0 is the chain root and
// per-class arrays of length K-1 are indexed by k-1 for k = 1..K-1.

#include <cstddef>
#include <vector>

#include "rcg/tensor.hpp"

namespace rcg {

double sigmoid(double x);
/// Inverse of sigmoid on (0, 1); saturates to +-kRawSaturation at the ends.
double logit(double p);

/// Raw value whose sigmoid rounds to exactly 1.0 (or 0.0 when negated).
inline constexpr double kRawSaturation = 40.0;

class RcgParams {
public:
  RcgParams() = default;
  /// All raw values zero: delta_k = 1, sigma_k = 1/(2m), mu1 = 0.
  RcgParams(std::size_t num_classes, std::size_t content_dim, double sigma_rule);

  /// Builds raw parameters that reproduce the given constrained values.
  /// Each sigma_k must lie in [0, delta_k / m]; the end points map to the
  /// saturated raw values.
  static RcgParams from_constrained(std::size_t num_classes, std::size_t content_dim,
                                    double sigma_rule, const std::vector<double>& mu1,
                                    const std::vector<std::vector<double>>& delta,
                                    const std::vector<std::vector<double>>& sigma);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t content_dim() const { return content_dim_; }
  double sigma_rule() const { return sigma_rule_; }

  double mu1(std::size_t d) const { return mu1_[d]; }
  /// delta_k for k in 1..K-1 (0-based class index); the gap above class k-1.
  double delta(std::size_t d, std::size_t k) const;
  /// sigma_k; sigma_0 == 1.
  double sigma(std::size_t d, std::size_t k) const;

  // Unconstrained storage, laid out [d][k-1].
  std::vector<double>& mu1_values() { return mu1_; }
  const std::vector<double>& mu1_values() const { return mu1_; }
  std::vector<double>& delta_raw() { return delta_raw_; }
  const std::vector<double>& delta_raw() const { return delta_raw_; }
  std::vector<double>& sigma_raw() { return sigma_raw_; }
  const std::vector<double>& sigma_raw() const { return sigma_raw_; }
  double& delta_raw(std::size_t d, std::size_t k) { return delta_raw_[index(d, k)]; }
  double& sigma_raw(std::size_t d, std::size_t k) { return sigma_raw_[index(d, k)]; }
  double delta_raw(std::size_t d, std::size_t k) const { return delta_raw_[index(d, k)]; }
  double sigma_raw(std::size_t d, std::size_t k) const { return sigma_raw_[index(d, k)]; }

  /// Number of free parameters: D * (1 + 2 (K-1)).
  std::size_t parameter_count() const {
    return mu1_.size() + delta_raw_.size() + sigma_raw_.size();
  }

private:
  std::size_t index(std::size_t d, std::size_t k) const { return d * (num_classes_ - 1) + k - 1; }

  std::size_t num_classes_ = 0;
  std::size_t content_dim_ = 0;
  double sigma_rule_ = 3.0;
  std::vector<double> mu1_;
  std::vector<double> delta_raw_;
  std::vector<double> sigma_raw_;
};

/// Gradient of a scalar w.r.t. every raw RCG parameter, same layout as RcgParams.
struct RcgGradient {
  std::vector<double> mu1;
  std::vector<double> delta_raw;
  std::vector<double> sigma_raw;

  explicit RcgGradient(const RcgParams& p)
      : mu1(p.mu1_values().size()),
        delta_raw(p.delta_raw().size()),
        sigma_raw(p.sigma_raw().size()) {}
  void scale(double s);
  void add(const RcgGradient& other, double weight = 1.0);
};

/// Joint moments of the chain, one K-variate Gaussian per latent dimension.
struct JointGaussianChain {
  std::vector<Vector> mean;       // a[d], length K, strictly increasing
  std::vector<SpdMatrix> cov;     // C[d], K x K, factor preset to the structured L[d]

  std::size_t num_classes() const { return mean.empty() ? 0 : mean.front().size(); }
  std::size_t content_dim() const { return mean.size(); }
  const Matrix& chol(std::size_t d) const { return cov[d].chol(); }
};

/// Joint mean, covariance and structured Cholesky factor per dimension.
/// Requires every sigma_k > 0 so the covariance is positive definite.
JointGaussianChain build_joint(const RcgParams& params);

/// One draw of all K anchors, row k = anchor of class k (K x D).
Matrix sample_chain(const RcgParams& params, Rng& rng);

/// sum_d log N(c[:,d]; a_d, C_d) via triangular solves against L_d.
double log_density(const JointGaussianChain& joint, const Matrix& anchors);

/// Same density evaluated factor by factor along the chain.
double chain_log_density(const RcgParams& params, const Matrix& anchors);

/// Fraction of n chain samples with c_k <= c_{k-1}, as a (K-1) x D matrix.
/// Sampling is split across `workers` streams seeded base+w where base is
/// drawn from `rng`; results depend on the worker count.
Matrix poset_violation_rate(const RcgParams& params, std::size_t n, Rng& rng,
                            std::size_t workers = 1);

/// True iff every triple i<j<k satisfies |c_i-c_k| > max(|c_i-c_j|, |c_j-c_k|)
/// in Euclidean norm. Requires K >= 3.
bool triplet_check(const Matrix& anchors);

/// True iff every column of `anchors` is strictly increasing down the rows.
bool is_poset_aligned(const Matrix& anchors);

}  // namespace rcg
