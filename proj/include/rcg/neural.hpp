#pragma once

// Fully connected networks with hand-written reverse mode, the losses used
// by the adaptation pipeline, an Adam optimizer and a finite-difference
// gradient checker.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rcg/tensor.hpp"
#include "rcg/variational.hpp"

namespace rcg {

enum class Activation { linear, tanh, relu, sigmoid };

const char* activation_name(Activation a);

/// A named, mutable view of a parameter (or gradient) array.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::linear;
};

/// Per-layer gradient storage shaped like an Mlp.
struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void zero();
  void scale(double s);
  void add(const MlpGrads& other, double weight = 1.0);
  double max_abs() const;
  std::vector<ParamBlock> blocks(const std::string& prefix);
};

/// Activations recorded by a forward pass; consumed by backward.
struct MlpCache {
  std::vector<Vector> inputs;   // input to each layer
  std::vector<Vector> outputs;  // post-activation output of each layer
  bool empty() const { return inputs.empty(); }
};

class Mlp {
public:
  Mlp() = default;
  /// dims = {in, h1, ..., out}; one activation per layer. Weights are drawn
  /// from U(-r, r) with r = sqrt(6 / (fan_in + fan_out)); biases start at 0.
  Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations, Rng& rng);
  explicit Mlp(std::vector<Layer> layers);

  std::size_t in_dim() const { return layers_.front().weight.cols(); }
  std::size_t out_dim() const { return layers_.back().weight.rows(); }
  std::size_t parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Vector forward(const Vector& x, MlpCache* cache = nullptr) const;

  /// Accumulates d(loss)/d(params) into `grads` (if non-null) and returns
  /// d(loss)/d(input), given d(loss)/d(output) = upstream.
  Vector backward(const MlpCache& cache, const Vector& upstream, MlpGrads* grads) const;

  MlpGrads zero_grads() const;
  std::vector<ParamBlock> blocks(const std::string& prefix);

private:
  std::vector<Layer> layers_;
};

/// Body network followed by two affine heads producing a DiagGaussian.
class GaussianHead {
public:
  struct Cache {
    MlpCache body, mean, logvar;
    Vector raw_logvar;
  };
  struct Grads {
    MlpGrads body, mean, logvar;
    void zero();
    void scale(double s);
    void add(const Grads& other, double weight = 1.0);
    double max_abs() const;
    std::vector<ParamBlock> blocks(const std::string& prefix);
  };

  GaussianHead() = default;
  /// Body: in -> hidden... (tanh), heads: last hidden -> latent (linear).
  GaussianHead(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t latent_dim,
               Rng& rng);

  DiagGaussian forward(const Vector& x, Cache* cache = nullptr) const;
  /// Logvar entries that were clamped pass no gradient.
  Vector backward(const Cache& cache, const GaussianGrad& upstream, Grads* grads) const;

  Grads zero_grads() const;
  std::vector<ParamBlock> blocks(const std::string& prefix);
  std::size_t latent_dim() const { return mean_head_.out_dim(); }
  std::size_t in_dim() const { return body_.in_dim(); }

private:
  Mlp body_;
  Mlp mean_head_;
  Mlp logvar_head_;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// -log softmax(logits)[label]; gradient softmax - onehot. Labels are 0-based.
LossGrad cross_entropy(const Vector& logits, int label);
Vector softmax(const Vector& logits);

/// sum_i |target_i - recon_i|, the negative Laplace log-likelihood up to a
/// constant; gradient w.r.t. recon is the sign (0 at ties).
LossGrad l1_loss(const Vector& target, const Vector& recon);

struct AdversarialResult {
  double generator_loss = 0.0;      // -log Dis(fake)
  double discriminator_loss = 0.0;  // -[log Dis(real) + log(1 - Dis(fake))]
  MlpGrads discriminator_grads;     // of discriminator_loss w.r.t. Dis parameters
  Vector fake_grad;                 // of generator_loss w.r.t. the fake input
};

/// Standard non-saturating GAN objectives for a discriminator whose single
/// output is a sigmoid probability. Probabilities are clipped to
/// [1e-12, 1 - 1e-12] inside the logs.
AdversarialResult adversarial_losses(const Mlp& dis, const Vector& real, const Vector& fake);

struct AdamOptions {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and bound to the block layout seen then.
class Adam {
public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Throws NonFiniteError naming the first parameter whose gradient is not
  /// finite; parameters are left untouched in that case.
  void step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads);

  std::size_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  void set_step_size(double s) { options_.step_size = s; }

private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradcheckFloor = 1e-6;

/// Compares `analytic` against central differences of `objective` with step
/// h, perturbing `params` in place (restored afterwards).
GradcheckResult gradcheck(std::span<double> params, std::span<const double> analytic,
                          const std::function<double()>& objective, double h = 1e-5);

}  // namespace rcg
