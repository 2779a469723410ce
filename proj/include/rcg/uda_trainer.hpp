#pragma once

// Disentangled self-training domain adaptation with an ordinal content prior.
//
// Networks: a content encoder shared by both domains, one style encoder and
// one decoder per domain, a classifier on content codes and one
// discriminator per domain. Each optimization step draws a class-complete
// group batch, fuses per-class content posteriors by product of experts,
// decodes every sample from its class code plus its own style code, and
// routes each loss only to the networks listed for it:
//
//   content encoder  <- CE + alpha KL_c + beta (L1_s + L1_t) + gamma (adv_s + adv_t)
//   style encoder s  <- L1_s + lambda KL_s + theta adv_s        (t likewise)
//   decoder s        <- L1_s + theta adv_s                      (t likewise)
//   classifier       <- CE
//   discriminator s  <- discriminator loss on (x_s, recon_s)    (t likewise)
//   prior parameters <- alpha KL_c   (unless frozen)
//
// All loss terms are sums over the batch divided by the batch size, so with
// CE and adversarial terms off and beta = 1 the objective is -ELBO / N with
// the L1 error standing in for the negative log-likelihood.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcg/metrics.hpp"
#include "rcg/neural.hpp"
#include "rcg/rcg_prior.hpp"
#include "rcg/synth.hpp"
#include "rcg/variational.hpp"

namespace rcg {

enum class PriorKind { rcg, iid_gaussian };

const char* prior_kind_name(PriorKind k);
PriorKind parse_prior_kind(const std::string& s);

struct TrainConfig {
  double alpha = 1.0;
  double lambda = 1.0;
  double theta = 1.0;
  double beta = 0.5;
  double gamma = 0.5;
  /// Weight of the classification loss for the content encoder and classifier.
  double ce_weight = 1.0;
  double sigma_rule = 3.0;
  PriorKind prior_kind = PriorKind::rcg;
  bool adversarial_enabled = true;
  bool learn_prior = true;

  std::size_t content_dim = 4;
  std::size_t style_dim = 4;
  std::size_t encoder_hidden = 64;
  std::size_t classifier_hidden = 32;
  std::size_t discriminator_hidden = 64;

  std::size_t source_epochs = 5;
  std::size_t rounds = 3;
  std::size_t epochs_per_round = 15;
  /// Samples drawn per class and domain for one group batch.
  std::size_t group_source = 4;
  std::size_t group_target = 4;
  /// Selection portion per round; the last entry repeats if rounds exceed it.
  std::vector<double> portions{0.2, 0.35, 0.5};
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
  double portion_for_round(std::size_t round) const;
};

struct Model {
  GaussianHead enc_c;
  GaussianHead enc_u_s;
  GaussianHead enc_u_t;
  Mlp dec_s;
  Mlp dec_t;
  Mlp cls;
  Mlp dis_s;
  Mlp dis_t;
  RcgParams prior;

  /// Architecture from the config, weights from `rng`.
  static Model create(std::size_t obs_dim, std::size_t num_classes, const TrainConfig& cfg,
                      Rng& rng);
  std::size_t num_classes() const { return cls.out_dim(); }
  std::size_t obs_dim() const { return enc_c.in_dim(); }

  /// Every trainable array, including the prior's raw parameters.
  std::vector<ParamBlock> blocks();
};

enum class NetworkId { enc_c, enc_u_s, enc_u_t, dec_s, dec_t, cls, dis_s, dis_t, prior };
inline constexpr NetworkId kAllNetworks[] = {
    NetworkId::enc_c, NetworkId::enc_u_s, NetworkId::enc_u_t, NetworkId::dec_s, NetworkId::dec_t,
    NetworkId::cls,   NetworkId::dis_s,   NetworkId::dis_t,   NetworkId::prior};
const char* network_name(NetworkId id);

struct ModelGrads {
  GaussianHead::Grads enc_c, enc_u_s, enc_u_t;
  MlpGrads dec_s, dec_t, cls, dis_s, dis_t;
  RcgGradient prior;

  explicit ModelGrads(const Model& m);
  std::vector<ParamBlock> blocks();
  /// Gradient arrays of one network, aligned with network_blocks(model, id).
  std::vector<ParamBlock> blocks(NetworkId id);
  double max_abs(NetworkId id) const;
};

/// Parameter arrays of one network, aligned with ModelGrads::blocks(id).
std::vector<ParamBlock> network_blocks(Model& model, NetworkId id);

/// Class-complete group G_k per class: source members carry label k,
/// target members pseudo-label k.
struct GroupBatch {
  std::vector<std::vector<Vector>> source;  // [class][member]
  std::vector<std::vector<Vector>> target;  // [class][member], may be empty per class

  std::size_t num_classes() const { return source.size(); }
  std::size_t size() const;
  /// Throws unless every class has at least one source member.
  void validate(std::size_t num_classes) const;
};

/// Reparameterization noise for one step, fixed so the step is a
/// deterministic function of the parameters.
struct StepNoise {
  std::vector<Vector> content;  // per sample, batch order
  std::vector<Vector> style;    // per sample, batch order
  std::vector<Vector> anchor;   // per class, for the fused class code

  static StepNoise draw(const GroupBatch& batch, std::size_t content_dim, std::size_t style_dim,
                        Rng& rng);
};

struct LossTerms {
  double ce = 0.0;
  double kl_content = 0.0;
  double kl_style_s = 0.0;
  double kl_style_t = 0.0;
  double l1_s = 0.0;
  double l1_t = 0.0;
  double adv_s = 0.0;  // generator side, -log Dis(recon)
  double adv_t = 0.0;
  double dis_s = 0.0;  // discriminator side
  double dis_t = 0.0;
  std::size_t batch_size = 0;

  /// ELBO per sample with -L1 as the reconstruction log-likelihood.
  double elbo_per_sample() const;
  /// Name of the first non-finite term, if any.
  std::optional<std::string> first_non_finite() const;
};

/// Individual loss terms can be switched off for routing tests.
struct TermSwitches {
  bool ce = true;
  bool kl_content = true;
  bool kl_style = true;
  bool l1 = true;
  bool adversarial = true;
};

struct StepResult {
  LossTerms losses;
  ModelGrads grads;
};

/// Forward and backward pass of one step without updating anything.
StepResult compute_step(const GroupBatch& batch, const Model& model, const TrainConfig& cfg,
                        const StepNoise& noise, TermSwitches terms = {});

/// The weighted objective a network descends on, given the loss values.
double network_objective(NetworkId id, const LossTerms& l, const TrainConfig& cfg);

/// Model plus one Adam state per network.
class Trainer {
public:
  Trainer(Model model, const TrainConfig& cfg);

  /// compute_step with fresh noise followed by one optimizer update of
  /// every network. Throws NonFiniteError naming the offending loss term.
  LossTerms train_step(const GroupBatch& batch, Rng& rng);

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

private:
  Model model_;
  TrainConfig cfg_;
  std::vector<Adam> optimizers_;  // indexed by NetworkId
};

struct Prediction {
  int label = 0;
  Vector probabilities;
};

/// Classifier applied to the content-posterior mean; consumes no randomness.
Prediction predict(const GaussianHead& enc_c, const Mlp& cls, const Vector& x);

struct PseudoLabel {
  int label = -1;
  double confidence = 0.0;
};
using PseudoLabelSet = std::vector<std::optional<PseudoLabel>>;

/// Class-balanced selection: within each predicted class, keep the
/// ceil(portion * n_k) most confident samples (ties broken by lower index).
PseudoLabelSet pseudo_label(const std::vector<Vector>& probabilities, double portion);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t round = 0;
  LossTerms mean_losses;
  OrdinalScores target;
};

struct RoundRecord {
  std::size_t round = 0;
  double portion = 0.0;
  std::vector<std::size_t> pseudo_counts;   // per class
  std::vector<std::size_t> fallback_classes;  // classes with no pseudo-labeled target
  OrdinalScores target;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> epochs;
  std::vector<RoundRecord> rounds;
  OrdinalScores final_target;
};

/// Source-only warm-up for cfg.source_epochs, then cfg.rounds rounds of
/// pseudo-labeling followed by cfg.epochs_per_round epochs over groups
/// drawn from source and pseudo-labeled target. rounds = 0 is the
/// source-only baseline. Metrics use data.target_test only.
TrainResult self_training_loop(const SynthDataset& data, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Scores of (enc_c, cls) on a labeled set.
OrdinalScores evaluate(const Model& model, const LabeledSet& set);

}  // namespace rcg
