#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "rcg/error.hpp"
#include "rcg/synth.hpp"
#include "rcg/uda_trainer.hpp"

using rcg::NetworkId;
using rcg::TermSwitches;
using rcg::TrainConfig;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.content_dim = 2;
  cfg.style_dim = 2;
  cfg.encoder_hidden = 6;
  cfg.classifier_hidden = 5;
  cfg.discriminator_hidden = 6;
  return cfg;
}

rcg::SynthSpec small_spec() {
  rcg::SynthSpec spec;
  spec.num_classes = 3;
  spec.obs_dim = 6;
  spec.content_dim = 2;
  spec.style_dim = 2;
  spec.source_per_class = 6;
  spec.target_per_class = 6;
  spec.test_per_class = 4;
  return spec;
}

// Two source and two target members per class, target members taken in
// class order as if pseudo-labeled correctly.
rcg::GroupBatch small_batch(const rcg::SynthDataset& data, std::size_t k) {
  rcg::GroupBatch batch;
  batch.source.resize(k);
  batch.target.resize(k);
  for (std::size_t i = 0; i < data.source.size(); ++i) {
    auto& g = batch.source[static_cast<std::size_t>(data.source.y[i])];
    if (g.size() < 2) g.push_back(data.source.x[i]);
  }
  for (std::size_t i = 0; i < data.target_test.size(); ++i) {
    auto& g = batch.target[static_cast<std::size_t>(data.target_test.y[i])];
    if (g.size() < 2) g.push_back(data.target_test.x[i]);
  }
  return batch;
}

struct Fixture {
  rcg::SynthDataset data = rcg::generate(small_spec());
  TrainConfig cfg = tiny_config();
  rcg::Rng rng{5};
  rcg::Model model = rcg::Model::create(6, 3, cfg, rng);
  rcg::GroupBatch batch = small_batch(data, 3);
  rcg::StepNoise noise = rcg::StepNoise::draw(batch, 2, 2, rng);

  std::set<NetworkId> touched(TermSwitches sw) {
    auto r = rcg::compute_step(batch, model, cfg, noise, sw);
    std::set<NetworkId> out;
    for (NetworkId id : rcg::kAllNetworks)
      if (r.grads.max_abs(id) > 0.0) out.insert(id);
    return out;
  }
};

TermSwitches only(bool TermSwitches::*member) {
  TermSwitches sw{false, false, false, false, false};
  sw.*member = true;
  return sw;
}

}  // namespace

TEST(Routing, EachTermReachesOnlyItsNetworks) {
  Fixture f;
  using enum NetworkId;
  EXPECT_EQ(f.touched(only(&TermSwitches::ce)), (std::set<NetworkId>{enc_c, cls}));
  EXPECT_EQ(f.touched(only(&TermSwitches::kl_content)), (std::set<NetworkId>{enc_c, prior}));
  EXPECT_EQ(f.touched(only(&TermSwitches::kl_style)), (std::set<NetworkId>{enc_u_s, enc_u_t}));
  EXPECT_EQ(f.touched(only(&TermSwitches::l1)),
            (std::set<NetworkId>{enc_c, enc_u_s, enc_u_t, dec_s, dec_t}));
  EXPECT_EQ(f.touched(only(&TermSwitches::adversarial)),
            (std::set<NetworkId>{enc_c, enc_u_s, enc_u_t, dec_s, dec_t, dis_s, dis_t}));
}

TEST(Routing, ZeroWeightsCutContentEncoderFromDecoderPath) {
  Fixture f;
  f.cfg.alpha = f.cfg.beta = f.cfg.gamma = 0.0;
  auto full = rcg::compute_step(f.batch, f.model, f.cfg, f.noise);
  auto ce = rcg::compute_step(f.batch, f.model, f.cfg, f.noise, only(&TermSwitches::ce));
  const auto a = full.grads.blocks(NetworkId::enc_c);
  const auto b = ce.grads.blocks(NetworkId::enc_c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].values.size(); ++j)
      ASSERT_EQ(a[i].values[j], b[i].values[j]) << a[i].name;
  EXPECT_EQ(full.grads.max_abs(NetworkId::prior), 0.0);
  EXPECT_GT(full.grads.max_abs(NetworkId::dec_s), 0.0);
}

TEST(Routing, FrozenOrIidPriorGetsNoUpdate) {
  Fixture f;
  f.cfg.learn_prior = false;
  auto r = rcg::compute_step(f.batch, f.model, f.cfg, f.noise);
  EXPECT_EQ(rcg::network_objective(NetworkId::prior, r.losses, f.cfg), 0.0);
  EXPECT_EQ(r.grads.max_abs(NetworkId::prior), 0.0);
}

TEST(Routing, ObjectivesFollowTheUpdateLines) {
  rcg::LossTerms l;
  l.ce = 1;
  l.kl_content = 2;
  l.kl_style_s = 3;
  l.kl_style_t = 4;
  l.l1_s = 5;
  l.l1_t = 6;
  l.adv_s = 7;
  l.adv_t = 8;
  l.dis_s = 9;
  l.dis_t = 10;
  TrainConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 0.2;
  cfg.gamma = 0.3;
  cfg.lambda = 0.4;
  cfg.theta = 0.5;
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::enc_c, l, cfg),
                   1 + 0.1 * 2 + 0.2 * 11 + 0.3 * 15);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::enc_u_s, l, cfg), 5 + 0.4 * 3 + 0.5 * 7);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::enc_u_t, l, cfg), 6 + 0.4 * 4 + 0.5 * 8);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::dec_s, l, cfg), 5 + 0.5 * 7);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::dec_t, l, cfg), 6 + 0.5 * 8);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::cls, l, cfg), 1);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::dis_s, l, cfg), 9);
  EXPECT_DOUBLE_EQ(rcg::network_objective(NetworkId::prior, l, cfg), 0.1 * 2);
}

TEST(Step, IncompleteBatchThrows) {
  Fixture f;
  f.batch.source[1].clear();
  EXPECT_THROW(rcg::compute_step(f.batch, f.model, f.cfg, f.noise), rcg::Error);
}

TEST(Step, NegativeElboDecreasesOnFixedBatch) {
  Fixture f;
  f.cfg.ce_weight = 0.0;
  f.cfg.adversarial_enabled = false;
  f.cfg.alpha = f.cfg.beta = f.cfg.lambda = 1.0;
  f.cfg.learning_rate = 1e-3;
  rcg::Trainer trainer(f.model, f.cfg);
  std::vector<double> elbo;
  for (int step = 0; step <= 100; ++step) {
    rcg::Rng noise_rng(77);  // same reparameterization noise every step
    elbo.push_back(trainer.train_step(f.batch, noise_rng).elbo_per_sample());
  }
  int violations = 0;
  for (std::size_t i = 1; i < elbo.size(); ++i) violations += elbo[i] < elbo[i - 1];
  EXPECT_LE(violations, 5);
  EXPECT_GT(elbo.back(), elbo.front());
}

TEST(Step, ElboAssemblesTermsPerSample) {
  rcg::LossTerms l;
  l.l1_s = 1;
  l.l1_t = 1;
  l.kl_style_s = 0.5;
  l.kl_style_t = 0.5;
  l.kl_content = 1;
  EXPECT_DOUBLE_EQ(l.elbo_per_sample(), -4.0);
}

TEST(PseudoLabel, FullPortionLabelsEveryArgmax) {
  const std::vector<rcg::Vector> p{{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}, {0.2, 0.5, 0.3}};
  const auto set = rcg::pseudo_label(p, 1.0);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set[0]->label, 0);
  EXPECT_EQ(set[1]->label, 2);
  EXPECT_EQ(set[2]->label, 1);
  EXPECT_DOUBLE_EQ(set[1]->confidence, 0.6);
}

TEST(PseudoLabel, HalfKeepsMostConfident) {
  const std::vector<rcg::Vector> p{
      {0.05, 0.9, 0.05}, {0.1, 0.8, 0.1}, {0.2, 0.6, 0.2}, {0.25, 0.5, 0.25}};
  const auto set = rcg::pseudo_label(p, 0.5);
  EXPECT_TRUE(set[0].has_value());
  EXPECT_TRUE(set[1].has_value());
  EXPECT_FALSE(set[2].has_value());
  EXPECT_FALSE(set[3].has_value());
}

TEST(PseudoLabel, TiesGoToLowerIndex) {
  const std::vector<rcg::Vector> p{{0.3, 0.7}, {0.9, 0.1}, {0.3, 0.7}, {0.35, 0.65}};
  const auto set = rcg::pseudo_label(p, 0.34);  // ceil(0.34 * 3) = 2 of class 1
  EXPECT_TRUE(set[0].has_value());
  EXPECT_TRUE(set[2].has_value());
  EXPECT_FALSE(set[3].has_value());
  const auto one = rcg::pseudo_label(p, 0.3);  // ceil(0.9) = 1 of class 1
  EXPECT_TRUE(one[0].has_value());
  EXPECT_FALSE(one[2].has_value());
}

TEST(PseudoLabel, RejectsBadInput) {
  EXPECT_THROW(rcg::pseudo_label({}, 0.5), rcg::Error);
  EXPECT_THROW(rcg::pseudo_label({rcg::Vector{0.5, 0.5}}, 0.0), rcg::Error);
}

TEST(Predict, ConsumesNoRandomnessAndIsDeterministic) {
  Fixture f;
  const auto& x = f.data.target_test.x.front();
  const auto a = rcg::predict(f.model.enc_c, f.model.cls, x);
  const auto b = rcg::predict(f.model.enc_c, f.model.cls, x);
  EXPECT_EQ(a.label, b.label);
  EXPECT_EQ(a.probabilities, b.probabilities);
  double s = 0.0;
  for (double v : a.probabilities) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Config, PortionScheduleAndValidation) {
  TrainConfig cfg;
  cfg.portions = {0.2, 0.35, 0.5};
  EXPECT_DOUBLE_EQ(cfg.portion_for_round(0), 0.2);
  EXPECT_DOUBLE_EQ(cfg.portion_for_round(5), 0.5);
  cfg.portions = {0.5, 0.2};
  EXPECT_THROW(cfg.validate(), rcg::Error);
  cfg = TrainConfig{};
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), rcg::Error);
}

TEST(Loop, SourceOnlyCeReachesFullSourceAccuracy) {
  const auto data = rcg::generate(rcg::SynthSpec{});
  TrainConfig cfg;
  cfg.alpha = cfg.beta = cfg.gamma = 0.0;
  cfg.adversarial_enabled = false;
  cfg.rounds = 0;
  cfg.source_epochs = 20;
  const auto result = rcg::self_training_loop(data, cfg);
  EXPECT_TRUE(result.rounds.empty());
  EXPECT_EQ(rcg::evaluate(result.model, data.source).accuracy, 1.0);
}

TEST(Loop, ZeroShiftTargetAccuracyAboveNinetyFive) {
  rcg::SynthSpec spec;
  spec.domain_shift_scale = 0.0;
  const auto data = rcg::generate(spec);
  TrainConfig cfg;
  cfg.rounds = 0;
  cfg.source_epochs = 20;
  const auto result = rcg::self_training_loop(data, cfg);
  EXPECT_GT(result.final_target.accuracy, 0.95);
}

TEST(Loop, PseudoLabelCountsGrowWithPortion) {
  const auto data = rcg::generate(rcg::SynthSpec{});
  TrainConfig cfg;
  cfg.source_epochs = 3;
  cfg.epochs_per_round = 2;
  cfg.rounds = 3;
  cfg.portions = {0.2, 0.35, 0.5};
  const auto result = rcg::self_training_loop(data, cfg);
  ASSERT_EQ(result.rounds.size(), 3u);
  std::size_t prev = 0;
  for (const auto& r : result.rounds) {
    std::size_t total = 0;
    for (std::size_t c : r.pseudo_counts) total += c;
    EXPECT_GE(total, prev);
    prev = total;
  }
  EXPECT_EQ(result.epochs.size(), 3u + 3u * 2u);
}

TEST(Loop, BitReproducible) {
  const auto data = rcg::generate(rcg::SynthSpec{});
  TrainConfig cfg;
  cfg.source_epochs = 2;
  cfg.epochs_per_round = 2;
  cfg.rounds = 2;
  const auto a = rcg::self_training_loop(data, cfg);
  const auto b = rcg::self_training_loop(data, cfg);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_EQ(a.epochs[i].mean_losses.l1_s, b.epochs[i].mean_losses.l1_s);
    EXPECT_EQ(a.epochs[i].mean_losses.kl_content, b.epochs[i].mean_losses.kl_content);
    EXPECT_EQ(a.epochs[i].target.qwk, b.epochs[i].target.qwk);
  }
}
