#include "rcg/uda_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcg/simd/kernels.hpp"

namespace rcg {

const char* prior_kind_name(PriorKind k) {
  return k == PriorKind::rcg ? "rcg" : "iid_gaussian";
}

PriorKind parse_prior_kind(const std::string& s) {
  if (s == "rcg") return PriorKind::rcg;
  if (s == "iid_gaussian") return PriorKind::iid_gaussian;
  throw InvalidArgument("unknown prior kind '" + s + "' (expected rcg or iid_gaussian)");
}

void TrainConfig::validate() const {
  for (double w : {alpha, lambda, theta, beta, gamma, ce_weight})
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("TrainConfig: loss weights must be >= 0");
  if (!(sigma_rule > 0.0)) throw InvalidArgument("TrainConfig: sigma_rule must be positive");
  if (content_dim == 0 || style_dim == 0 || encoder_hidden == 0 || classifier_hidden == 0 ||
      discriminator_hidden == 0)
    throw InvalidArgument("TrainConfig: network sizes must be positive");
  if (group_source == 0) throw InvalidArgument("TrainConfig: group_source must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("TrainConfig: learning_rate must be positive");
  if (rounds > 0 && portions.empty())
    throw InvalidArgument("TrainConfig: portions must be non-empty when rounds > 0");
  for (std::size_t i = 0; i < portions.size(); ++i) {
    if (!(portions[i] > 0.0 && portions[i] <= 1.0))
      throw InvalidArgument("TrainConfig: portions must lie in (0, 1]");
    if (i > 0 && portions[i] < portions[i - 1])
      throw InvalidArgument("TrainConfig: portions must be non-decreasing");
  }
}

double TrainConfig::portion_for_round(std::size_t round) const {
  if (portions.empty()) throw InvalidArgument("TrainConfig: no portions configured");
  return portions[std::min(round, portions.size() - 1)];
}

Model Model::create(std::size_t obs_dim, std::size_t num_classes, const TrainConfig& cfg,
                    Rng& rng) {
  cfg.validate();
  const std::size_t H = cfg.encoder_hidden;
  const std::size_t D = cfg.content_dim;
  const std::size_t U = cfg.style_dim;
  using A = Activation;
  Model m;
  m.enc_c = GaussianHead(obs_dim, {H, H}, D, rng);
  m.enc_u_s = GaussianHead(obs_dim, {H, H}, U, rng);
  m.enc_u_t = GaussianHead(obs_dim, {H, H}, U, rng);
  m.dec_s = Mlp({D + U, H, H, obs_dim}, {A::tanh, A::tanh, A::linear}, rng);
  m.dec_t = Mlp({D + U, H, H, obs_dim}, {A::tanh, A::tanh, A::linear}, rng);
  m.cls = Mlp({D, cfg.classifier_hidden, num_classes}, {A::tanh, A::linear}, rng);
  const std::size_t Hd = cfg.discriminator_hidden;
  m.dis_s = Mlp({obs_dim, Hd, Hd, 1}, {A::tanh, A::tanh, A::sigmoid}, rng);
  m.dis_t = Mlp({obs_dim, Hd, Hd, 1}, {A::tanh, A::tanh, A::sigmoid}, rng);
  m.prior = RcgParams(num_classes, D, cfg.sigma_rule);
  return m;
}

const char* network_name(NetworkId id) {
  switch (id) {
    case NetworkId::enc_c:
      return "enc_c";
    case NetworkId::enc_u_s:
      return "enc_u_s";
    case NetworkId::enc_u_t:
      return "enc_u_t";
    case NetworkId::dec_s:
      return "dec_s";
    case NetworkId::dec_t:
      return "dec_t";
    case NetworkId::cls:
      return "cls";
    case NetworkId::dis_s:
      return "dis_s";
    case NetworkId::dis_t:
      return "dis_t";
    case NetworkId::prior:
      return "prior";
  }
  return "?";
}

std::vector<ParamBlock> network_blocks(Model& model, NetworkId id) {
  const std::string name = network_name(id);
  switch (id) {
    case NetworkId::enc_c:
      return model.enc_c.blocks(name);
    case NetworkId::enc_u_s:
      return model.enc_u_s.blocks(name);
    case NetworkId::enc_u_t:
      return model.enc_u_t.blocks(name);
    case NetworkId::dec_s:
      return model.dec_s.blocks(name);
    case NetworkId::dec_t:
      return model.dec_t.blocks(name);
    case NetworkId::cls:
      return model.cls.blocks(name);
    case NetworkId::dis_s:
      return model.dis_s.blocks(name);
    case NetworkId::dis_t:
      return model.dis_t.blocks(name);
    case NetworkId::prior:
      return {{"prior.mu1", model.prior.mu1_values()},
              {"prior.delta_raw", model.prior.delta_raw()},
              {"prior.sigma_raw", model.prior.sigma_raw()}};
  }
  return {};
}

std::vector<ParamBlock> Model::blocks() {
  std::vector<ParamBlock> out;
  for (NetworkId id : kAllNetworks)
    for (auto& b : network_blocks(*this, id)) out.push_back(b);
  return out;
}

ModelGrads::ModelGrads(const Model& m)
    : enc_c(m.enc_c.zero_grads()),
      enc_u_s(m.enc_u_s.zero_grads()),
      enc_u_t(m.enc_u_t.zero_grads()),
      dec_s(m.dec_s.zero_grads()),
      dec_t(m.dec_t.zero_grads()),
      cls(m.cls.zero_grads()),
      dis_s(m.dis_s.zero_grads()),
      dis_t(m.dis_t.zero_grads()),
      prior(m.prior) {}

std::vector<ParamBlock> ModelGrads::blocks(NetworkId id) {
  const std::string name = network_name(id);
  switch (id) {
    case NetworkId::enc_c:
      return enc_c.blocks(name);
    case NetworkId::enc_u_s:
      return enc_u_s.blocks(name);
    case NetworkId::enc_u_t:
      return enc_u_t.blocks(name);
    case NetworkId::dec_s:
      return dec_s.blocks(name);
    case NetworkId::dec_t:
      return dec_t.blocks(name);
    case NetworkId::cls:
      return cls.blocks(name);
    case NetworkId::dis_s:
      return dis_s.blocks(name);
    case NetworkId::dis_t:
      return dis_t.blocks(name);
    case NetworkId::prior:
      return {{"prior.mu1", prior.mu1},
              {"prior.delta_raw", prior.delta_raw},
              {"prior.sigma_raw", prior.sigma_raw}};
  }
  return {};
}

std::vector<ParamBlock> ModelGrads::blocks() {
  std::vector<ParamBlock> out;
  for (NetworkId id : kAllNetworks)
    for (auto& b : blocks(id)) out.push_back(b);
  return out;
}

double ModelGrads::max_abs(NetworkId id) const {
  double m = 0.0;
  for (const auto& b : const_cast<ModelGrads*>(this)->blocks(id))
    for (double v : b.values) m = std::max(m, std::abs(v));
  return m;
}

std::size_t GroupBatch::size() const {
  std::size_t n = 0;
  for (const auto& g : source) n += g.size();
  for (const auto& g : target) n += g.size();
  return n;
}

void GroupBatch::validate(std::size_t num_classes) const {
  if (source.size() != num_classes || (!target.empty() && target.size() != num_classes))
    throw InvalidArgument("GroupBatch: expected one group per class");
  for (std::size_t k = 0; k < num_classes; ++k)
    if (source[k].empty())
      throw InvalidArgument("GroupBatch: class " + std::to_string(k) +
                            " has no source member; batches must be class-complete");
}

namespace {

struct SampleRef {
  const Vector* x;
  std::size_t cls;
  bool target;
};

std::vector<SampleRef> flatten(const GroupBatch& batch) {
  std::vector<SampleRef> out;
  for (std::size_t k = 0; k < batch.num_classes(); ++k) {
    for (const auto& x : batch.source[k]) out.push_back({&x, k, false});
    if (!batch.target.empty())
      for (const auto& x : batch.target[k]) out.push_back({&x, k, true});
  }
  return out;
}

}  // namespace

StepNoise StepNoise::draw(const GroupBatch& batch, std::size_t content_dim, std::size_t style_dim,
                          Rng& rng) {
  StepNoise n;
  const std::size_t N = batch.size();
  for (std::size_t i = 0; i < N; ++i) {
    n.content.push_back(normal_draws(rng, content_dim));
    n.style.push_back(normal_draws(rng, style_dim));
  }
  for (std::size_t k = 0; k < batch.num_classes(); ++k)
    n.anchor.push_back(normal_draws(rng, content_dim));
  return n;
}

double LossTerms::elbo_per_sample() const {
  return elbo_terms(-l1_s, -l1_t, kl_style_s, kl_style_t, kl_content);
}

std::optional<std::string> LossTerms::first_non_finite() const {
  const std::pair<const char*, double> terms[] = {
      {"ce", ce},       {"kl_content", kl_content}, {"kl_style_s", kl_style_s},
      {"kl_style_t", kl_style_t}, {"l1_s", l1_s},   {"l1_t", l1_t},
      {"adv_s", adv_s}, {"adv_t", adv_t},           {"dis_s", dis_s},
      {"dis_t", dis_t}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) return std::string(name);
  return std::nullopt;
}

StepResult compute_step(const GroupBatch& batch, const Model& model, const TrainConfig& cfg,
                        const StepNoise& noise, TermSwitches terms) {
  const std::size_t K = model.num_classes();
  batch.validate(K);
  const std::size_t D = model.enc_c.latent_dim();
  const std::size_t U = model.enc_u_s.latent_dim();
  const std::vector<SampleRef> samples = flatten(batch);
  const std::size_t N = samples.size();
  if (noise.content.size() != N || noise.style.size() != N || noise.anchor.size() != K)
    throw InvalidArgument("compute_step: noise does not match the batch");
  const double inv_n = 1.0 / static_cast<double>(N);

  StepResult res{LossTerms{}, ModelGrads(model)};
  LossTerms& L = res.losses;
  ModelGrads& G = res.grads;
  L.batch_size = N;

  std::vector<GaussianHead::Cache> cache_c(N), cache_u(N);
  std::vector<DiagGaussian> qc(N), qu(N);
  std::vector<GaussianGrad> g_qc(N, GaussianGrad(D)), g_qu(N, GaussianGrad(U));
  std::vector<std::vector<DiagGaussian>> members(K);
  std::vector<std::vector<std::size_t>> member_index(K);

  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = samples[i];
    qc[i] = model.enc_c.forward(*s.x, &cache_c[i]);
    qu[i] = (s.target ? model.enc_u_t : model.enc_u_s).forward(*s.x, &cache_u[i]);
    members[s.cls].push_back(qc[i]);
    member_index[s.cls].push_back(i);
  }

  // Classification of per-sample content codes.
  if (terms.ce) {
    for (std::size_t i = 0; i < N; ++i) {
      const Vector c = reparameterize(qc[i], noise.content[i]);
      MlpCache cc;
      const Vector logits = model.cls.forward(c, &cc);
      LossGrad ce = cross_entropy(logits, static_cast<int>(samples[i].cls));
      L.ce += ce.loss * inv_n;
      for (double& v : ce.grad) v *= cfg.ce_weight * inv_n;
      const Vector g_c = model.cls.backward(cc, ce.grad, &G.cls);
      g_qc[i].add(reparameterize_backward(qc[i], noise.content[i], g_c));
    }
  }

  if (terms.kl_style) {
    for (std::size_t i = 0; i < N; ++i) {
      (samples[i].target ? L.kl_style_t : L.kl_style_s) += kl_style(qu[i]) * inv_n;
      g_qu[i].add(kl_style_grad(qu[i]), cfg.lambda * inv_n);
    }
  }

  std::vector<DiagGaussian> fused(K);
  for (std::size_t k = 0; k < K; ++k) fused[k] = poe_fuse(members[k]);
  std::vector<GaussianGrad> g_fused(K, GaussianGrad(D));

  if (terms.kl_content) {
    if (cfg.prior_kind == PriorKind::rcg) {
      const ContentKlGrad kl = kl_content_grad(fused, model.prior);
      L.kl_content = kl.value * inv_n;
      for (std::size_t k = 0; k < K; ++k) g_fused[k].add(kl.fused[k], cfg.alpha * inv_n);
      if (cfg.learn_prior) G.prior.add(kl.prior, cfg.alpha * inv_n);
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        L.kl_content += kl_style(fused[k]) * inv_n;
        g_fused[k].add(kl_style_grad(fused[k]), cfg.alpha * inv_n);
      }
    }
  }

  // Reconstruction of every sample from its class code and its own style.
  const bool use_adv = terms.adversarial && cfg.adversarial_enabled;
  if (terms.l1 || use_adv) {
    std::vector<Vector> anchor_code(K);
    for (std::size_t k = 0; k < K; ++k) anchor_code[k] = reparameterize(fused[k], noise.anchor[k]);
    std::vector<Vector> g_anchor(K, Vector(D));

    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = samples[i];
      const Mlp& dec = s.target ? model.dec_t : model.dec_s;
      const Mlp& dis = s.target ? model.dis_t : model.dis_s;
      MlpGrads& g_dec = s.target ? G.dec_t : G.dec_s;
      MlpGrads& g_dis = s.target ? G.dis_t : G.dis_s;

      const Vector u = reparameterize(qu[i], noise.style[i]);
      Vector z(D + U);
      std::copy(anchor_code[s.cls].begin(), anchor_code[s.cls].end(), z.begin());
      std::copy(u.begin(), u.end(), z.begin() + static_cast<std::ptrdiff_t>(D));
      MlpCache dc;
      const Vector recon = dec.forward(z, &dc);

      // Upstream for the decoder/style path and for the content path.
      Vector up_dec(recon.size()), up_content(recon.size());
      if (terms.l1) {
        const LossGrad l1 = l1_loss(*s.x, recon);
        (s.target ? L.l1_t : L.l1_s) += l1.loss * inv_n;
        simd::axpy(inv_n, l1.grad.span(), up_dec.span());
        simd::axpy(cfg.beta * inv_n, l1.grad.span(), up_content.span());
      }
      if (use_adv) {
        const AdversarialResult adv = adversarial_losses(dis, *s.x, recon);
        (s.target ? L.adv_t : L.adv_s) += adv.generator_loss * inv_n;
        (s.target ? L.dis_t : L.dis_s) += adv.discriminator_loss * inv_n;
        g_dis.add(adv.discriminator_grads, inv_n);
        simd::axpy(cfg.theta * inv_n, adv.fake_grad.span(), up_dec.span());
        simd::axpy(cfg.gamma * inv_n, adv.fake_grad.span(), up_content.span());
      }

      const Vector gz = dec.backward(dc, up_dec, &g_dec);
      Vector g_u(U);
      std::copy(gz.begin() + static_cast<std::ptrdiff_t>(D), gz.end(), g_u.begin());
      g_qu[i].add(reparameterize_backward(qu[i], noise.style[i], g_u));

      const Vector gz_content = dec.backward(dc, up_content, nullptr);
      for (std::size_t d = 0; d < D; ++d) g_anchor[s.cls][d] += gz_content[d];
    }
    for (std::size_t k = 0; k < K; ++k)
      g_fused[k].add(reparameterize_backward(fused[k], noise.anchor[k], g_anchor[k]));
  }

  for (std::size_t k = 0; k < K; ++k) {
    const auto back = poe_fuse_backward(members[k], fused[k], g_fused[k]);
    for (std::size_t j = 0; j < back.size(); ++j) g_qc[member_index[k][j]].add(back[j]);
  }

  for (std::size_t i = 0; i < N; ++i) {
    model.enc_c.backward(cache_c[i], g_qc[i], &G.enc_c);
    if (samples[i].target)
      model.enc_u_t.backward(cache_u[i], g_qu[i], &G.enc_u_t);
    else
      model.enc_u_s.backward(cache_u[i], g_qu[i], &G.enc_u_s);
  }
  return res;
}

double network_objective(NetworkId id, const LossTerms& l, const TrainConfig& cfg) {
  switch (id) {
    case NetworkId::enc_c:
      return cfg.ce_weight * l.ce + cfg.alpha * l.kl_content + cfg.beta * (l.l1_s + l.l1_t) +
             cfg.gamma * (l.adv_s + l.adv_t);
    case NetworkId::enc_u_s:
      return l.l1_s + cfg.lambda * l.kl_style_s + cfg.theta * l.adv_s;
    case NetworkId::enc_u_t:
      return l.l1_t + cfg.lambda * l.kl_style_t + cfg.theta * l.adv_t;
    case NetworkId::dec_s:
      return l.l1_s + cfg.theta * l.adv_s;
    case NetworkId::dec_t:
      return l.l1_t + cfg.theta * l.adv_t;
    case NetworkId::cls:
      return cfg.ce_weight * l.ce;
    case NetworkId::dis_s:
      return l.dis_s;
    case NetworkId::dis_t:
      return l.dis_t;
    case NetworkId::prior:
      return (cfg.learn_prior && cfg.prior_kind == PriorKind::rcg) ? cfg.alpha * l.kl_content
                                                                   : 0.0;
  }
  return 0.0;
}

Trainer::Trainer(Model model, const TrainConfig& cfg)
    : model_(std::move(model)), cfg_(cfg) {
  cfg_.validate();
  AdamOptions opt;
  opt.step_size = cfg_.learning_rate;
  optimizers_.assign(std::size(kAllNetworks), Adam(opt));
}

LossTerms Trainer::train_step(const GroupBatch& batch, Rng& rng) {
  const StepNoise noise =
      StepNoise::draw(batch, model_.enc_c.latent_dim(), model_.enc_u_s.latent_dim(), rng);
  StepResult r = compute_step(batch, model_, cfg_, noise);
  if (auto bad = r.losses.first_non_finite())
    throw NonFiniteError("train_step: loss term " + *bad + " is not finite");
  for (NetworkId id : kAllNetworks) {
    if (id == NetworkId::prior && (!cfg_.learn_prior || cfg_.prior_kind != PriorKind::rcg))
      continue;
    auto params = network_blocks(model_, id);
    auto grads = r.grads.blocks(id);
    optimizers_[static_cast<std::size_t>(id)].step(params, grads);
  }
  return r.losses;
}

Prediction predict(const GaussianHead& enc_c, const Mlp& cls, const Vector& x) {
  const DiagGaussian q = enc_c.forward(x);
  Prediction p;
  p.probabilities = softmax(cls.forward(q.mean()));
  p.label = static_cast<int>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                             p.probabilities.begin());
  return p;
}

PseudoLabelSet pseudo_label(const std::vector<Vector>& probabilities, double portion) {
  if (probabilities.empty()) throw InvalidArgument("pseudo_label: empty target set");
  if (!(portion > 0.0 && portion <= 1.0))
    throw InvalidArgument("pseudo_label: portion must lie in (0, 1]");
  const std::size_t K = probabilities.front().size();
  std::vector<std::vector<std::size_t>> by_class(K);
  std::vector<PseudoLabel> best(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& p = probabilities[i];
    if (p.size() != K) throw InvalidArgument("pseudo_label: inconsistent class count");
    const auto it = std::max_element(p.begin(), p.end());
    best[i] = {static_cast<int>(it - p.begin()), *it};
    by_class[static_cast<std::size_t>(best[i].label)].push_back(i);
  }
  PseudoLabelSet out(probabilities.size());
  for (auto& idx : by_class) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return best[a].confidence > best[b].confidence;
    });
    // Guard against 0.35 * 20 rounding up to 8.
    const auto keep = static_cast<std::size_t>(
        std::ceil(portion * static_cast<double>(idx.size()) - 1e-9));
    for (std::size_t j = 0; j < std::min(keep, idx.size()); ++j) out[idx[j]] = best[idx[j]];
  }
  return out;
}

OrdinalScores evaluate(const Model& model, const LabeledSet& set) {
  ConfusionMatrix conf(model.num_classes());
  for (std::size_t i = 0; i < set.size(); ++i)
    conf.add(set.y[i], predict(model.enc_c, model.cls, set.x[i]).label);
  return score(conf);
}

namespace {

void accumulate(LossTerms& acc, const LossTerms& l) {
  acc.ce += l.ce;
  acc.kl_content += l.kl_content;
  acc.kl_style_s += l.kl_style_s;
  acc.kl_style_t += l.kl_style_t;
  acc.l1_s += l.l1_s;
  acc.l1_t += l.l1_t;
  acc.adv_s += l.adv_s;
  acc.adv_t += l.adv_t;
  acc.dis_s += l.dis_s;
  acc.dis_t += l.dis_t;
  acc.batch_size += l.batch_size;
}

LossTerms averaged(LossTerms acc, std::size_t steps) {
  const double s = 1.0 / static_cast<double>(steps);
  for (double* v : {&acc.ce, &acc.kl_content, &acc.kl_style_s, &acc.kl_style_t, &acc.l1_s,
                    &acc.l1_t, &acc.adv_s, &acc.adv_t, &acc.dis_s, &acc.dis_t})
    *v *= s;
  acc.batch_size /= steps;
  return acc;
}

}  // namespace

TrainResult self_training_loop(const SynthDataset& data, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.source.size() == 0 || data.target_train.empty())
    throw InvalidArgument("self_training_loop: need labeled source and unlabeled target data");
  const std::size_t obs_dim = data.source.x.front().size();
  const int max_label = *std::max_element(data.source.y.begin(), data.source.y.end());
  const std::size_t K = std::max<std::size_t>(
      static_cast<std::size_t>(max_label) + 1,
      data.target_test.y.empty()
          ? 0
          : static_cast<std::size_t>(
                *std::max_element(data.target_test.y.begin(), data.target_test.y.end())) + 1);

  Rng rng(cfg.seed);
  Trainer trainer(Model::create(obs_dim, K, cfg, rng), cfg);

  std::vector<std::vector<std::size_t>> source_by_class(K);
  for (std::size_t i = 0; i < data.source.size(); ++i)
    source_by_class[static_cast<std::size_t>(data.source.y[i])].push_back(i);
  for (std::size_t k = 0; k < K; ++k)
    if (source_by_class[k].empty())
      throw InvalidArgument("self_training_loop: class " + std::to_string(k) +
                            " has no labeled source samples");

  const std::size_t per_step = K * cfg.group_source;
  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, (data.source.size() + per_step - 1) / per_step);

  TrainResult result;
  std::size_t epoch = 0;
  std::vector<std::vector<std::size_t>> target_by_class(K);

  auto draw_batch = [&]() {
    GroupBatch b;
    b.source.resize(K);
    b.target.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < cfg.group_source; ++j)
        b.source[k].push_back(
            data.source.x[source_by_class[k][rng.below(source_by_class[k].size())]]);
      if (!target_by_class[k].empty())
        for (std::size_t j = 0; j < cfg.group_target; ++j)
          b.target[k].push_back(
              data.target_train[target_by_class[k][rng.below(target_by_class[k].size())]]);
    }
    return b;
  };

  auto run_epoch = [&](std::size_t round) {
    LossTerms acc;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) accumulate(acc, trainer.train_step(draw_batch(), rng));
    EpochRecord rec{epoch++, round, averaged(acc, steps_per_epoch),
                    evaluate(trainer.model(), data.target_test)};
    if (on_epoch) on_epoch(rec);
    result.epochs.push_back(rec);
  };

  for (std::size_t e = 0; e < cfg.source_epochs; ++e) run_epoch(0);

  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    std::vector<Vector> probs;
    probs.reserve(data.target_train.size());
    for (const auto& x : data.target_train)
      probs.push_back(predict(trainer.model().enc_c, trainer.model().cls, x).probabilities);
    const double portion = cfg.portion_for_round(r - 1);
    const PseudoLabelSet labels = pseudo_label(probs, portion);

    RoundRecord rec;
    rec.round = r;
    rec.portion = portion;
    rec.pseudo_counts.assign(K, 0);
    for (auto& g : target_by_class) g.clear();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i]) {
        const auto k = static_cast<std::size_t>(labels[i]->label);
        target_by_class[k].push_back(i);
        ++rec.pseudo_counts[k];
      }
    for (std::size_t k = 0; k < K; ++k)
      if (target_by_class[k].empty()) rec.fallback_classes.push_back(k);

    for (std::size_t e = 0; e < cfg.epochs_per_round; ++e) run_epoch(r);
    rec.target = evaluate(trainer.model(), data.target_test);
    result.rounds.push_back(std::move(rec));
  }

  result.final_target = evaluate(trainer.model(), data.target_test);
  result.model = std::move(trainer.model());
  return result;
}

}  // namespace rcg
