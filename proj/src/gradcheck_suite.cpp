#include "rcg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "rcg/uda_trainer.hpp"
#include "rcg/variational.hpp"

namespace rcg {

double GradcheckSuiteResult::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.result.max_rel_error);
  return m;
}

const GradcheckEntry& GradcheckSuiteResult::worst() const {
  if (entries.empty()) throw InvalidArgument("gradcheck suite: no entries");
  return *std::max_element(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.result.max_rel_error < b.result.max_rel_error;
  });
}

namespace {

constexpr std::size_t kObs = 5, kClasses = 3, kContent = 2, kStyle = 2;
constexpr double kKinkMargin = 1e-3;

Vector uniform_vector(Rng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

void randomize_prior(RcgParams& p, Rng& rng) {
  for (double& v : p.mu1_values()) v = rng.normal();
  for (double& v : p.delta_raw()) v = 0.3 * rng.normal();
  for (double& v : p.sigma_raw()) v = rng.normal();
}

// Smallest |x - recon| over the batch, decoding exactly as compute_step does.
double min_l1_residual(const GroupBatch& batch, const Model& m, const StepNoise& noise) {
  std::vector<std::vector<DiagGaussian>> members(kClasses);
  std::vector<std::pair<const Vector*, bool>> order;
  std::vector<std::size_t> cls;
  for (std::size_t k = 0; k < kClasses; ++k) {
    for (const auto& x : batch.source[k]) order.push_back({&x, false}), cls.push_back(k);
    for (const auto& x : batch.target[k]) order.push_back({&x, true}), cls.push_back(k);
  }
  for (std::size_t i = 0; i < order.size(); ++i) members[cls[i]].push_back(m.enc_c.forward(*order[i].first));
  double best = INFINITY;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Vector c = reparameterize(poe_fuse(members[cls[i]]), noise.anchor[cls[i]]);
    const auto& enc_u = order[i].second ? m.enc_u_t : m.enc_u_s;
    const Vector u = reparameterize(enc_u.forward(*order[i].first), noise.style[i]);
    Vector z(kContent + kStyle);
    std::copy(c.begin(), c.end(), z.begin());
    std::copy(u.begin(), u.end(), z.begin() + kContent);
    const Vector r = (order[i].second ? m.dec_t : m.dec_s).forward(z);
    for (std::size_t j = 0; j < r.size(); ++j) best = std::min(best, std::abs(r[j] - (*order[i].first)[j]));
  }
  return best;
}

void check_losses(std::size_t idx, Rng& rng, GradcheckSuiteResult& out) {
  auto add = [&](const std::string& check, const std::string& block, const GradcheckResult& r) {
    out.entries.push_back({idx, check, block, r});
  };

  {
    Vector logits = uniform_vector(rng, kClasses, -2.0, 2.0);
    const int label = static_cast<int>(rng.below(kClasses));
    const Vector g = cross_entropy(logits, label).grad;
    add("cross_entropy", "logits",
        gradcheck(logits.span(), g.span(), [&] { return cross_entropy(logits, label).loss; },
                  kGradcheckStep));
  }
  {
    const Vector target = uniform_vector(rng, kObs, -1.0, 1.0);
    Vector recon = target;
    for (double& v : recon) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.01 + rng.uniform());
    const Vector g = l1_loss(target, recon).grad;
    add("l1", "recon",
        gradcheck(recon.span(), g.span(), [&] { return l1_loss(target, recon).loss; },
                  kGradcheckStep));
  }
  {
    Vector mean = uniform_vector(rng, kStyle, -1.5, 1.5);
    Vector logvar = uniform_vector(rng, kStyle, -1.0, 1.0);
    const GaussianGrad g = kl_style_grad(DiagGaussian(mean, logvar));
    auto f = [&] { return kl_style(DiagGaussian(mean, logvar)); };
    add("kl_style", "mean", gradcheck(mean.span(), g.mean.span(), f, kGradcheckStep));
    add("kl_style", "logvar", gradcheck(logvar.span(), g.logvar.span(), f, kGradcheckStep));
  }
  {
    RcgParams prior(kClasses, kContent, 2.0 + rng.uniform());
    randomize_prior(prior, rng);
    std::vector<Vector> means, logvars;
    for (std::size_t k = 0; k < kClasses; ++k) {
      means.push_back(uniform_vector(rng, kContent, -1.5, 3.0));
      logvars.push_back(uniform_vector(rng, kContent, -1.0, 1.0));
    }
    auto fused = [&] {
      std::vector<DiagGaussian> f;
      for (std::size_t k = 0; k < kClasses; ++k) f.emplace_back(means[k], logvars[k]);
      return f;
    };
    const ContentKlGrad g = kl_content_grad(fused(), prior);
    auto f = [&] { return kl_content(fused(), build_joint(prior)); };
    for (std::size_t k = 0; k < kClasses; ++k) {
      add("kl_content", "fused" + std::to_string(k) + ".mean",
          gradcheck(means[k].span(), g.fused[k].mean.span(), f, kGradcheckStep));
      add("kl_content", "fused" + std::to_string(k) + ".logvar",
          gradcheck(logvars[k].span(), g.fused[k].logvar.span(), f, kGradcheckStep));
    }
    add("kl_content", "prior.mu1", gradcheck(prior.mu1_values(), g.prior.mu1, f, kGradcheckStep));
    add("kl_content", "prior.delta_raw",
        gradcheck(prior.delta_raw(), g.prior.delta_raw, f, kGradcheckStep));
    add("kl_content", "prior.sigma_raw",
        gradcheck(prior.sigma_raw(), g.prior.sigma_raw, f, kGradcheckStep));
  }
  {
    Mlp dis({kObs, 4, 1}, {Activation::tanh, Activation::sigmoid}, rng);
    const Vector real = uniform_vector(rng, kObs, -1.0, 1.0);
    Vector fake = uniform_vector(rng, kObs, -1.0, 1.0);
    const AdversarialResult r = adversarial_losses(dis, real, fake);
    add("adversarial_generator", "fake",
        gradcheck(fake.span(), r.fake_grad.span(),
                  [&] { return adversarial_losses(dis, real, fake).generator_loss; },
                  kGradcheckStep));
    MlpGrads g = r.discriminator_grads;
    auto gblocks = g.blocks("dis");
    auto pblocks = dis.blocks("dis");
    for (std::size_t b = 0; b < pblocks.size(); ++b)
      add("adversarial_discriminator", pblocks[b].name,
          gradcheck(pblocks[b].values, gblocks[b].values,
                    [&] { return adversarial_losses(dis, real, fake).discriminator_loss; },
                    kGradcheckStep));
  }
}

void check_step(std::size_t idx, PriorKind kind, Rng& rng, GradcheckSuiteResult& out) {
  TrainConfig cfg;
  cfg.prior_kind = kind;
  cfg.content_dim = kContent;
  cfg.style_dim = kStyle;
  cfg.encoder_hidden = 4;
  cfg.classifier_hidden = 3;
  cfg.discriminator_hidden = 4;
  cfg.sigma_rule = 2.0 + rng.uniform();
  cfg.ce_weight = 0.5 + rng.uniform();
  cfg.alpha = 0.5 + rng.uniform();
  cfg.beta = 0.5 + rng.uniform();
  cfg.gamma = 0.5 + rng.uniform();
  cfg.lambda = 0.5 + rng.uniform();
  cfg.theta = 0.5 + rng.uniform();

  Model model = Model::create(kObs, kClasses, cfg, rng);
  randomize_prior(model.prior, rng);

  GroupBatch batch;
  StepNoise noise;
  for (int attempt = 0;; ++attempt) {
    batch.source.assign(kClasses, {});
    batch.target.assign(kClasses, {});
    for (std::size_t k = 0; k < kClasses; ++k) {
      for (std::size_t j = 0; j < 2; ++j) batch.source[k].push_back(uniform_vector(rng, kObs, -1.0, 1.0));
      const std::size_t nt = rng.below(3);
      for (std::size_t j = 0; j < nt; ++j) batch.target[k].push_back(uniform_vector(rng, kObs, -1.0, 1.0));
    }
    noise = StepNoise::draw(batch, kContent, kStyle, rng);
    if (min_l1_residual(batch, model, noise) > kKinkMargin) break;
    if (attempt == 100) throw Error("gradcheck suite: could not draw a batch away from the L1 kink");
  }

  const StepResult base = compute_step(batch, model, cfg, noise);
  ModelGrads grads = base.grads;
  const std::string prefix = std::string("step/") + prior_kind_name(kind) + "/";
  for (NetworkId id : kAllNetworks) {
    if (id == NetworkId::prior && kind != PriorKind::rcg) continue;
    auto params = network_blocks(model, id);
    auto analytic = grads.blocks(id);
    auto objective = [&] {
      return network_objective(id, compute_step(batch, model, cfg, noise).losses, cfg);
    };
    for (std::size_t b = 0; b < params.size(); ++b)
      out.entries.push_back({idx, prefix + network_name(id), params[b].name,
                             gradcheck(params[b].values, analytic[b].values, objective,
                                       kGradcheckStep)});
  }
}

}  // namespace

GradcheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t models) {
  GradcheckSuiteResult out;
  for (std::size_t i = 0; i < models; ++i) {
    Rng rng(seed + i);
    check_losses(i, rng, out);
    check_step(i, PriorKind::rcg, rng, out);
    check_step(i, PriorKind::iid_gaussian, rng, out);
  }
  return out;
}

}  // namespace rcg
