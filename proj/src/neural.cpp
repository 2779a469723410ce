#include "rcg/neural.hpp"

#include <algorithm>
#include <cmath>

#include "rcg/simd/kernels.hpp"

namespace rcg {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::linear:
      return x;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return sigmoid(x);
  }
  return x;
}

// Derivative expressed through the activation output y.
double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::linear:
      return 1.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::linear:
      return "linear";
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "?";
}

void MlpGrads::zero() {
  for (auto& w : weight) w.fill(0.0);
  for (auto& b : bias) b.fill(0.0);
}

void MlpGrads::scale(double s) {
  for (auto& w : weight)
    for (double& v : w.span()) v *= s;
  for (auto& b : bias)
    for (double& v : b) v *= s;
}

void MlpGrads::add(const MlpGrads& other, double w) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    simd::axpy(w, other.weight[i].span(), weight[i].span());
    simd::axpy(w, other.bias[i].span(), bias[i].span());
  }
}

double MlpGrads::max_abs() const {
  double m = 0.0;
  for (const auto& w : weight)
    for (double v : w.span()) m = std::max(m, std::abs(v));
  for (const auto& b : bias)
    for (double v : b) m = std::max(m, std::abs(v));
  return m;
}

std::vector<ParamBlock> MlpGrads::blocks(const std::string& prefix) {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    out.push_back({prefix + ".layer" + std::to_string(i) + ".weight", weight[i].span()});
    out.push_back({prefix + ".layer" + std::to_string(i) + ".bias", bias[i].span()});
  }
  return out;
}

Mlp::Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
         Rng& rng) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1)
    throw InvalidArgument("Mlp: need dims {in, ..., out} and one activation per layer");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i], fan_out = dims[i + 1];
    if (fan_in == 0 || fan_out == 0) throw InvalidArgument("Mlp: zero-width layer");
    Layer layer{Matrix(fan_out, fan_in), Vector(fan_out), activations[i]};
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : layer.weight.span()) w = (2.0 * rng.uniform() - 1.0) * r;
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgument("Mlp: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) throw InvalidArgument("Mlp: bias length mismatch");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw InvalidArgument("Mlp: layer dimensions do not chain");
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector Mlp::forward(const Vector& x, MlpCache* cache) const {
  if (x.size() != in_dim())
    throw InvalidArgument("Mlp::forward: input has " + std::to_string(x.size()) +
                          " entries, expected " + std::to_string(in_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Vector h = x;
  for (const auto& layer : layers_) {
    Vector z(layer.weight.rows());
    simd::gemv(layer.weight.span(), layer.weight.rows(), layer.weight.cols(), h.span(), z.span());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = activate(layer.activation, z[i] + layer.bias[i]);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

Vector Mlp::backward(const MlpCache& cache, const Vector& upstream, MlpGrads* grads) const {
  if (cache.empty() || cache.inputs.size() != layers_.size())
    throw InvalidArgument("Mlp::backward: no forward cache for this network");
  if (upstream.size() != out_dim()) throw InvalidArgument("Mlp::backward: upstream size mismatch");
  Vector g = upstream;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const Vector& y = cache.outputs[li];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activation_slope(layer.activation, y[i]);
    if (grads) {
      simd::ger(1.0, g.span(), cache.inputs[li].span(), grads->weight[li].span());
      simd::axpy(1.0, g.span(), grads->bias[li].span());
    }
    Vector gin(layer.weight.cols());
    simd::gemv_t(layer.weight.span(), layer.weight.rows(), layer.weight.cols(), g.span(),
                 gin.span());
    g = std::move(gin);
  }
  return g;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& l : layers_) {
    g.weight.emplace_back(l.weight.rows(), l.weight.cols());
    g.bias.emplace_back(l.bias.size());
  }
  return g;
}

std::vector<ParamBlock> Mlp::blocks(const std::string& prefix) {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.push_back({prefix + ".layer" + std::to_string(i) + ".weight", layers_[i].weight.span()});
    out.push_back({prefix + ".layer" + std::to_string(i) + ".bias", layers_[i].bias.span()});
  }
  return out;
}

void GaussianHead::Grads::zero() {
  body.zero();
  mean.zero();
  logvar.zero();
}

void GaussianHead::Grads::scale(double s) {
  body.scale(s);
  mean.scale(s);
  logvar.scale(s);
}

void GaussianHead::Grads::add(const Grads& other, double w) {
  body.add(other.body, w);
  mean.add(other.mean, w);
  logvar.add(other.logvar, w);
}

double GaussianHead::Grads::max_abs() const {
  return std::max({body.max_abs(), mean.max_abs(), logvar.max_abs()});
}

std::vector<ParamBlock> GaussianHead::Grads::blocks(const std::string& prefix) {
  auto out = body.blocks(prefix + ".body");
  for (auto& b : mean.blocks(prefix + ".mean")) out.push_back(b);
  for (auto& b : logvar.blocks(prefix + ".logvar")) out.push_back(b);
  return out;
}

GaussianHead::GaussianHead(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                           std::size_t latent_dim, Rng& rng) {
  if (hidden.empty()) throw InvalidArgument("GaussianHead: need at least one hidden layer");
  std::vector<std::size_t> dims{in_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  body_ = Mlp(dims, std::vector<Activation>(hidden.size(), Activation::tanh), rng);
  mean_head_ = Mlp({hidden.back(), latent_dim}, {Activation::linear}, rng);
  logvar_head_ = Mlp({hidden.back(), latent_dim}, {Activation::linear}, rng);
}

DiagGaussian GaussianHead::forward(const Vector& x, Cache* cache) const {
  MlpCache* body_cache = cache ? &cache->body : nullptr;
  const Vector h = body_.forward(x, body_cache);
  Vector mean = mean_head_.forward(h, cache ? &cache->mean : nullptr);
  Vector logvar = logvar_head_.forward(h, cache ? &cache->logvar : nullptr);
  if (cache) cache->raw_logvar = logvar;
  return DiagGaussian(std::move(mean), std::move(logvar));
}

Vector GaussianHead::backward(const Cache& cache, const GaussianGrad& upstream,
                              Grads* grads) const {
  Vector g_lv = upstream.logvar;
  for (std::size_t i = 0; i < g_lv.size(); ++i) {
    const double raw = cache.raw_logvar[i];
    if (raw < kLogvarMin || raw > kLogvarMax) g_lv[i] = 0.0;
  }
  Vector gh = mean_head_.backward(cache.mean, upstream.mean, grads ? &grads->mean : nullptr);
  const Vector gh2 = logvar_head_.backward(cache.logvar, g_lv, grads ? &grads->logvar : nullptr);
  simd::axpy(1.0, gh2.span(), gh.span());
  return body_.backward(cache.body, gh, grads ? &grads->body : nullptr);
}

GaussianHead::Grads GaussianHead::zero_grads() const {
  return {body_.zero_grads(), mean_head_.zero_grads(), logvar_head_.zero_grads()};
}

std::vector<ParamBlock> GaussianHead::blocks(const std::string& prefix) {
  auto out = body_.blocks(prefix + ".body");
  for (auto& b : mean_head_.blocks(prefix + ".mean")) out.push_back(b);
  for (auto& b : logvar_head_.blocks(prefix + ".logvar")) out.push_back(b);
  return out;
}

Vector softmax(const Vector& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

LossGrad cross_entropy(const Vector& logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(logits.size()) + ")");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  LossGrad out{log_z - logits[static_cast<std::size_t>(label)], softmax(logits)};
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

LossGrad l1_loss(const Vector& target, const Vector& recon) {
  if (target.size() != recon.size()) throw InvalidArgument("l1_loss: length mismatch");
  LossGrad out{0.0, Vector(recon.size())};
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double diff = recon[i] - target[i];
    out.loss += std::abs(diff);
    out.grad[i] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

AdversarialResult adversarial_losses(const Mlp& dis, const Vector& real, const Vector& fake) {
  if (dis.out_dim() != 1) throw InvalidArgument("adversarial_losses: discriminator must have one output");
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  MlpCache real_cache, fake_cache;
  const double p_real = dis.forward(real, &real_cache)[0];
  const double p_fake = dis.forward(fake, &fake_cache)[0];
  const double pr = std::clamp(p_real, lo, hi);
  const double pf = std::clamp(p_fake, lo, hi);

  AdversarialResult out;
  out.generator_loss = -std::log(pf);
  out.discriminator_loss = -(std::log(pr) + std::log1p(-pf));
  out.discriminator_grads = dis.zero_grads();

  // d/dp of each log term; zero where the clip is active.
  const double g_real = (p_real > lo && p_real < hi) ? -1.0 / pr : 0.0;
  const double g_fake_dis = (p_fake > lo && p_fake < hi) ? 1.0 / (1.0 - pf) : 0.0;
  const double g_fake_gen = (p_fake > lo && p_fake < hi) ? -1.0 / pf : 0.0;
  dis.backward(real_cache, Vector{g_real}, &out.discriminator_grads);
  dis.backward(fake_cache, Vector{g_fake_dis}, &out.discriminator_grads);
  out.fake_grad = dis.backward(fake_cache, Vector{g_fake_gen}, nullptr);
  return out;
}

void Adam::step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads) {
  if (params.size() != grads.size()) throw InvalidArgument("Adam::step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size())
      throw InvalidArgument("Adam::step: shape mismatch in " + params[b].name);
    for (std::size_t i = 0; i < grads[b].values.size(); ++i)
      if (!std::isfinite(grads[b].values[i]))
        throw NonFiniteError("Adam::step: non-finite gradient for " + params[b].name + "[" +
                             std::to_string(i) + "]");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw InvalidArgument("Adam::step: parameter layout changed between steps");
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = m_[b];
    auto& v = v_[b];
    auto p = params[b].values;
    auto g = grads[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= options_.step_size * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

GradcheckResult gradcheck(std::span<double> params, std::span<const double> analytic,
                          const std::function<double()>& objective, double h) {
  if (params.size() != analytic.size()) throw InvalidArgument("gradcheck: length mismatch");
  GradcheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double fp = objective();
    params[i] = saved - h;
    const double fm = objective();
    params[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
    ++res.checked;
    if (i == 0 || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
      res.analytic = a;
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace rcg
