#include "rcg/synth.hpp"

#include <cmath>
#include <numeric>

#include "rcg/rcg_prior.hpp"
#include "rcg/simd/kernels.hpp"

namespace rcg {

void SynthSpec::validate() const {
  if (num_classes < 2 || content_dim == 0 || style_dim == 0 || obs_dim == 0 ||
      source_per_class == 0 || target_per_class == 0 || test_per_class == 0)
    throw InvalidArgument("SynthSpec: all counts must be positive and K >= 2");
  if (!(label_noise_rate >= 0.0 && label_noise_rate < 0.5))
    throw InvalidArgument("SynthSpec: label_noise_rate must lie in [0, 0.5)");
  if (domain_shift_scale < 0.0 || content_jitter < 0.0 || obs_noise < 0.0)
    throw InvalidArgument("SynthSpec: scales must be non-negative");
}

namespace {

struct DomainMap {
  Matrix mixing;  // obs x (content + style)
  Vector offset;  // obs
};

Matrix random_rotation(std::size_t n, Rng& rng) {
  // Gram-Schmidt on a Gaussian matrix; rows are orthonormal.
  Matrix q(n, n);
  for (double& v : q.span()) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double proj = simd::dot(q.row(i), q.row(j));
      simd::axpy(-proj, q.row(j), q.row(i));
    }
    const double norm = std::sqrt(simd::dot(q.row(i), q.row(i)));
    for (double& v : q.row(i)) v /= norm;
  }
  return q;
}

Matrix draw_anchors(const SynthSpec& spec, Rng& rng) {
  const std::size_t K = spec.num_classes;
  std::vector<double> mu1(spec.content_dim, 0.0);
  std::vector<std::vector<double>> delta(spec.content_dim, std::vector<double>(K - 1, 3.0));
  std::vector<std::vector<double>> sigma(spec.content_dim, std::vector<double>(K - 1, 1.0));
  const RcgParams truth =
      RcgParams::from_constrained(K, spec.content_dim, 3.0, mu1, delta, sigma);
  // Redraw until the anchors are strictly ordered in every coordinate.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Matrix c = sample_chain(truth, rng);
    if (is_poset_aligned(c)) return c;
  }
  throw Error("generate: could not draw poset-aligned anchors");
}

Vector observe(const DomainMap& map, const Vector& latent, double noise, Rng& rng) {
  Vector x(map.mixing.rows());
  simd::gemv(map.mixing.span(), map.mixing.rows(), map.mixing.cols(), latent.span(), x.span());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::tanh(x[i] + map.offset[i]) + noise * rng.normal();
  return x;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t K = spec.num_classes;
  const std::size_t C = spec.content_dim;
  const std::size_t U = spec.style_dim;
  const std::size_t latent = C + U;

  SynthDataset data;
  data.anchors = draw_anchors(spec, rng);

  // Anchors are standardized per dimension before mixing.
  std::vector<double> centre(C, 0.0), spread(C, 0.0);
  for (std::size_t d = 0; d < C; ++d) {
    for (std::size_t k = 0; k < K; ++k) centre[d] += data.anchors(k, d);
    centre[d] /= static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double e = data.anchors(k, d) - centre[d];
      spread[d] += e * e;
    }
    spread[d] = std::sqrt(spread[d] / static_cast<double>(K));
  }

  DomainMap source{Matrix(spec.obs_dim, latent), Vector(spec.obs_dim)};
  const double content_scale = spec.content_gain / std::sqrt(static_cast<double>(C));
  const double style_scale = spec.style_gain / std::sqrt(static_cast<double>(U));
  for (std::size_t i = 0; i < spec.obs_dim; ++i) {
    for (std::size_t j = 0; j < latent; ++j)
      source.mixing(i, j) = rng.normal() * (j < C ? content_scale : style_scale);
    source.offset[i] = 0.1 * rng.normal();
  }

  DomainMap target = source;
  for (std::size_t i = 0; i < spec.obs_dim; ++i) {
    for (std::size_t j = 0; j < latent; ++j)
      target.mixing(i, j) +=
          spec.domain_shift_scale * rng.normal() * (j < C ? content_scale : style_scale);
    target.offset[i] += 0.5 * spec.domain_shift_scale * rng.normal();
  }
  if (spec.domain_shift_scale > 0.0) {
    const Matrix rot = random_rotation(U, rng);
    for (std::size_t i = 0; i < spec.obs_dim; ++i) {
      std::vector<double> style_cols(U, 0.0);
      for (std::size_t j = 0; j < U; ++j)
        for (std::size_t l = 0; l < U; ++l) style_cols[j] += target.mixing(i, C + l) * rot(l, j);
      for (std::size_t j = 0; j < U; ++j) target.mixing(i, C + j) = style_cols[j];
    }
  }

  auto sample = [&](const DomainMap& map, int label) {
    Vector z(latent);
    for (std::size_t d = 0; d < C; ++d) {
      const double content =
          data.anchors(static_cast<std::size_t>(label), d) + spec.content_jitter * rng.normal();
      z[d] = (content - centre[d]) / spread[d];
    }
    for (std::size_t j = 0; j < U; ++j) z[C + j] = rng.normal();
    return observe(map, z, spec.obs_noise, rng);
  };

  auto fill = [&](LabeledSet& set, const DomainMap& map, std::size_t per_class) {
    std::vector<int> labels;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < per_class; ++n) labels.push_back(static_cast<int>(k));
    // Fisher-Yates so classes are interleaved.
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
    for (int y : labels) {
      set.x.push_back(sample(map, y));
      set.y.push_back(y);
    }
  };

  fill(data.source, source, spec.source_per_class);
  LabeledSet target_train;
  fill(target_train, target, spec.target_per_class);
  data.target_train = std::move(target_train.x);
  fill(data.target_test, target, spec.test_per_class);

  if (spec.label_noise_rate > 0.0) {
    for (int& y : data.source.y) {
      if (rng.uniform() >= spec.label_noise_rate) continue;
      const int step = rng.uniform() < 0.5 ? -1 : 1;
      y = std::clamp(y + step, 0, static_cast<int>(K) - 1);
    }
  }
  return data;
}

}  // namespace rcg
