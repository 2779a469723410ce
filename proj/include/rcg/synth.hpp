#pragma once

// Synthetic two-domain ordinal dataset.
//
// Class anchors c_0 < c_1 < ... < c_{K-1} (coordinatewise) are drawn from
// an RCG chain with unit spacing noise and gap 3; a sample of class y has
// content c_y + jitter and style u ~ N(0, I), and is observed through a
// domain-specific map x = tanh(A_dom [content; style] + b_dom) + noise.
// The target map perturbs the source mixing matrix and rotates the style
// subspace, so the content subspace stays recoverable in both domains.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rcg/tensor.hpp"

namespace rcg {

struct SynthSpec {
  std::size_t num_classes = 5;
  std::size_t content_dim = 4;
  std::size_t style_dim = 4;
  std::size_t obs_dim = 32;
  std::size_t source_per_class = 40;
  std::size_t target_per_class = 40;
  std::size_t test_per_class = 20;
  double domain_shift_scale = 0.8;
  double label_noise_rate = 0.0;
  double content_jitter = 0.1;
  double obs_noise = 0.05;
  /// Column scale of the content block of the mixing matrix, applied to
  /// anchors centred and divided by their per-dimension spread.
  double content_gain = 1.0;
  double style_gain = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LabeledSet {
  std::vector<Vector> x;
  std::vector<int> y;
  std::size_t size() const { return x.size(); }
};

struct SynthDataset {
  LabeledSet source;                // labels possibly corrupted by label noise
  std::vector<Vector> target_train; // unlabeled
  LabeledSet target_test;
  Matrix anchors;                   // K x content_dim, ground-truth class anchors
};

SynthDataset generate(const SynthSpec& spec);

}  // namespace rcg
