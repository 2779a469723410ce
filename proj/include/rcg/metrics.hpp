#pragma once

// Ordinal classification metrics over a confusion matrix
// (rows = truth, cols = prediction, 0-based classes).

#include <cstddef>
#include <span>

#include "rcg/tensor.hpp"

namespace rcg {

class ConfusionMatrix {
public:
  explicit ConfusionMatrix(std::size_t num_classes);
  static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> predicted,
                                     std::size_t num_classes);
  /// Adopts explicit counts; entries must be non-negative integers.
  static ConfusionMatrix from_counts(Matrix counts);

  void add(int truth, int predicted, double count = 1.0);
  std::size_t num_classes() const { return counts_.rows(); }
  double total() const;
  const Matrix& counts() const { return counts_; }

private:
  Matrix counts_;
};

/// trace / total
double accuracy(const ConfusionMatrix& conf);
/// sum_ij n_ij |i - j| / total
double mae(const ConfusionMatrix& conf);
/// Quadratic weighted kappa with weights (i-j)^2 / (K-1)^2; 0 when the
/// expected weighted disagreement is 0.
double qwk(const ConfusionMatrix& conf);

struct OrdinalScores {
  double accuracy = 0.0;
  double mae = 0.0;
  double qwk = 0.0;
};

OrdinalScores score(const ConfusionMatrix& conf);

}  // namespace rcg
