#include <gtest/gtest.h>

#include "rcg/error.hpp"
#include "rcg/metrics.hpp"
#include "rcg/tensor.hpp"

using rcg::ConfusionMatrix;
using rcg::Matrix;

TEST(Metrics, DiagonalIsPerfect) {
  const auto conf = ConfusionMatrix::from_counts(Matrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 4}});
  EXPECT_DOUBLE_EQ(rcg::accuracy(conf), 1.0);
  EXPECT_DOUBLE_EQ(rcg::mae(conf), 0.0);
  EXPECT_DOUBLE_EQ(rcg::qwk(conf), 1.0);
}

TEST(Metrics, ThreeSampleArithmetic) {
  // Predictions (1,2,3) against truth (1,3,1), shifted to 0-based.
  const int truth[] = {0, 2, 0};
  const int pred[] = {0, 1, 2};
  const auto conf = ConfusionMatrix::from_labels(truth, pred, 3);
  EXPECT_DOUBLE_EQ(rcg::accuracy(conf), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rcg::mae(conf), 1.0);
}

TEST(Metrics, PermutingLabelsKeepsAccuracyChangesMae) {
  const int truth[] = {0, 1, 2};
  const int pred[] = {1, 1, 2};
  // Relabel classes 1 <-> 2 in both.
  const int truth_p[] = {0, 2, 1};
  const int pred_p[] = {2, 2, 1};
  const auto a = ConfusionMatrix::from_labels(truth, pred, 3);
  const auto b = ConfusionMatrix::from_labels(truth_p, pred_p, 3);
  EXPECT_DOUBLE_EQ(rcg::accuracy(a), rcg::accuracy(b));
  EXPECT_NE(rcg::mae(a), rcg::mae(b));
}

TEST(Qwk, AllPredictedOneClassIsZero) {
  const auto conf = ConfusionMatrix::from_counts(Matrix{{5, 0}, {5, 0}});
  EXPECT_DOUBLE_EQ(rcg::qwk(conf), 0.0);
}

TEST(Qwk, ChanceLevelNearZero) {
  rcg::Rng rng(1);
  ConfusionMatrix conf(5);
  for (int i = 0; i < 10000; ++i)
    conf.add(static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5)));
  EXPECT_GT(rcg::qwk(conf), -0.05);
  EXPECT_LT(rcg::qwk(conf), 0.05);
}

TEST(Qwk, BoundedScaleInvariantAndOneOnlyOnDiagonal) {
  rcg::Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    Matrix counts(4, 4);
    for (double& c : counts.span()) c = static_cast<double>(rng.below(6));
    counts(0, 0) += 1;
    counts(0, 3) += rep % 2;  // force an off-diagonal entry half the time
    const auto conf = ConfusionMatrix::from_counts(counts);
    const double k = rcg::qwk(conf);
    EXPECT_LE(k, 1.0 + 1e-12);
    Matrix scaled = counts;
    for (double& c : scaled.span()) c *= 3;
    EXPECT_NEAR(rcg::qwk(ConfusionMatrix::from_counts(scaled)), k, 1e-12);
    bool off_diag = false;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) off_diag |= (i != j && counts(i, j) > 0);
    if (off_diag) {
      EXPECT_LT(k, 1.0);
    }
    EXPECT_NEAR(rcg::mae(ConfusionMatrix::from_counts(counts.transposed())), rcg::mae(conf),
                1e-12);
  }
}

TEST(Metrics, EmptyMatrixThrows) {
  const ConfusionMatrix conf(3);
  EXPECT_THROW(rcg::accuracy(conf), rcg::Error);
  EXPECT_THROW(rcg::mae(conf), rcg::Error);
  EXPECT_THROW(rcg::qwk(conf), rcg::Error);
}

TEST(Metrics, RejectsFractionalCounts) {
  EXPECT_THROW(ConfusionMatrix::from_counts(Matrix{{0.5, 0}, {0, 1}}), rcg::Error);
}

TEST(Metrics, ScoreBundlesAll) {
  const auto conf = ConfusionMatrix::from_counts(Matrix{{2, 1}, {0, 3}});
  const auto s = rcg::score(conf);
  EXPECT_DOUBLE_EQ(s.accuracy, rcg::accuracy(conf));
  EXPECT_DOUBLE_EQ(s.mae, rcg::mae(conf));
  EXPECT_DOUBLE_EQ(s.qwk, rcg::qwk(conf));
}
