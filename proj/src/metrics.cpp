#include "rcg/metrics.hpp"

#include <cmath>
#include <string>

namespace rcg {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : counts_(num_classes, num_classes) {
  if (num_classes == 0) throw InvalidArgument("ConfusionMatrix: K must be positive");
}

ConfusionMatrix ConfusionMatrix::from_labels(std::span<const int> truth,
                                             std::span<const int> predicted,
                                             std::size_t num_classes) {
  if (truth.size() != predicted.size())
    throw InvalidArgument("ConfusionMatrix: truth and prediction lengths differ");
  ConfusionMatrix c(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return c;
}

ConfusionMatrix ConfusionMatrix::from_counts(Matrix counts) {
  if (counts.rows() != counts.cols() || counts.rows() == 0)
    throw InvalidArgument("ConfusionMatrix: counts must be a non-empty square matrix");
  for (double v : counts.span())
    if (v < 0.0 || v != std::floor(v))
      throw InvalidArgument("ConfusionMatrix: counts must be non-negative integers");
  ConfusionMatrix c(counts.rows());
  c.counts_ = std::move(counts);
  return c;
}

void ConfusionMatrix::add(int truth, int predicted, double count) {
  const auto k = static_cast<int>(num_classes());
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k)
    throw InvalidArgument("ConfusionMatrix::add: class index out of range (" +
                          std::to_string(truth) + ", " + std::to_string(predicted) + ")");
  counts_(static_cast<std::size_t>(truth), static_cast<std::size_t>(predicted)) += count;
}

double ConfusionMatrix::total() const {
  double s = 0.0;
  for (double v : counts_.span()) s += v;
  return s;
}

namespace {

double checked_total(const ConfusionMatrix& conf, const char* who) {
  const double t = conf.total();
  if (!(t > 0.0)) throw InvalidArgument(std::string(who) + ": empty confusion matrix");
  return t;
}

}  // namespace

double accuracy(const ConfusionMatrix& conf) {
  const double total = checked_total(conf, "accuracy");
  double diag = 0.0;
  for (std::size_t i = 0; i < conf.num_classes(); ++i) diag += conf.counts()(i, i);
  return diag / total;
}

double mae(const ConfusionMatrix& conf) {
  const double total = checked_total(conf, "mae");
  double s = 0.0;
  const std::size_t K = conf.num_classes();
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      s += conf.counts()(i, j) * std::abs(static_cast<double>(i) - static_cast<double>(j));
  return s / total;
}

double qwk(const ConfusionMatrix& conf) {
  const double total = checked_total(conf, "qwk");
  const std::size_t K = conf.num_classes();
  if (K < 2) throw InvalidArgument("qwk: needs K >= 2");
  std::vector<double> row(K, 0.0), col(K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      row[i] += conf.counts()(i, j);
      col[j] += conf.counts()(i, j);
    }
  const double denom = static_cast<double>((K - 1) * (K - 1));
  double observed = 0.0, expected = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      const double w = diff * diff / denom;
      observed += w * conf.counts()(i, j);
      expected += w * row[i] * col[j] / total;
    }
  if (expected == 0.0) return 0.0;
  return 1.0 - observed / expected;
}

OrdinalScores score(const ConfusionMatrix& conf) { return {accuracy(conf), mae(conf), qwk(conf)}; }

}  // namespace rcg
