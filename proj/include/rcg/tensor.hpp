#pragma once

// Dense vector/matrix kernel: storage, Cholesky, triangular solves,
// log-determinants and a seeded PRNG.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcg/error.hpp"

namespace rcg {

class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;
  void fill(double v);

  bool operator==(const Vector&) const = default;

private:
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  Vector column(std::size_t c) const;
  Matrix transposed() const;
  bool all_finite() const;
  bool is_symmetric(double tol = 1e-12) const;
  bool is_lower_triangular() const;
  void fill(double v);

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * a^T
Matrix multiply_by_transpose(const Matrix& a);
Vector matvec(const Matrix& a, const Vector& x);
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vector& a, const Vector& b);

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// Throws FactorizationError carrying the index of the first non-positive
/// pivot.
Matrix cholesky(const Matrix& m);

/// Forward substitution for L x = b.
Vector solve_lower(const Matrix& lower, const Vector& b);
/// Back substitution for L^T x = b, given the lower factor L.
Vector solve_lower_transposed(const Matrix& lower, const Vector& b);
/// 2 * sum(log L_ii).
double logdet_from_chol(const Matrix& lower);
/// (L L^T)^{-1} from the factor, built column by column from triangular solves.
Matrix inverse_from_chol(const Matrix& lower);

/// Symmetric matrix with a lazily computed Cholesky factor.
class SpdMatrix {
public:
  SpdMatrix() = default;
  explicit SpdMatrix(Matrix base);
  /// Adopts a factor already known to satisfy L L^T = base.
  SpdMatrix(Matrix base, Matrix chol);

  const Matrix& base() const { return base_; }
  const Matrix& chol() const;
  std::size_t dim() const { return base_.rows(); }

private:
  Matrix base_;
  mutable std::optional<Matrix> chol_;
};

/// xoshiro256** seeded through splitmix64. Normal deviates use the
/// Box-Muller transform, the second deviate of each pair is cached.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1], safe as a log argument.
  double uniform_open0();
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  std::optional<double> spare_;
};

/// n i.i.d. standard normal deviates.
Vector normal_draws(Rng& rng, std::size_t n);

// CSV debug dumps: one row per line, '.' decimal, no header.
void write_csv(std::ostream& os, const Matrix& m);
void write_csv(std::ostream& os, const Vector& v);

/// Shortest locale-independent text that round-trips a double (%.17g).
std::string format_double(double v);

}  // namespace rcg
