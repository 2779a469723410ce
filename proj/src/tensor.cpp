#include "rcg/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "rcg/simd/kernels.hpp"

namespace rcg {

bool Vector::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Vector::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Matrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      if (std::abs((*this)(r, c) - (*this)(c, r)) > tol) return false;
  return true;
}

bool Matrix::is_lower_triangular() const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      if ((*this)(r, c) != 0.0) return false;
  return true;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      simd::axpy(a(i, k), b.row(k), out.row(i));
  return out;
}

Matrix multiply_by_transpose(const Matrix& a) {
  Matrix out(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = simd::dot(a.row(i), a.row(j));
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw InvalidArgument("matvec: dimension mismatch");
  Vector y(a.rows());
  simd::gemv(a.span(), a.rows(), a.cols(), x.span(), y.span());
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.span()[i] - b.span()[i]));
  return m;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InvalidArgument("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Matrix cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("cholesky: matrix is not square");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) throw FactorizationError(j, pivot);
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

namespace {

void check_triangular_system(const Matrix& lower, std::size_t n_rhs, const char* who) {
  if (lower.rows() != lower.cols() || lower.rows() != n_rhs)
    throw InvalidArgument(std::string(who) + ": dimension mismatch");
  for (std::size_t i = 0; i < lower.rows(); ++i)
    if (!(lower(i, i) > 0.0))
      throw SingularMatrix(std::string(who) + ": non-positive diagonal at index " +
                           std::to_string(i));
}

}  // namespace

Vector solve_lower(const Matrix& lower, const Vector& b) {
  check_triangular_system(lower, b.size(), "solve_lower");
  const std::size_t n = b.size();
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i] - simd::dot(lower.row(i).first(i), x.span().first(i));
    x[i] = s / lower(i, i);
  }
  return x;
}

Vector solve_lower_transposed(const Matrix& lower, const Vector& b) {
  check_triangular_system(lower, b.size(), "solve_lower_transposed");
  const std::size_t n = b.size();
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x[k];
    x[ii] = s / lower(ii, ii);
  }
  return x;
}

double logdet_from_chol(const Matrix& lower) {
  if (lower.rows() != lower.cols()) throw InvalidArgument("logdet_from_chol: not square");
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0))
      throw std::domain_error("logdet_from_chol: non-positive diagonal at index " +
                              std::to_string(i));
    s += std::log(lower(i, i));
  }
  return 2.0 * s;
}

Matrix inverse_from_chol(const Matrix& lower) {
  const std::size_t n = lower.rows();
  Matrix inv(n, n);
  Vector e(n);
  for (std::size_t c = 0; c < n; ++c) {
    e.fill(0.0);
    e[c] = 1.0;
    Vector col = solve_lower_transposed(lower, solve_lower(lower, e));
    for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
  }
  // Symmetrize against rounding.
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) {
      double avg = 0.5 * (inv(r, c) + inv(c, r));
      inv(r, c) = avg;
      inv(c, r) = avg;
    }
  return inv;
}

SpdMatrix::SpdMatrix(Matrix base) : base_(std::move(base)) {
  if (!base_.is_symmetric(1e-12)) throw InvalidArgument("SpdMatrix: base is not symmetric");
}

SpdMatrix::SpdMatrix(Matrix base, Matrix chol) : SpdMatrix(std::move(base)) {
  if (chol.rows() != base_.rows() || !chol.is_lower_triangular())
    throw InvalidArgument("SpdMatrix: factor must be lower-triangular of matching size");
  for (std::size_t i = 0; i < chol.rows(); ++i)
    if (!(chol(i, i) > 0.0)) throw SingularMatrix("SpdMatrix: factor has non-positive diagonal");
  chol_ = std::move(chol);
}

const Matrix& SpdMatrix::chol() const {
  if (!chol_) chol_ = cholesky(base_);
  return *chol_;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = uniform_open0();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::below: empty range");
  // Lemire's multiply-shift with rejection.
  const std::uint64_t bound = n;
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

Vector normal_draws(Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("normal_draws: n must be positive");
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

void write_csv(std::ostream& os, const Vector& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << format_double(v[i]);
  }
  os << '\n';
}

}  // namespace rcg
