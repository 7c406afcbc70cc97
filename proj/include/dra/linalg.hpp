#pragma once

// Dense real linear algebra used by the residual learning pipeline:
// Cholesky, cyclic-Jacobi symmetric eigendecomposition, symmetric-definite
// generalized eigenproblems, the symmetric matrix exponential, primal/dual
// ridge regression and PCA.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dra/error.hpp"

namespace dra {

using Vector = std::vector<double>;

/// Dense column-major matrix. Columns are the natural unit here: an image
/// set stores one feature vector per column.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_columns(std::span<const Vector> cols) {
    if (cols.empty()) return {};
    Matrix m(cols.front().size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].size() != m.rows_)
        throw Error(Errc::DimensionMismatch, "from_columns: ragged columns");
      std::copy(cols[j].begin(), cols[j].end(), m.col(j).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  Vector col_vector(std::size_t j) const {
    auto c = col(j);
    return {c.begin(), c.end()};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  // Columns [first, first + count).
  Matrix block_cols(std::size_t first, std::size_t count) const {
    assert(first + count <= cols_);
    Matrix b(rows_, count);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * rows_), count * rows_,
                b.data_.begin());
    return b;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric matrix stored as a packed upper triangle, so (i, j) and (j, i)
/// address the same element.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * (n + 1) / 2, fill) {}

  static SymMatrix identity(std::size_t n) {
    SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i) s(i, i) = 1.0;
    return s;
  }

  static SymMatrix diagonal(std::span<const double> d) {
    SymMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s(i, i) = d[i];
    return s;
  }

  // Takes the symmetric part (M + Mᵀ) / 2 of a square dense matrix.
  static SymMatrix from_dense(const Matrix& m) {
    if (m.rows() != m.cols()) throw Error(Errc::DimensionMismatch, "SymMatrix: not square");
    SymMatrix s(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j)
      for (std::size_t i = 0; i <= j; ++i) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
  }

  std::size_t order() const noexcept { return n_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }

  Matrix to_dense() const {
    Matrix m(n_, n_);
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t i = 0; i < n_; ++i) m(i, j) = (*this)(i, j);
    return m;
  }

  // this += w * v vᵀ
  void add_outer(std::span<const double> v, double w = 1.0) {
    assert(v.size() == n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double vj = w * v[j];
      for (std::size_t i = 0; i <= j; ++i) data_[index(i, j)] += v[i] * vj;
    }
  }

  void add_diagonal(double mu) {
    for (std::size_t i = 0; i < n_; ++i) (*this)(i, i) += mu;
  }

  SymMatrix scaled(double s) const {
    SymMatrix r = *this;
    for (double& v : r.data_) v *= s;
    return r;
  }

  double frobenius() const {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t i = 0; i <= j; ++i) {
        const double v = (*this)(i, j);
        acc += (i == j ? 1.0 : 2.0) * v * v;
      }
    return std::sqrt(acc);
  }

  double max_diagonal() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) m = std::max(m, (*this)(i, i));
    return m;
  }

  double quadratic_form(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t i = 0; i < n_; ++i) acc += x[i] * (*this)(i, j) * x[j];
    return acc;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return j * (j + 1) / 2 + i;
  }

  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Eigenvalues sorted non-increasing; column i of `vectors` belongs to values[i].
struct EigPair {
  Vector values;
  Matrix vectors;
};

struct RidgeProblem {
  Matrix design;
  Vector rhs;
  double rho = 1e-2;
};

// ---------------------------------------------------------------------------
// Small vector / matrix helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double frobenius(const Matrix& m) { return norm2(m.data()); }

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::DimensionMismatch, "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      for (std::size_t i = 0; i < a.rows(); ++i) c(i, j) += a(i, k) * bkj;
    }
  return c;
}

// aᵀ b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(Errc::DimensionMismatch, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(Errc::DimensionMismatch, "matvec");
  Vector y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double xj = x[j];
    auto c = a.col(j);
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] += c[i] * xj;
  }
  return y;
}

// aᵀ x
inline Vector matvec_t(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw Error(Errc::DimensionMismatch, "matvec_t");
  Vector y(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

inline Vector symvec(const SymMatrix& a, std::span<const double> x) {
  const std::size_t n = a.order();
  Vector y(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) y[i] += a(i, j) * x[j];
  return y;
}

// Gram matrix aᵀa.
inline SymMatrix gram(const Matrix& a) {
  SymMatrix g(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i <= j; ++i) g(i, j) = dot(a.col(i), a.col(j));
  return g;
}

// Outer Gram a aᵀ.
inline SymMatrix outer_gram(const Matrix& a) {
  SymMatrix g(a.rows());
  for (std::size_t k = 0; k < a.cols(); ++k) g.add_outer(a.col(k));
  return g;
}

// ---------------------------------------------------------------------------
// Cholesky

namespace detail {

// Shared factorization; pivots must exceed `threshold`.
inline Matrix cholesky_impl(const SymMatrix& a, double threshold) {
  const std::size_t n = a.order();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > threshold))
      throw Error(Errc::NotPositiveDefinite,
                  "pivot " + std::to_string(pivot) + " at column " + std::to_string(j));
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

// Solves L X = B in place (L lower triangular).
inline void forward_solve(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c) {
    auto x = b.col(c);
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
      x[i] = s / l(i, i);
    }
  }
}

// Solves Lᵀ X = B in place.
inline void backward_solve_t(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c) {
    auto x = b.col(c);
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
      x[ii] = s / l(ii, ii);
    }
  }
}

// Solves A x = b for SPD A given by its Cholesky factor.
inline Vector cholesky_solve(const Matrix& l, std::span<const double> b) {
  Matrix x(b.size(), 1);
  std::copy(b.begin(), b.end(), x.col(0).begin());
  forward_solve(l, x);
  backward_solve_t(l, x);
  return x.col_vector(0);
}

// Unit Euclidean norm, then flip so the first largest-magnitude entry is >= 0.
inline void normalize_and_fix_sign(std::span<double> v) {
  const double nrm = norm2(v);
  if (nrm > 0.0)
    for (double& x : v) x /= nrm;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (!v.empty() && v[arg] < 0.0)
    for (double& x : v) x = -x;
}

inline void require_finite(const SymMatrix& a, const char* who) {
  if (!a.all_finite()) throw Error(Errc::NonFinite, std::string(who) + ": non-finite entry");
}

}  // namespace detail

/// Lower-triangular L with A = L Lᵀ. Pivots must exceed
/// order * epsilon * max diagonal entry.
inline Matrix cholesky(const SymMatrix& a) {
  detail::require_finite(a, "cholesky");
  const std::size_t n = a.order();
  if (n == 0) return {};
  const double max_diag = a.max_diagonal();
  if (!(max_diag > 0.0)) throw Error(Errc::NotPositiveDefinite, "non-positive diagonal");
  const double threshold =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;
  return detail::cholesky_impl(a, threshold);
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)

/// Eigenpairs of a symmetric matrix, values descending, vectors unit norm
/// with the largest-magnitude component non-negative.
inline EigPair sym_eig(const SymMatrix& s) {
  detail::require_finite(s, "sym_eig");
  const std::size_t n = s.order();
  Matrix a = s.to_dense();
  Matrix v = Matrix::identity(n);

  const double scale = s.frobenius();
  if (n > 1 && scale > 0.0) {
    constexpr int kMaxSweeps = 100;
    const double tol = std::numeric_limits<double>::epsilon() * scale;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      double off = 0.0;
      for (std::size_t q = 1; q < n; ++q)
        for (std::size_t p = 0; p < q; ++p) off += a(p, q) * a(p, q);
      if (std::sqrt(2.0 * off) <= tol) break;

      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          const double app = a(p, p);
          const double aqq = a(q, q);
          // Off-diagonal entry already below the diagonal's resolution.
          if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
              std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
            a(p, q) = 0.0;
            a(q, p) = 0.0;
            continue;
          }
          const double tau = (aqq - app) / (2.0 * apq);
          const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::hypot(1.0, tau));
          const double c = 1.0 / std::hypot(1.0, t);
          const double sn = t * c;

          for (std::size_t k = 0; k < n; ++k) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = c * akp - sn * akq;
            a(k, q) = sn * akp + c * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double apk = a(p, k);
            const double aqk = a(q, k);
            a(p, k) = c * apk - sn * aqk;
            a(q, k) = sn * apk + c * aqk;
          }
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - sn * vkq;
            v(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigPair out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    auto src = v.col(order[k]);
    std::copy(src.begin(), src.end(), out.vectors.col(k).begin());
    detail::normalize_and_fix_sign(out.vectors.col(k));
  }
  return out;
}

/// Largest absolute eigenvalue.
inline double spectral_norm(const SymMatrix& a) {
  if (a.order() == 0) return 0.0;
  const EigPair e = sym_eig(a);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

// ---------------------------------------------------------------------------
// Generalized symmetric-definite eigenproblem A p = λ B p

/// Solves A p = λ B p through the Cholesky whitening L⁻¹ A L⁻ᵀ. The returned
/// vectors are rescaled to unit Euclidean norm (not B-orthonormal).
inline EigPair sym_gevd(const SymMatrix& a, const SymMatrix& b) {
  if (a.order() != b.order())
    throw Error(Errc::DimensionMismatch, "sym_gevd: orders " + std::to_string(a.order()) +
                                             " vs " + std::to_string(b.order()));
  detail::require_finite(a, "sym_gevd");
  const Matrix l = cholesky(b);

  // W = L⁻¹ A, then C = L⁻¹ Wᵀ = L⁻¹ A L⁻ᵀ.
  Matrix w = a.to_dense();
  detail::forward_solve(l, w);
  Matrix c = w.transpose();
  detail::forward_solve(l, c);

  EigPair e = sym_eig(SymMatrix::from_dense(c));
  detail::backward_solve_t(l, e.vectors);
  for (std::size_t k = 0; k < e.vectors.cols(); ++k)
    detail::normalize_and_fix_sign(e.vectors.col(k));
  return e;
}

// ---------------------------------------------------------------------------
// Symmetric matrix exponential

/// V diag(exp(λ)) Vᵀ; throws NonFinite when an exponential overflows.
inline SymMatrix sym_expm(const SymMatrix& a) {
  const EigPair e = sym_eig(a);
  const std::size_t n = a.order();
  SymMatrix r(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(e.values[k]);
    if (!std::isfinite(w))
      throw Error(Errc::NonFinite, "sym_expm: exp(" + std::to_string(e.values[k]) + ") overflows");
    r.add_outer(e.vectors.col(k), w);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Ridge regression

namespace detail {

inline void validate(const RidgeProblem& p) {
  if (p.rhs.size() != p.design.rows())
    throw Error(Errc::DimensionMismatch, "ridge: rhs length " + std::to_string(p.rhs.size()) +
                                             " vs design rows " + std::to_string(p.design.rows()));
  if (!(p.rho > 0.0) || !std::isfinite(p.rho))
    throw Error(Errc::ConfigError, "ridge: rho must be positive and finite");
  if (!p.design.all_finite() ||
      !std::all_of(p.rhs.begin(), p.rhs.end(), [](double v) { return std::isfinite(v); }))
    throw Error(Errc::NonFinite, "ridge: non-finite input");
}

// The regularized systems are SPD by construction (rho > 0), so only a
// strictly positive pivot is required.
inline Matrix ridge_factor(SymMatrix m) { return cholesky_impl(m, 0.0); }

}  // namespace detail

/// (DᵀD + ρI)⁻¹ Dᵀ b, a cols×cols solve.
inline Vector ridge_solve_primal(const RidgeProblem& p) {
  detail::validate(p);
  SymMatrix normal = gram(p.design);
  normal.add_diagonal(p.rho);
  const Matrix l = detail::ridge_factor(std::move(normal));
  return detail::cholesky_solve(l, matvec_t(p.design, p.rhs));
}

/// Dᵀ (DDᵀ + ρI)⁻¹ b, a rows×rows solve (Woodbury form of the primal).
inline Vector ridge_solve_dual(const RidgeProblem& p) {
  detail::validate(p);
  SymMatrix kernel = outer_gram(p.design);
  kernel.add_diagonal(p.rho);
  const Matrix l = detail::ridge_factor(std::move(kernel));
  return matvec_t(p.design, detail::cholesky_solve(l, p.rhs));
}

/// argmin ‖Dw − b‖² + ρ‖w‖², using whichever of the primal/dual systems is
/// smaller.
inline Vector ridge_solve(const RidgeProblem& p) {
  return p.design.cols() <= p.design.rows() ? ridge_solve_primal(p) : ridge_solve_dual(p);
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Vector mean;
  Matrix basis;       // d × q, orthonormal columns
  Vector variances;   // top-q covariance eigenvalues, descending
  bool degenerate = false;  // every sample identical; basis is arbitrary

  Matrix project(const Matrix& x) const {
    Matrix centered = x;
    for (std::size_t j = 0; j < centered.cols(); ++j) {
      auto c = centered.col(j);
      for (std::size_t i = 0; i < c.size(); ++i) c[i] -= mean[i];
    }
    return matmul_tn(basis, centered);
  }
};

/// Top-q principal directions of the columns of x (d × N).
inline PcaModel pca_fit(const Matrix& x, std::size_t q) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  if (n < 2) throw Error(Errc::DimensionMismatch, "pca_fit: need at least 2 samples");
  if (q < 1 || q > std::min(d, n))
    throw Error(Errc::BadDimension, "pca_fit: q=" + std::to_string(q) + " outside [1, " +
                                        std::to_string(std::min(d, n)) + "]");
  if (!x.all_finite()) throw Error(Errc::NonFinite, "pca_fit: non-finite sample");

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto c = x.col(j);
    for (std::size_t i = 0; i < d; ++i) model.mean[i] += c[i];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix centered = x;
  for (std::size_t j = 0; j < n; ++j) {
    auto c = centered.col(j);
    for (std::size_t i = 0; i < d; ++i) c[i] -= model.mean[i];
  }
  const double inv = 1.0 / static_cast<double>(n - 1);

  model.basis = Matrix(d, q);
  model.variances.assign(q, 0.0);

  // With fewer samples than dimensions the N×N Gram matrix carries the same
  // nonzero spectrum; it is usable when the requested directions all have
  // nonzero variance.
  bool done = false;
  if (n < d) {
    const EigPair g = sym_eig(gram(centered));
    const double floor = g.values.empty() ? 0.0
                                          : std::max(g.values.front(), 0.0) * 1e-12 *
                                                static_cast<double>(n);
    if (q <= n && g.values[q - 1] > floor && g.values[q - 1] > 0.0) {
      for (std::size_t k = 0; k < q; ++k) {
        Vector u = matvec(centered, g.vectors.col(k));
        detail::normalize_and_fix_sign(u);
        std::copy(u.begin(), u.end(), model.basis.col(k).begin());
        model.variances[k] = g.values[k] * inv;
      }
      done = true;
    }
  }
  if (!done) {
    SymMatrix cov = outer_gram(centered);
    cov = cov.scaled(inv);
    const EigPair e = sym_eig(cov);
    for (std::size_t k = 0; k < q; ++k) {
      auto src = e.vectors.col(k);
      std::copy(src.begin(), src.end(), model.basis.col(k).begin());
      model.variances[k] = e.values[k];
    }
  }
  model.degenerate = frobenius(centered) == 0.0;
  return model;
}

}  // namespace dra
