#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rezero/error.hpp"

namespace rezero {

template <typename Scalar>
struct Svd {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix u;       // m x k, orthonormal columns
  Values sigma;   // k = min(m, n), descending
  Matrix v;       // n x k, orthonormal columns
  int sweeps = 0;
};

inline constexpr int kSvdMaxSweeps = 100;

namespace detail {

// Orthonormal completion of the columns of q flagged in `missing`, using
// standard basis vectors and two passes of Gram-Schmidt.
template <typename Matrix>
void complete_basis(Matrix& q, const std::vector<bool>& missing) {
  using Scalar = typename Matrix::Scalar;
  const Eigen::Index m = q.rows();
  Eigen::Index next = 0;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (!missing[static_cast<std::size_t>(c)]) continue;
    for (; next < m; ++next) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Unit(m, next);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index o = 0; o < q.cols(); ++o) {
          if (o == c || (missing[static_cast<std::size_t>(o)] && o > c)) continue;
          e -= q.col(o).dot(e) * q.col(o);
        }
      }
      const Scalar n = e.norm();
      if (n > Scalar(0.5)) {
        q.col(c) = e / n;
        ++next;
        break;
      }
    }
  }
}

template <typename Matrix>
Svd<typename Matrix::Scalar> jacobi_tall(Matrix a, typename Matrix::Scalar tol, int max_sweeps) {
  using Scalar = typename Matrix::Scalar;
  using std::abs;
  using std::sqrt;
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Matrix v = Matrix::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar negligible = eps * eps * a.squaredNorm();

  int sweep = 0;
  bool converged = n < 2;
  Scalar worst = 0;
  while (!converged && sweep < max_sweeps) {
    ++sweep;
    converged = true;
    worst = 0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Scalar alpha = a.col(i).squaredNorm();
        const Scalar beta = a.col(j).squaredNorm();
        const Scalar gamma = a.col(i).dot(a.col(j));
        const Scalar scale = sqrt(alpha * beta);
        if (scale <= negligible || abs(gamma) <= tol * scale) continue;
        converged = false;
        worst = std::max(worst, abs(gamma) / scale);
        const Scalar zeta = (beta - alpha) / (2 * gamma);
        const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) / (abs(zeta) + sqrt(1 + zeta * zeta));
        const Scalar c = 1 / sqrt(1 + t * t);
        const Scalar s = c * t;
        for (Eigen::Index r = 0; r < m; ++r) {
          const Scalar x = a(r, i), y = a(r, j);
          a(r, i) = c * x - s * y;
          a(r, j) = s * x + c * y;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const Scalar x = v(r, i), y = v(r, j);
          v(r, i) = c * x - s * y;
          v(r, j) = s * x + c * y;
        }
      }
    }
  }
  if (!converged) {
    throw NumericError("jacobi svd did not converge after " + std::to_string(max_sweeps) +
                       " sweeps (" + std::to_string(m) + "x" + std::to_string(n) +
                       ", worst relative off-diagonal " + std::to_string(static_cast<double>(worst)) +
                       ")");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms(n);
  for (Eigen::Index c = 0; c < n; ++c) norms[c] = a.col(c).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });

  Svd<Scalar> out;
  out.sweeps = sweep;
  out.sigma.resize(n);
  out.u.resize(m, n);
  out.v.resize(n, n);
  const Scalar cutoff = (n > 0 ? norms[order[0]] : Scalar(0)) * eps * static_cast<Scalar>(std::max(m, n));
  std::vector<bool> missing(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index c = order[static_cast<std::size_t>(k)];
    out.sigma[k] = norms[c];
    out.v.col(k) = v.col(c);
    if (norms[c] > cutoff && norms[c] > 0) {
      out.u.col(k) = a.col(c) / norms[c];
    } else {
      out.u.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  complete_basis(out.u, missing);
  return out;
}

}  // namespace detail

/// One-sided (Hestenes) Jacobi SVD: J = U diag(sigma) V^T with thin factors.
/// A column pair counts as orthogonal once |a_i . a_j| <= tol * |a_i| |a_j|.
/// Throws NumericError on non-finite input or when max_sweeps is exhausted.
template <typename Derived>
Svd<typename Derived::Scalar> jacobi_svd(const Eigen::MatrixBase<Derived>& j,
                                         typename Derived::Scalar tol = 1e-12,
                                         int max_sweeps = kSvdMaxSweeps) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (j.rows() == 0 || j.cols() == 0) throw ContractError("svd of an empty matrix");
  if (!j.allFinite()) throw NumericError("svd input has non-finite entries");
  if (j.rows() >= j.cols()) return detail::jacobi_tall(Matrix(j), tol, max_sweeps);
  Svd<Scalar> t = detail::jacobi_tall(Matrix(j.transpose()), tol, max_sweeps);
  std::swap(t.u, t.v);
  return t;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> singular_values(
    const Eigen::MatrixBase<Derived>& j) {
  return jacobi_svd(j).sigma;
}

}  // namespace rezero
