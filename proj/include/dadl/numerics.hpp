#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "dadl/errors.hpp"

// Dense linear-algebra layer shared by every other module: thin SVD,
// symmetric-positive-definite solves and PCA, all in 64-bit floating point.

namespace dadl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline void ensure_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw ContractError(what + ": non-finite entries");
}

inline void ensure_nonempty(const Matrix& m, const std::string& what) {
  if (m.rows() < 1 || m.cols() < 1) throw ContractError(what + ": empty matrix");
}

namespace detail {

// Flip singular/eigen vector signs so the largest-magnitude entry of each
// column of `u` is positive; keeps test fixtures stable across runs.
inline void fix_column_signs(Matrix& u, Matrix* paired_rows) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      if (paired_rows) paired_rows->row(j) = -paired_rows->row(j);
    }
  }
}

}  // namespace detail

struct SvdResult {
  Matrix u;   // column-orthonormal left singular vectors
  Vector s;   // singular values, descending, >= 0
  Matrix vt;  // right singular vectors, transposed
};

/// Thin SVD with a deterministic sign convention (largest-magnitude entry of
/// each left singular vector is positive).
inline SvdResult svd(const Matrix& m) {
  ensure_nonempty(m, "svd");
  ensure_finite(m, "svd");
  Eigen::JacobiSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) {
    throw SolverError("svd: did not converge on a " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + " matrix");
  }
  SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
  detail::fix_column_signs(out.u, &out.vt);
  return out;
}

/// Solve a * x = b for symmetric positive-definite `a` via Cholesky.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  ensure_nonempty(a, "solve_spd");
  if (a.rows() != a.cols()) throw ContractError("solve_spd: matrix not square");
  if (b.rows() != a.rows()) throw ContractError("solve_spd: rhs row count mismatch");
  ensure_finite(a, "solve_spd");
  ensure_finite(b, "solve_spd rhs");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ContractError("solve_spd: matrix not symmetric");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SolverError("solve_spd: matrix not positive-definite (Cholesky failed)");
  }
  return llt.solve(b);
}

struct PcaTarget {
  enum class Mode { fixed_dim, variance_fraction };
  Mode mode;
  int dim = 0;
  double fraction = 0.0;

  static PcaTarget fixed(int p) { return {Mode::fixed_dim, p, 0.0}; }
  static PcaTarget variance(double f) { return {Mode::variance_fraction, 0, f}; }
};

struct PcaModel {
  Vector mean;                 // length d
  Matrix basis;                // d x p, orthonormal columns
  Vector explained_variance;   // length p, descending

  Index dim() const { return basis.cols(); }

  /// Center by the fitted mean and project onto the basis.
  Matrix transform(const Matrix& x) const {
    if (x.rows() != mean.size()) throw ContractError("PcaModel::transform: dimension mismatch");
    return basis.transpose() * (x.colwise() - mean);
  }

  Matrix inverse_transform(const Matrix& y) const {
    if (y.rows() != basis.cols()) throw ContractError("PcaModel::inverse_transform: dimension mismatch");
    return (basis * y).colwise() + mean;
  }
};

namespace detail {

// Deterministic orthonormal completion used when the requested dimension
// exceeds the numerical rank of the data.
inline void complete_basis(Matrix& basis, Index have, Index want) {
  const Index d = basis.rows();
  Index next_canonical = 0;
  while (have < want && next_canonical < d) {
    Vector w = Vector::Zero(d);
    w(next_canonical++) = 1.0;
    if (have > 0) w -= basis.leftCols(have) * (basis.leftCols(have).transpose() * w);
    const double nw = w.norm();
    if (nw > 1e-8) {
      basis.col(have++) = w / nw;
    }
  }
}

}  // namespace detail

/// Fit PCA on column-sample data. `target` either fixes the retained dimension
/// or asks for the smallest dimension reaching a cumulative explained-variance
/// fraction.
inline PcaModel pca_fit(const Matrix& x, const PcaTarget& target) {
  ensure_nonempty(x, "pca_fit");
  ensure_finite(x, "pca_fit");
  const Index d = x.rows();
  const Index n = x.cols();
  if (n < 2) throw ContractError("pca_fit: need at least 2 samples");
  if (target.mode == PcaTarget::Mode::fixed_dim &&
      (target.dim < 1 || target.dim > std::min(d, n))) {
    throw ParameterError("pca_fit: fixed dimension out of range");
  }
  if (target.mode == PcaTarget::Mode::variance_fraction &&
      (target.fraction <= 0.0 || target.fraction > 1.0)) {
    throw ParameterError("pca_fit: variance fraction must lie in (0, 1]");
  }

  const Vector mean = x.rowwise().mean();
  const Matrix xc = x.colwise() - mean;
  const Index r = std::min(d, n);

  // Eigendecompose whichever of X Xt / Xt X is smaller; identical spectra.
  Vector var(r);
  Matrix basis(d, r);
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xc * xc.transpose());
    if (eig.info() != Eigen::Success) throw SolverError("pca_fit: eigendecomposition failed");
    for (Index i = 0; i < r; ++i) {
      var(i) = std::max(0.0, eig.eigenvalues()(d - 1 - i)) / double(n - 1);
      basis.col(i) = eig.eigenvectors().col(d - 1 - i);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xc.transpose() * xc);
    if (eig.info() != Eigen::Success) throw SolverError("pca_fit: eigendecomposition failed");
    Index have = 0;
    for (Index i = 0; i < r; ++i) {
      const double ev = std::max(0.0, eig.eigenvalues()(n - 1 - i));
      var(i) = ev / double(n - 1);
      if (ev > 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff())) {
        basis.col(i) = xc * eig.eigenvectors().col(n - 1 - i) / std::sqrt(ev);
        have = i + 1;
      }
    }
    detail::complete_basis(basis, have, r);
  }
  detail::fix_column_signs(basis, nullptr);

  const double total = var.sum();
  Index p;
  if (target.mode == PcaTarget::Mode::fixed_dim) {
    p = target.dim;
  } else {
    if (total <= 0.0) throw ContractError("pca_fit: degenerate data (zero variance)");
    double cum = 0.0;
    p = r;
    for (Index i = 0; i < r; ++i) {
      cum += var(i);
      if (cum >= target.fraction * total) {
        p = i + 1;
        break;
      }
    }
  }
  return PcaModel{mean, basis.leftCols(p), var.head(p)};
}

}  // namespace dadl
