#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dadl/errors.hpp"
#include "dadl/numerics.hpp"
#include "dadl/sparse_coding.hpp"

// Dictionary learning: K-SVD for the shared common dictionary, and
// alternating joint-coding / incoherence-penalized atom updates for the
// domain-specific dictionaries.

namespace dadl {

namespace detail {

// Seeded uniform sampling of n distinct data columns, normalized. Near-zero
// columns are skipped; if the data runs out, seeded random unit vectors fill
// the remainder.
inline Matrix init_dictionary(const Matrix& x, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Matrix d(x.rows(), n);
  int have = 0;
  for (Index idx : order) {
    if (have == n) break;
    const double nn = x.col(idx).norm();
    if (nn > 1e-12) d.col(have++) = x.col(idx) / nn;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (have < n) {
    Vector v(x.rows());
    for (Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
    const double nn = v.norm();
    if (nn > 1e-12) d.col(have++) = v / nn;
  }
  return d;
}

// Dominant rank-1 factorization of `e` by alternating minimization (power
// iteration) started at `d_init`; every half-step is a coordinate-wise
// optimum, so ||e - d g^T|| never increases along the way. Returns the unit
// direction and its coefficient row, sign-fixed like dadl::svd.
inline void rank1_fit(const Matrix& e, Vector& d, RowVector& g) {
  g.noalias() = d.transpose() * e;
  for (int it = 0; it < 100; ++it) {
    Vector w = e * g.transpose();
    const double nw = w.norm();
    if (nw < 1e-300) break;
    w /= nw;
    const double step = (w - d).norm();
    d = w;
    g.noalias() = d.transpose() * e;
    if (step < 1e-12) break;
  }
  Index imax = 0;
  d.cwiseAbs().maxCoeff(&imax);
  if (d(imax) < 0.0) {
    d = -d;
    g = -g;
  }
}

// Solve (a2 I + lambda * Dc Dc^T) v = rhs through the cached eigendecomposition
// of Dc Dc^T; only the scalar a2 varies across atom updates.
inline Vector incoherent_solve(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, double a2,
                               double lambda, const Vector& rhs) {
  Vector w = eig.eigenvectors().transpose() * rhs;
  w.array() /= (a2 + lambda * eig.eigenvalues().array().max(0.0));
  return eig.eigenvectors() * w;
}

}  // namespace detail

struct CommonDictResult {
  Dictionary d_common;
  SparseCode z_source;
  SparseCode z_target;
  std::vector<double> objective_trace;  // non-increasing reconstruction objective
};

/// K-SVD over the column concatenation of both domains: the two reconstruction
/// terms share only the common dictionary, so learning on [x_s | x_t] is the
/// same problem. Codes are split back per domain on return.
inline CommonDictResult learn_common(const Matrix& x_s, const Matrix& x_t, int n, int t, int iters,
                                     std::uint64_t seed) {
  ensure_nonempty(x_s, "learn_common source");
  ensure_nonempty(x_t, "learn_common target");
  ensure_finite(x_s, "learn_common source");
  ensure_finite(x_t, "learn_common target");
  if (x_s.rows() != x_t.rows()) throw ContractError("learn_common: domain dimensions differ");
  const Index ns = x_s.cols();
  const Index nt = x_t.cols();
  if (n < 1) throw ParameterError("learn_common: atom count must be >= 1");
  if (n > ns + nt) throw ParameterError("learn_common: atom count exceeds sample count");
  if (t < 1 || t > n) throw ParameterError("learn_common: sparsity out of range");
  if (iters < 1) throw ParameterError("learn_common: iteration count must be >= 1");

  Matrix x(x_s.rows(), ns + nt);
  x << x_s, x_t;
  Matrix d = detail::init_dictionary(x, n, seed);
  Matrix z = Matrix::Zero(n, ns + nt);
  std::vector<double> trace;
  double prev = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < iters; ++iter) {
    // Coding step. Greedy pursuit can occasionally code a column worse than
    // the coefficients carried over from the atom updates; keep the better
    // of the two per column so the objective never increases.
    const Matrix z_new = omp_encode(Dictionary(d), x, t).coeffs();
    if (iter == 0) {
      z = z_new;
    } else {
      const Vector err_new = (x - d * z_new).colwise().squaredNorm().transpose();
      const Vector err_old = (x - d * z).colwise().squaredNorm().transpose();
      for (Index c = 0; c < z.cols(); ++c) {
        if (err_new(c) < err_old(c)) z.col(c) = z_new.col(c);
      }
    }

    Matrix r = x - d * z;
    for (int j = 0; j < n; ++j) {
      std::vector<Index> omega;
      for (Index c = 0; c < z.cols(); ++c) {
        if (z(j, c) != 0.0) omega.push_back(c);
      }
      if (omega.empty()) {
        // Dead atom: re-seed from the data column that is currently worst
        // reconstructed. The coefficient row stays zero, so the objective
        // is untouched.
        Index worst = 0;
        r.colwise().squaredNorm().maxCoeff(&worst);
        const double nn = x.col(worst).norm();
        if (nn > 1e-12) d.col(j) = x.col(worst) / nn;
        continue;
      }
      Matrix e(x.rows(), static_cast<Index>(omega.size()));
      for (std::size_t a = 0; a < omega.size(); ++a) {
        e.col(static_cast<Index>(a)) = r.col(omega[a]) + d.col(j) * z(j, omega[a]);
      }
      Vector atom = d.col(j);
      RowVector row(static_cast<Index>(omega.size()));
      detail::rank1_fit(e, atom, row);
      d.col(j) = atom;
      for (std::size_t a = 0; a < omega.size(); ++a) {
        z(j, omega[a]) = row(static_cast<Index>(a));
        r.col(omega[a]) = e.col(static_cast<Index>(a)) - atom * row(static_cast<Index>(a));
      }
    }

    const double obj = r.squaredNorm();
    trace.push_back(obj);
    if (iter > 0 && prev - obj <= 1e-8 * std::max(prev, 1e-300)) break;
    prev = obj;
  }

  return CommonDictResult{Dictionary(d), SparseCode(z.leftCols(ns), t),
                          SparseCode(z.rightCols(nt), t), std::move(trace)};
}

struct AtomUpdate {
  Vector atom;                // unit norm
  RowVector rescaled_alpha;   // pre-normalization atom norm folded into the row
};

namespace detail {

inline AtomUpdate update_atom_with_eig(const Matrix& j_hat, const RowVector& alpha_row,
                                       const Eigen::SelfAdjointEigenSolver<Matrix>& common_eig,
                                       double lambda) {
  const double a2 = alpha_row.squaredNorm();
  if (a2 == 0.0) {
    if (lambda == 0.0) {
      throw SolverError("update_atom: singular system (zero coefficient row, zero incoherence)");
    }
    throw SolverError("update_atom: zero coefficient row yields a zero atom");
  }
  const Vector rhs = j_hat * alpha_row.transpose();
  Vector atom = lambda == 0.0 ? Vector(rhs / a2) : incoherent_solve(common_eig, a2, lambda, rhs);
  const double nn = atom.norm();
  if (nn < 1e-15) throw SolverError("update_atom: degenerate atom (zero norm)");
  atom /= nn;
  return AtomUpdate{std::move(atom), nn * alpha_row};
}

}  // namespace detail

/// Closed-form incoherence-penalized atom update: minimizes
/// ||j_hat - d * alpha||_F^2 + lambda ||d^T Dc||^2 over the atom, then
/// normalizes and folds the pre-normalization norm into the coefficient row,
/// leaving the product atom * alpha unchanged.
inline AtomUpdate update_atom(const Matrix& j_hat, const RowVector& alpha_row,
                              const Dictionary& d_common, double lambda) {
  if (lambda < 0.0) throw ContractError("update_atom: lambda must be >= 0");
  if (j_hat.rows() != d_common.dim()) throw ContractError("update_atom: residual dim mismatch");
  if (alpha_row.size() != j_hat.cols()) throw ContractError("update_atom: coefficient row length mismatch");
  ensure_finite(j_hat, "update_atom residual");
  if (!alpha_row.allFinite()) throw ContractError("update_atom: non-finite coefficients");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d_common.atoms() * d_common.atoms().transpose());
  if (eig.info() != Eigen::Success) throw SolverError("update_atom: eigendecomposition failed");
  return detail::update_atom_with_eig(j_hat, alpha_row, eig, lambda);
}

struct SpecificDictResult {
  Dictionary d_specific;
  SparseCode z;       // codes against the common dictionary
  SparseCode gamma;   // codes against the learned specific dictionary
  std::vector<double> objective_trace;  // reconstruction + incoherence objective
};

/// Alternates joint sparse coding of `x` against [d_specific | d_common] with
/// atom-by-atom incoherent updates of the specific dictionary. Every step is
/// accepted only if it does not increase the objective, so the trace is
/// non-increasing by construction.
inline SpecificDictResult learn_specific(const Matrix& x, const Dictionary& d_common, int n, int t,
                                         double lambda, int iters, std::uint64_t seed) {
  ensure_nonempty(x, "learn_specific");
  ensure_finite(x, "learn_specific");
  if (x.rows() != d_common.dim()) throw ContractError("learn_specific: data dimension mismatch");
  if (lambda < 0.0) throw ContractError("learn_specific: lambda must be >= 0");
  if (n < 1) throw ParameterError("learn_specific: atom count must be >= 1");
  if (t < 1 || t > n + d_common.size()) throw ParameterError("learn_specific: sparsity out of range");
  if (iters < 1) throw ParameterError("learn_specific: iteration count must be >= 1");

  const Matrix& dc = d_common.atoms();
  const Index ncols = x.cols();
  Matrix d = detail::init_dictionary(x, n, seed);
  Matrix z = Matrix::Zero(dc.cols(), ncols);
  Matrix gamma = Matrix::Zero(n, ncols);

  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  if (lambda > 0.0) {
    eig.compute(dc * dc.transpose());
    if (eig.info() != Eigen::Success) throw SolverError("learn_specific: eigendecomposition failed");
  }

  std::vector<double> trace;
  double prev = std::numeric_limits<double>::infinity();
  Matrix r = x;  // residual under the current codes

  for (int iter = 0; iter < iters; ++iter) {
    const JointCodePair jp = joint_encode(d_common, {Dictionary(d)}, {x}, t);
    const Matrix r_new = x - dc * jp.z.coeffs() - d * jp.gamma.coeffs();
    const Vector err_new = r_new.colwise().squaredNorm().transpose();
    const Vector err_old = r.colwise().squaredNorm().transpose();
    for (Index c = 0; c < ncols; ++c) {
      if (iter == 0 || err_new(c) < err_old(c)) {
        z.col(c) = jp.z.coeffs().col(c);
        gamma.col(c) = jp.gamma.coeffs().col(c);
        r.col(c) = r_new.col(c);
      }
    }

    for (int j = 0; j < n; ++j) {
      std::vector<Index> omega;
      for (Index c = 0; c < ncols; ++c) {
        if (gamma(j, c) != 0.0) omega.push_back(c);
      }
      const double old_inc = lambda > 0.0 ? (d.col(j).transpose() * dc).squaredNorm() : 0.0;
      if (omega.empty()) {
        // Dead atom. Replacement is free on the reconstruction term but moves
        // the incoherence term; only take it when that does not hurt.
        Index worst = 0;
        r.colwise().squaredNorm().maxCoeff(&worst);
        const double nn = x.col(worst).norm();
        if (nn > 1e-12) {
          const Vector cand = x.col(worst) / nn;
          const double cand_inc = lambda > 0.0 ? (cand.transpose() * dc).squaredNorm() : 0.0;
          if (lambda * (cand_inc - old_inc) <= 0.0) d.col(j) = cand;
        }
        continue;
      }
      Matrix j_hat(x.rows(), static_cast<Index>(omega.size()));
      RowVector row(static_cast<Index>(omega.size()));
      for (std::size_t a = 0; a < omega.size(); ++a) {
        j_hat.col(static_cast<Index>(a)) = r.col(omega[a]) + d.col(j) * gamma(j, omega[a]);
        row(static_cast<Index>(a)) = gamma(j, omega[a]);
      }
      AtomUpdate upd = [&] {
        if (lambda == 0.0) {
          const Vector rhs = j_hat * row.transpose();
          const double a2 = row.squaredNorm();
          Vector atom = rhs / a2;
          const double nn = atom.norm();
          if (nn < 1e-15) throw SolverError("learn_specific: degenerate atom update");
          atom /= nn;
          return AtomUpdate{std::move(atom), nn * row};
        }
        return detail::update_atom_with_eig(j_hat, row, eig, lambda);
      }();
      // Accept only if the per-atom objective (after normalize/rescale) does
      // not increase; normalization can inflate the incoherence term.
      const Matrix r_cand = j_hat - upd.atom * upd.rescaled_alpha;
      double f_old = old_inc * lambda;
      double f_new = (upd.atom.transpose() * dc).squaredNorm() * lambda;
      for (std::size_t a = 0; a < omega.size(); ++a) f_old += r.col(omega[a]).squaredNorm();
      f_new += r_cand.squaredNorm();
      if (f_new <= f_old) {
        d.col(j) = upd.atom;
        for (std::size_t a = 0; a < omega.size(); ++a) {
          gamma(j, omega[a]) = upd.rescaled_alpha(static_cast<Index>(a));
          r.col(omega[a]) = r_cand.col(static_cast<Index>(a));
        }
      }
    }

    const double obj = r.squaredNorm() + lambda * (d.transpose() * dc).squaredNorm();
    trace.push_back(obj);
    if (iter > 0 && prev - obj <= 1e-8 * std::max(prev, 1e-300)) break;
    prev = obj;
  }

  return SpecificDictResult{Dictionary(d), SparseCode(z, t), SparseCode(gamma, t),
                            std::move(trace)};
}

}  // namespace dadl
