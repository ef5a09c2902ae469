#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dadl/errors.hpp"
#include "dadl/numerics.hpp"

// l0-constrained sparse coding: batch orthogonal matching pursuit over a
// precomputed Gram matrix, and the stacked joint coding that forces one
// shared code pair across several (signal, dictionary) blocks.

namespace dadl {

constexpr double kUnitNormTol = 1e-8;
constexpr double kOmpResidualTol = 1e-12;

/// Dense dictionary with unit-l2-norm columns (atoms).
class Dictionary {
public:
  explicit Dictionary(Matrix atoms) : atoms_(std::move(atoms)) {
    ensure_nonempty(atoms_, "Dictionary");
    ensure_finite(atoms_, "Dictionary");
    for (Index j = 0; j < atoms_.cols(); ++j) {
      if (std::abs(atoms_.col(j).norm() - 1.0) > kUnitNormTol) {
        throw ContractError("Dictionary: atom " + std::to_string(j) + " is not unit-norm");
      }
    }
  }

  /// Normalize columns to unit norm, then construct. Near-zero columns are an error.
  static Dictionary normalize(Matrix atoms) {
    ensure_nonempty(atoms, "Dictionary::normalize");
    for (Index j = 0; j < atoms.cols(); ++j) {
      const double n = atoms.col(j).norm();
      if (n < 1e-12) {
        throw ContractError("Dictionary::normalize: atom " + std::to_string(j) + " has zero norm");
      }
      atoms.col(j) /= n;
    }
    return Dictionary(std::move(atoms));
  }

  const Matrix& atoms() const { return atoms_; }
  Index dim() const { return atoms_.rows(); }
  Index size() const { return atoms_.cols(); }

private:
  Matrix atoms_;
};

inline int support_count(const Matrix& coeffs, Index col) {
  int nnz = 0;
  for (Index i = 0; i < coeffs.rows(); ++i) {
    if (coeffs(i, col) != 0.0) ++nnz;
  }
  return nnz;
}

/// Coefficient matrix with a per-column support bound.
class SparseCode {
public:
  SparseCode(Matrix coeffs, int support_bound)
      : coeffs_(std::move(coeffs)), support_bound_(support_bound) {
    if (support_bound_ < 1) throw ContractError("SparseCode: support bound must be >= 1");
    ensure_finite(coeffs_, "SparseCode");
    for (Index c = 0; c < coeffs_.cols(); ++c) {
      if (support_count(coeffs_, c) > support_bound_) {
        throw ContractError("SparseCode: column " + std::to_string(c) + " exceeds support bound");
      }
    }
  }

  const Matrix& coeffs() const { return coeffs_; }
  int support_bound() const { return support_bound_; }

private:
  Matrix coeffs_;
  int support_bound_;
};

/// Shared code pair of a stacked joint coding: `z` against the common
/// dictionary, `gamma` against the domain-specific block, with one l0 budget
/// over the concatenated column [gamma; z].
struct JointCodePair {
  SparseCode z;
  SparseCode gamma;
  int support_bound;

  JointCodePair(SparseCode z_in, SparseCode gamma_in, int t)
      : z(std::move(z_in)), gamma(std::move(gamma_in)), support_bound(t) {
    if (z.coeffs().cols() != gamma.coeffs().cols()) {
      throw ContractError("JointCodePair: column count mismatch");
    }
    for (Index c = 0; c < z.coeffs().cols(); ++c) {
      if (support_count(z.coeffs(), c) + support_count(gamma.coeffs(), c) > t) {
        throw ContractError("JointCodePair: column " + std::to_string(c) +
                            " exceeds joint support bound");
      }
    }
  }
};

namespace detail {

inline Vector solve_support_gram(const Matrix& g, const std::vector<int>& sel, const Vector& c0col) {
  const int k = static_cast<int>(sel.size());
  Matrix gss(k, k);
  Vector rhs(k);
  for (int i = 0; i < k; ++i) {
    rhs(i) = c0col(sel[i]);
    for (int j = 0; j < k; ++j) gss(i, j) = g(sel[i], sel[j]);
  }
  Eigen::LLT<Matrix> llt(gss);
  if (llt.info() != Eigen::Success) {
    // Near-singular support Gram: retry with a tiny diagonal jitter.
    llt.compute(gss + 1e-12 * Matrix::Identity(k, k));
    if (llt.info() != Eigen::Success) throw SolverError("omp: singular support Gram matrix");
  }
  return llt.solve(rhs);
}

// Greedy pursuit over columns given the dictionary Gram `g = At A`, initial
// correlations `c0 = At X` and squared signal norms. Runs `t` selections per
// column or stops early once the residual norm falls below kOmpResidualTol.
// Ties in |correlation| break to the smallest atom index; selected atoms are
// never re-selected.
inline Matrix omp_gram(const Matrix& g, const Matrix& c0, const Vector& xsq, int t) {
  const Index m = g.rows();
  const Index ncols = c0.cols();
  Matrix codes = Matrix::Zero(m, ncols);
  std::vector<int> sel;
  std::vector<char> used(static_cast<std::size_t>(m));
  for (Index c = 0; c < ncols; ++c) {
    sel.clear();
    std::fill(used.begin(), used.end(), 0);
    Vector corr = c0.col(c);
    double rho = xsq(c);
    Vector z;
    for (int it = 0; it < t; ++it) {
      if (std::sqrt(std::max(rho, 0.0)) < kOmpResidualTol) break;
      int best = -1;
      double best_v = -1.0;
      for (Index j = 0; j < m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double v = std::abs(corr(j));
        if (v > best_v) {
          best_v = v;
          best = static_cast<int>(j);
        }
      }
      if (best < 0) break;
      used[static_cast<std::size_t>(best)] = 1;
      sel.push_back(best);
      z = solve_support_gram(g, sel, c0.col(c));
      Vector gz = Vector::Zero(m);
      for (std::size_t a = 0; a < sel.size(); ++a) gz += g.col(sel[a]) * z(static_cast<Index>(a));
      corr = c0.col(c) - gz;
      double z_rhs = 0.0, z_gz = 0.0;
      for (std::size_t a = 0; a < sel.size(); ++a) {
        z_rhs += z(static_cast<Index>(a)) * c0(sel[a], c);
        z_gz += z(static_cast<Index>(a)) * gz(sel[a]);
      }
      rho = xsq(c) - 2.0 * z_rhs + z_gz;
    }
    for (std::size_t a = 0; a < sel.size(); ++a) codes(sel[a], c) = z(static_cast<Index>(a));
  }
  return codes;
}

}  // namespace detail

/// Batch OMP: greedily code every column of `x` against `dict` with at most
/// `t` atoms per column.
inline SparseCode omp_encode(const Dictionary& dict, const Matrix& x, int t) {
  if (t < 1) throw ParameterError("omp_encode: sparsity must be >= 1");
  if (t > dict.size()) throw ParameterError("omp_encode: sparsity exceeds atom count");
  if (x.rows() != dict.dim()) throw ContractError("omp_encode: signal dimension mismatch");
  ensure_finite(x, "omp_encode signals");
  const Matrix& a = dict.atoms();
  const Matrix g = a.transpose() * a;
  const Matrix c0 = a.transpose() * x;
  const Vector xsq = x.colwise().squaredNorm().transpose();
  return SparseCode(detail::omp_gram(g, c0, xsq, t), t);
}

/// Stacked joint coding: block i couples signals[i] with [specifics[i] | common],
/// all blocks share one (z, gamma) pair per column under the joint budget `t`.
/// Equivalent to running OMP on the vertically stacked system.
inline JointCodePair joint_encode(const Dictionary& common,
                                  const std::vector<Dictionary>& specifics,
                                  const std::vector<Matrix>& signals, int t) {
  if (specifics.empty()) throw ContractError("joint_encode: no blocks");
  if (specifics.size() != signals.size()) {
    throw ContractError("joint_encode: specifics/signals count mismatch");
  }
  const Index d = common.dim();
  const Index ns = specifics.front().size();
  const Index nc = common.size();
  const Index ncols = signals.front().cols();
  for (std::size_t i = 0; i < specifics.size(); ++i) {
    if (specifics[i].dim() != d) {
      throw ContractError("joint_encode: block " + std::to_string(i) + " dictionary dim mismatch");
    }
    if (specifics[i].size() != ns) {
      throw ContractError("joint_encode: block " + std::to_string(i) + " atom count mismatch");
    }
    if (signals[i].rows() != d) {
      throw ContractError("joint_encode: block " + std::to_string(i) + " signal dim mismatch");
    }
    if (signals[i].cols() != ncols) {
      throw ContractError("joint_encode: block " + std::to_string(i) + " sample count mismatch");
    }
    ensure_finite(signals[i], "joint_encode signals[" + std::to_string(i) + "]");
  }
  if (t < 1) throw ParameterError("joint_encode: sparsity must be >= 1");
  if (t > ns + nc) throw ParameterError("joint_encode: sparsity exceeds stacked atom count");

  // Gram and correlations of the stacked system, accumulated block-wise:
  // the stacked dictionary never has to be materialized.
  Matrix g = Matrix::Zero(ns + nc, ns + nc);
  Matrix c0 = Matrix::Zero(ns + nc, ncols);
  Vector xsq = Vector::Zero(ncols);
  Matrix block(d, ns + nc);
  for (std::size_t i = 0; i < specifics.size(); ++i) {
    block.leftCols(ns) = specifics[i].atoms();
    block.rightCols(nc) = common.atoms();
    g.noalias() += block.transpose() * block;
    c0.noalias() += block.transpose() * signals[i];
    xsq += signals[i].colwise().squaredNorm().transpose();
  }
  const Matrix codes = detail::omp_gram(g, c0, xsq, t);
  return JointCodePair(SparseCode(codes.bottomRows(nc), t), SparseCode(codes.topRows(ns), t), t);
}

}  // namespace dadl
