#include "dadl/sparse_coding.hpp"

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using dadl::Dictionary;
using dadl::JointCodePair;
using dadl::Matrix;
using dadl::SparseCode;
using dadl::Vector;

namespace {

std::set<int> support_of(const Matrix& codes, Eigen::Index col) {
  std::set<int> s;
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    if (codes(i, col) != 0.0) s.insert(static_cast<int>(i));
  }
  return s;
}

Matrix orthonormal_dictionary(std::mt19937_64& g, Eigen::Index d, Eigen::Index n) {
  const Matrix m = oracles::random_matrix(g, d, n);
  return Eigen::HouseholderQR<Matrix>(m).householderQ() * Matrix::Identity(d, n);
}

}  // namespace

TEST(Types, DictionaryRejectsNonUnitAtoms) {
  Matrix atoms = Matrix::Identity(3, 3);
  atoms(0, 0) = 2.0;
  EXPECT_THROW(Dictionary{atoms}, dadl::ContractError);
  EXPECT_NO_THROW(Dictionary::normalize(atoms));
}

TEST(Types, SparseCodeEnforcesSupportBound) {
  Matrix coeffs(3, 1);
  coeffs << 1.0, 2.0, 3.0;
  EXPECT_THROW(SparseCode(coeffs, 2), dadl::ContractError);
  EXPECT_NO_THROW(SparseCode(coeffs, 3));
}

TEST(OmpEncode, ReproducesSingleAtom) {
  auto g = oracles::rng(10);
  const Dictionary dict(oracles::random_unit_dictionary(g, 6, 9));
  const Matrix x = dict.atoms().col(4);
  for (int t : {1, 3}) {
    const SparseCode code = dadl::omp_encode(dict, x, t);
    EXPECT_EQ(support_of(code.coeffs(), 0), std::set<int>{4});
    EXPECT_NEAR(code.coeffs()(4, 0), 1.0, 1e-12);
  }
}

TEST(OmpEncode, ExactOnOrthogonalExpansion) {
  auto g = oracles::rng(11);
  const Dictionary dict(orthonormal_dictionary(g, 8, 5));
  const Matrix x = 2.0 * dict.atoms().col(1) + 3.0 * dict.atoms().col(2);
  const SparseCode code = dadl::omp_encode(dict, x, 2);
  EXPECT_NEAR(code.coeffs()(1, 0), 2.0, 1e-12);
  EXPECT_NEAR(code.coeffs()(2, 0), 3.0, 1e-12);
  EXPECT_LT((x - dict.atoms() * code.coeffs()).norm(), 1e-12);
}

TEST(OmpEncode, MatchesNaiveOracleSeeded) {
  auto g = oracles::rng(12);
  const Matrix d = oracles::random_unit_dictionary(g, 8, 12);
  const Matrix x = oracles::random_matrix(g, 8, 25);
  const SparseCode code = dadl::omp_encode(Dictionary(d), x, 3);
  const Matrix ref = oracles::naive_omp(d, x, 3);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    EXPECT_EQ(support_of(code.coeffs(), c), support_of(ref, c)) << "column " << c;
  }
  EXPECT_LT((code.coeffs() - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OmpEncode, ResidualOrthogonalToSelectedAtoms) {
  auto g = oracles::rng(13);
  const Matrix d = oracles::random_unit_dictionary(g, 10, 16);
  const Matrix x = oracles::random_matrix(g, 10, 8);
  const SparseCode code = dadl::omp_encode(Dictionary(d), x, 4);
  const Matrix r = x - d * code.coeffs();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (int j : support_of(code.coeffs(), c)) {
      EXPECT_LT(std::abs(d.col(j).dot(r.col(c))), 1e-8);
    }
  }
}

TEST(OmpEncode, ErrorNonIncreasingInBudget) {
  auto g = oracles::rng(14);
  const Matrix d = oracles::random_unit_dictionary(g, 9, 14);
  const Matrix x = oracles::random_matrix(g, 9, 10);
  std::vector<Vector> errs;
  for (int t = 1; t <= 6; ++t) {
    const SparseCode code = dadl::omp_encode(Dictionary(d), x, t);
    errs.push_back((x - d * code.coeffs()).colwise().norm().transpose());
  }
  for (std::size_t t = 1; t < errs.size(); ++t) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      EXPECT_LE(errs[t](c), errs[t - 1](c) + 1e-12);
    }
  }
}

TEST(OmpEncode, ScaleEquivariant) {
  auto g = oracles::rng(15);
  const Matrix d = oracles::random_unit_dictionary(g, 7, 11);
  const Matrix x = oracles::random_matrix(g, 7, 12);
  const double c = 3.7;
  const SparseCode base = dadl::omp_encode(Dictionary(d), x, 3);
  const SparseCode scaled = dadl::omp_encode(Dictionary(d), (c * x).eval(), 3);
  for (Eigen::Index col = 0; col < x.cols(); ++col) {
    EXPECT_EQ(support_of(base.coeffs(), col), support_of(scaled.coeffs(), col));
  }
  EXPECT_LT((scaled.coeffs() - c * base.coeffs()).cwiseAbs().maxCoeff(),
            1e-12 * c * std::max(1.0, base.coeffs().cwiseAbs().maxCoeff()));
}

TEST(OmpEncode, ParameterAndContractErrors) {
  auto g = oracles::rng(16);
  const Dictionary dict(oracles::random_unit_dictionary(g, 5, 4));
  const Matrix x = oracles::random_matrix(g, 5, 2);
  EXPECT_THROW(dadl::omp_encode(dict, x, 5), dadl::ParameterError);
  EXPECT_THROW(dadl::omp_encode(dict, x, 0), dadl::ParameterError);
  EXPECT_THROW(dadl::omp_encode(dict, oracles::random_matrix(g, 4, 2), 2), dadl::ContractError);
}

TEST(JointEncode, SingleBlockEqualsConcatenatedOmp) {
  auto g = oracles::rng(20);
  const Matrix spec = oracles::random_unit_dictionary(g, 8, 6);
  const Matrix common = oracles::random_unit_dictionary(g, 8, 6);
  const Matrix x = oracles::random_matrix(g, 8, 9);
  const JointCodePair jp = dadl::joint_encode(Dictionary(common), {Dictionary(spec)}, {x}, 4);

  Matrix concat(8, 12);
  concat << spec, common;
  const SparseCode flat = dadl::omp_encode(Dictionary(concat), x, 4);
  EXPECT_LT((jp.gamma.coeffs() - flat.coeffs().topRows(6)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((jp.z.coeffs() - flat.coeffs().bottomRows(6)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(JointEncode, DuplicatedBlockInvariance) {
  auto g = oracles::rng(21);
  const Dictionary spec(oracles::random_unit_dictionary(g, 8, 6));
  const Dictionary common(oracles::random_unit_dictionary(g, 8, 6));
  const Matrix x = oracles::random_matrix(g, 8, 7);
  const JointCodePair one = dadl::joint_encode(common, {spec}, {x}, 4);
  const JointCodePair two = dadl::joint_encode(common, {spec, spec}, {x, x}, 4);
  EXPECT_LT((one.z.coeffs() - two.z.coeffs()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((one.gamma.coeffs() - two.gamma.coeffs()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(JointEncode, MatchesOracleOnMaterializedStack) {
  auto g = oracles::rng(22);
  const int m = 3, d = 6, n = 8, t = 3, cols = 16;
  std::vector<Dictionary> specifics;
  std::vector<Matrix> signals;
  const Matrix common = oracles::random_unit_dictionary(g, d, n);
  for (int i = 0; i < m; ++i) {
    specifics.emplace_back(oracles::random_unit_dictionary(g, d, n));
    signals.push_back(oracles::random_matrix(g, d, cols));
  }
  const JointCodePair jp = dadl::joint_encode(Dictionary(common), specifics, signals, t);

  Matrix stack_d(m * d, 2 * n);
  Matrix stack_x(m * d, cols);
  for (int i = 0; i < m; ++i) {
    stack_d.block(i * d, 0, d, n) = specifics[static_cast<std::size_t>(i)].atoms();
    stack_d.block(i * d, n, d, n) = common;
    stack_x.middleRows(i * d, d) = signals[static_cast<std::size_t>(i)];
  }
  ASSERT_EQ(stack_d.rows(), 18);
  ASSERT_EQ(stack_d.cols(), 16);
  const Matrix ref = oracles::naive_omp(stack_d, stack_x, t);
  for (Eigen::Index c = 0; c < cols; ++c) {
    std::set<int> got = support_of(jp.gamma.coeffs(), c);
    for (int i : support_of(jp.z.coeffs(), c)) got.insert(i + n);
    EXPECT_EQ(got, support_of(ref, c)) << "column " << c;
  }
  EXPECT_LT((jp.gamma.coeffs() - ref.topRows(n)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((jp.z.coeffs() - ref.bottomRows(n)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(JointEncode, JointSupportBoundHolds) {
  auto g = oracles::rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const int t = 2 + trial;
    const Dictionary common(oracles::random_unit_dictionary(g, 10, 7));
    std::vector<Dictionary> specs{Dictionary(oracles::random_unit_dictionary(g, 10, 7)),
                                  Dictionary(oracles::random_unit_dictionary(g, 10, 7))};
    std::vector<Matrix> sigs{oracles::random_matrix(g, 10, 12), oracles::random_matrix(g, 10, 12)};
    const JointCodePair jp = dadl::joint_encode(common, specs, sigs, t);
    for (Eigen::Index c = 0; c < 12; ++c) {
      EXPECT_LE(dadl::support_count(jp.z.coeffs(), c) + dadl::support_count(jp.gamma.coeffs(), c),
                t);
    }
  }
}

TEST(JointEncode, ReportsOffendingBlock) {
  auto g = oracles::rng(24);
  const Dictionary common(oracles::random_unit_dictionary(g, 6, 5));
  std::vector<Dictionary> specs{Dictionary(oracles::random_unit_dictionary(g, 6, 5)),
                                Dictionary(oracles::random_unit_dictionary(g, 6, 4))};
  std::vector<Matrix> sigs{oracles::random_matrix(g, 6, 3), oracles::random_matrix(g, 6, 3)};
  try {
    dadl::joint_encode(common, specs, sigs, 2);
    FAIL() << "expected ContractError";
  } catch (const dadl::ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos);
  }
}
