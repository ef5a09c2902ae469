#include "dadl/domain_synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"

using dadl::Matrix;
using dadl::ToyImageDataset;
using dadl::Vector;

namespace {

Matrix image_of(const ToyImageDataset& ds, Eigen::Index col) {
  Matrix img(ds.height, ds.width);
  for (int r = 0; r < ds.height; ++r) {
    for (int c = 0; c < ds.width; ++c) img(r, c) = ds.images(r * ds.width + c, col);
  }
  return img;
}

double mean_of(const Matrix& m) { return m.sum() / static_cast<double>(m.size()); }

double variance_of(const Matrix& m) {
  const double mu = mean_of(m);
  return (m.array() - mu).square().sum() / static_cast<double>(m.size());
}

}  // namespace

TEST(ToyDataset, DeterministicUnderSeed) {
  const ToyImageDataset a = dadl::make_toy_dataset(3, 4, 9, 7, 42);
  const ToyImageDataset b = dadl::make_toy_dataset(3, 4, 9, 7, 42);
  EXPECT_TRUE((a.images.array() == b.images.array()).all());
  EXPECT_EQ(a.labels, b.labels);
  const ToyImageDataset c = dadl::make_toy_dataset(3, 4, 9, 7, 43);
  EXPECT_FALSE((a.images.array() == c.images.array()).all());
}

TEST(ToyDataset, PixelsInRangeAndLabeled) {
  const ToyImageDataset ds = dadl::make_toy_dataset(5, 6, 8, 8, 7);
  EXPECT_GE(ds.images.minCoeff(), 0.0);
  EXPECT_LE(ds.images.maxCoeff(), 1.0);
  ASSERT_EQ(ds.labels.size(), 30u);
  EXPECT_EQ(ds.labels.front(), 0);
  EXPECT_EQ(ds.labels.back(), 4);
}

TEST(ToyDataset, SelfNearestNeighborIsPerfect) {
  const ToyImageDataset ds = dadl::make_toy_dataset(2, 50, 16, 16, 3);
  // train == test: every sample's nearest neighbor is itself
  for (Eigen::Index j = 0; j < ds.images.cols(); ++j) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ds.images.cols(); ++i) {
      const double d2 = (ds.images.col(i) - ds.images.col(j)).squaredNorm();
      if (d2 < best_d) {
        best_d = d2;
        best = i;
      }
    }
    EXPECT_EQ(ds.labels[static_cast<std::size_t>(best)], ds.labels[static_cast<std::size_t>(j)]);
  }
}

TEST(ToyDataset, WithinClassTighterThanBetweenClass) {
  const ToyImageDataset ds = dadl::make_toy_dataset(10, 30, 16, 16, 7);
  double within = 0.0, between = 0.0;
  long nw = 0, nb = 0;
  for (Eigen::Index i = 0; i < ds.images.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < ds.images.cols(); ++j) {
      const double d = (ds.images.col(i) - ds.images.col(j)).norm();
      if (ds.labels[static_cast<std::size_t>(i)] == ds.labels[static_cast<std::size_t>(j)]) {
        within += d;
        ++nw;
      } else {
        between += d;
        ++nb;
      }
    }
  }
  EXPECT_LT(within / nw, between / nb);
}

TEST(ToyDataset, ArgumentChecks) {
  EXPECT_THROW(dadl::make_toy_dataset(1, 4, 8, 8, 0), dadl::ContractError);
  EXPECT_THROW(dadl::make_toy_dataset(3, 1, 8, 8, 0), dadl::ContractError);
}

TEST(BlurKernel, GaussianNormalizedAndSized) {
  const dadl::BlurKernel k = dadl::BlurKernel::gaussian(1.0);
  EXPECT_EQ(k.taps.rows(), 7);  // 2*ceil(3*sigma)+1
  EXPECT_NEAR(k.taps.sum(), 1.0, 1e-12);
  EXPECT_GE(k.taps.minCoeff(), 0.0);
}

TEST(BlurKernel, MotionTapsAlongLine) {
  const dadl::BlurKernel k = dadl::BlurKernel::motion(5, 0.0);
  EXPECT_NEAR(k.taps.sum(), 1.0, 1e-12);
  for (int s = -2; s <= 2; ++s) EXPECT_NEAR(k.taps(2, 2 + s), 0.2, 1e-12);

  const dadl::BlurKernel diag = dadl::BlurKernel::motion(5, 135.0);
  EXPECT_NEAR(diag.taps.sum(), 1.0, 1e-12);
  for (int s = -2; s <= 2; ++s) EXPECT_NEAR(diag.taps(2 + s, 2 + s), 0.2, 1e-12);
}

TEST(GaussianBlur, SigmaZeroIsIdentity) {
  const ToyImageDataset ds = dadl::make_toy_dataset(2, 3, 6, 6, 1);
  const ToyImageDataset out = dadl::gaussian_blur_shift(ds, 0.0);
  EXPECT_TRUE((out.images.array() == ds.images.array()).all());
}

TEST(GaussianBlur, ConstantImageUnchanged) {
  ToyImageDataset ds = dadl::make_toy_dataset(2, 2, 5, 5, 1);
  ds.images.setConstant(0.4);
  const ToyImageDataset out = dadl::gaussian_blur_shift(ds, 2.0);
  EXPECT_LT((out.images.array() - 0.4).abs().maxCoeff(), 1e-12);
}

TEST(GaussianBlur, ImpulseMatchesNaiveConvolution) {
  ToyImageDataset ds = dadl::make_toy_dataset(2, 2, 5, 5, 1);
  ds.images.setZero();
  ds.images(2 * 5 + 2, 0) = 1.0;  // impulse at the center of image 0
  const double sigma = 1.0;
  const ToyImageDataset out = dadl::gaussian_blur_shift(ds, sigma);
  const dadl::BlurKernel k = dadl::BlurKernel::gaussian(sigma);

  // center pixel equals the kernel's center tap
  EXPECT_NEAR(out.images(2 * 5 + 2, 0), k.taps(3, 3), 1e-14);

  Matrix impulse = Matrix::Zero(5, 5);
  impulse(2, 2) = 1.0;
  const Matrix ref = oracles::naive_convolve_reflect(impulse, k.taps);
  EXPECT_LT((image_of(out, 0) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(GaussianBlur, SeededImagesMatchNaiveConvolution) {
  const ToyImageDataset ds = dadl::make_toy_dataset(2, 3, 9, 7, 5);
  const double sigma = 1.3;
  const ToyImageDataset out = dadl::gaussian_blur_shift(ds, sigma);
  const dadl::BlurKernel k = dadl::BlurKernel::gaussian(sigma);
  for (Eigen::Index col = 0; col < ds.images.cols(); ++col) {
    const Matrix ref = oracles::naive_convolve_reflect(image_of(ds, col), k.taps);
    EXPECT_LT((image_of(out, col) - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MotionBlur, LengthOneIsIdentity) {
  const ToyImageDataset ds = dadl::make_toy_dataset(2, 3, 6, 6, 2);
  const ToyImageDataset out = dadl::motion_blur_shift(ds, 1, 135.0);
  EXPECT_TRUE((out.images.array() == ds.images.array()).all());
}

TEST(MotionBlur, HorizontalThreeTapOnRamp) {
  // one-row image 1..6; reflect pads with the edge sample
  ToyImageDataset ds;
  ds.height = 1;
  ds.width = 6;
  ds.seed = 0;
  ds.labels = {0, 0};
  ds.images.resize(6, 2);
  for (int c = 0; c < 6; ++c) {
    ds.images(c, 0) = c + 1.0;
    ds.images(c, 1) = 1.0;
  }
  const ToyImageDataset out = dadl::motion_blur_shift(ds, 3, 0.0);
  const double expected[6] = {(1 + 1 + 2) / 3.0, (1 + 2 + 3) / 3.0, (2 + 3 + 4) / 3.0,
                              (3 + 4 + 5) / 3.0, (4 + 5 + 6) / 3.0, (5 + 6 + 6) / 3.0};
  for (int c = 0; c < 6; ++c) EXPECT_NEAR(out.images(c, 0), expected[c], 1e-13);
}

TEST(MotionBlur, ConstantImageUnchangedAnyAngle) {
  ToyImageDataset ds = dadl::make_toy_dataset(2, 2, 7, 7, 1);
  ds.images.setConstant(0.25);
  for (double theta : {0.0, 30.0, 90.0, 135.0}) {
    for (int len : {3, 5, 7}) {
      const ToyImageDataset out = dadl::motion_blur_shift(ds, len, theta);
      EXPECT_LT((out.images.array() - 0.25).abs().maxCoeff(), 1e-12)
          << "theta=" << theta << " len=" << len;
    }
  }
}

TEST(MotionBlur, EvenLengthRejected) {
  const ToyImageDataset ds = dadl::make_toy_dataset(2, 2, 5, 5, 1);
  EXPECT_THROW(dadl::motion_blur_shift(ds, 4, 135.0), dadl::ParameterError);
}

TEST(Blur, MeanPreservedPerImage) {
  const ToyImageDataset ds = dadl::make_toy_dataset(3, 4, 11, 9, 9);
  const ToyImageDataset g = dadl::gaussian_blur_shift(ds, 2.5);
  for (Eigen::Index col = 0; col < ds.images.cols(); ++col) {
    EXPECT_NEAR(g.images.col(col).mean(), ds.images.col(col).mean(), 1e-10);
  }
  for (double theta : {0.0, 30.0, 135.0, 250.0}) {
    const ToyImageDataset m = dadl::motion_blur_shift(ds, 5, theta);
    for (Eigen::Index col = 0; col < ds.images.cols(); ++col) {
      EXPECT_NEAR(m.images.col(col).mean(), ds.images.col(col).mean(), 1e-10)
          << "theta=" << theta;
    }
  }
}

TEST(Blur, StrongerGaussianNeverRaisesVariance) {
  const ToyImageDataset ds = dadl::make_toy_dataset(4, 5, 12, 12, 13);
  const double sigmas[] = {0.5, 1.0, 2.0, 4.0};
  std::vector<double> vars;
  for (double s : sigmas) {
    const ToyImageDataset out = dadl::gaussian_blur_shift(ds, s);
    double v = 0.0;
    for (Eigen::Index col = 0; col < out.images.cols(); ++col) v += variance_of(image_of(out, col));
    vars.push_back(v);
  }
  for (std::size_t i = 1; i < vars.size(); ++i) EXPECT_LE(vars[i], vars[i - 1] + 1e-12);
}

TEST(LinearShift, IdentityAndScaling) {
  auto g = oracles::rng(40);
  const Matrix x = oracles::random_matrix(g, 5, 8);
  const Matrix eye = Matrix::Identity(5, 5);
  EXPECT_TRUE((dadl::linear_shift(x, eye, Vector::Zero(5)).array() == x.array()).all());
  const Matrix doubled = dadl::linear_shift(x, 2.0 * eye, Vector::Zero(5));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    EXPECT_NEAR(doubled.col(c).norm(), 2.0 * x.col(c).norm(), 1e-12);
  }
}

TEST(LinearShift, SeededMatchesNaiveMatvec) {
  auto g = oracles::rng(41);
  const Matrix x = oracles::random_matrix(g, 4, 6);
  const Matrix a = oracles::random_matrix(g, 4, 4);
  const Vector b = oracles::random_matrix(g, 4, 1).col(0);
  const Matrix out = dadl::linear_shift(x, a, b);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      double acc = b(i);
      for (Eigen::Index k = 0; k < 4; ++k) acc += a(i, k) * x(k, c);
      EXPECT_NEAR(out(i, c), acc, 1e-12);
    }
  }
  EXPECT_THROW(dadl::linear_shift(x, Matrix::Identity(3, 3), Vector::Zero(3)),
               dadl::ContractError);
}

TEST(DatasetIo, SaveLoadRoundTrip) {
  namespace fs = std::filesystem;
  const ToyImageDataset ds = dadl::make_toy_dataset(3, 3, 6, 5, 17);
  const fs::path prefix = fs::temp_directory_path() / "dadl_synth_ds";
  dadl::save_dataset(prefix, ds);
  const ToyImageDataset back =
      dadl::load_dataset(prefix.string() + ".mat", prefix.string() + ".labels.csv", 6, 5);
  EXPECT_TRUE((back.images.array() == ds.images.array()).all());
  EXPECT_EQ(back.labels, ds.labels);
}
