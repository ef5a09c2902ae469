#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "dadl/errors.hpp"
#include "dadl/matrix_io.hpp"
#include "dadl/numerics.hpp"

// Deterministic synthetic datasets and domain-shift generators: smooth-bump
// toy image classes, Gaussian and motion blur, and generic affine shifts.
// Images are stored one per column, pixel (row, col) at index row*width+col.

namespace dadl {

struct ToyImageDataset {
  Matrix images;            // (height*width) x count, values in [0, 1]
  std::vector<int> labels;  // class id per column
  int height = 0;
  int width = 0;
  std::uint64_t seed = 0;
};

/// Seeded toy dataset: each class is a smooth template (sum of 3 random 2-D
/// Gaussian bumps) observed under per-sample illumination gain in [0.7, 1.3]
/// and additive noise (sigma 0.05), clipped to [0, 1].
inline ToyImageDataset make_toy_dataset(int classes, int per_class, int h, int w,
                                        std::uint64_t seed) {
  if (classes < 2) throw ContractError("make_toy_dataset: need at least 2 classes");
  if (per_class < 2) throw ContractError("make_toy_dataset: need at least 2 samples per class");
  if (h < 1 || w < 1) throw ContractError("make_toy_dataset: bad image size");
  std::mt19937_64 rng(seed);
  // Narrow bumps keep the class identity in high-frequency structure, which
  // is what the blur shifts actually remove.
  const double smin = 0.04 * std::min(h, w);
  const double smax = 0.11 * std::min(h, w);
  std::uniform_real_distribution<double> ucx(0.0, w - 1.0);
  std::uniform_real_distribution<double> ucy(0.0, h - 1.0);
  std::uniform_real_distribution<double> uwidth(smin, smax);
  std::uniform_real_distribution<double> uamp(0.5, 1.0);
  std::uniform_real_distribution<double> ugain(0.7, 1.3);
  std::normal_distribution<double> noise(0.0, 0.05);

  ToyImageDataset ds;
  ds.height = h;
  ds.width = w;
  ds.seed = seed;
  ds.images.resize(static_cast<Index>(h) * w, static_cast<Index>(classes) * per_class);
  ds.labels.reserve(static_cast<std::size_t>(classes) * per_class);

  Vector tpl(static_cast<Index>(h) * w);
  for (int c = 0; c < classes; ++c) {
    tpl.setZero();
    for (int b = 0; b < 3; ++b) {
      const double cx = ucx(rng);
      const double cy = ucy(rng);
      const double s = uwidth(rng);
      const double a = uamp(rng);
      for (int r = 0; r < h; ++r) {
        for (int cc = 0; cc < w; ++cc) {
          const double dx = cc - cx;
          const double dy = r - cy;
          tpl(static_cast<Index>(r) * w + cc) += a * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
        }
      }
    }
    const double peak = tpl.maxCoeff();
    if (peak > 0.0) tpl /= peak;
    for (int i = 0; i < per_class; ++i) {
      const double gain = ugain(rng);
      const Index col = static_cast<Index>(c) * per_class + i;
      for (Index p = 0; p < tpl.size(); ++p) {
        ds.images(p, col) = std::clamp(gain * tpl(p) + noise(rng), 0.0, 1.0);
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

struct BlurKernel {
  enum class Kind { gaussian, motion };
  Matrix taps;  // weights, sum to 1, all >= 0
  Kind kind;

  static BlurKernel gaussian(double sigma) {
    if (sigma < 0.0) throw ContractError("BlurKernel::gaussian: sigma must be >= 0");
    if (sigma == 0.0) return BlurKernel{Matrix::Ones(1, 1), Kind::gaussian};
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    Matrix taps(2 * r + 1, 2 * r + 1);
    for (int i = -r; i <= r; ++i) {
      for (int j = -r; j <= r; ++j) {
        taps(i + r, j + r) = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      }
    }
    taps /= taps.sum();
    return BlurKernel{std::move(taps), Kind::gaussian};
  }

  static BlurKernel motion(int length, double theta_deg) {
    if (length < 1) throw ParameterError("BlurKernel::motion: length must be >= 1");
    if (length % 2 == 0) throw ParameterError("BlurKernel::motion: length must be odd");
    const int half = (length - 1) / 2;
    Matrix taps = Matrix::Zero(2 * half + 1, 2 * half + 1);
    const double rad = theta_deg * M_PI / 180.0;
    const double uc = std::cos(rad);
    const double ur = -std::sin(rad);  // angle measured with y pointing up
    for (int s = -half; s <= half; ++s) {
      int dr, dc;
      if (std::abs(uc) >= std::abs(ur)) {
        dc = s;
        dr = static_cast<int>(std::lround(s * (ur / uc)));
      } else {
        dr = s;
        dc = static_cast<int>(std::lround(s * (uc / ur)));
      }
      taps(half + dr, half + dc) += 1.0 / length;
    }
    return BlurKernel{std::move(taps), Kind::motion};
  }
};

namespace detail {

// Edge-repeating reflection of an index into [0, n).
inline Index reflect_index(Index i, Index n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Plain 2-D convolution with reflecting borders; kernel dimensions are odd.
inline Matrix convolve_reflect_2d(const Matrix& img, const Matrix& kernel) {
  const Index h = img.rows();
  const Index w = img.cols();
  const Index rr = kernel.rows() / 2;
  const Index rc = kernel.cols() / 2;
  Matrix out(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Index i = 0; i < kernel.rows(); ++i) {
        const Index sr = reflect_index(r + i - rr, h);
        for (Index j = 0; j < kernel.cols(); ++j) {
          acc += kernel(i, j) * img(sr, reflect_index(c + j - rc, w));
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

// Motion blur as a 1-D box filter along digital lines of slope `m` (columns
// are the dominant axis). The lines row = base + lround(col*m) partition the
// grid, and the filter reflects at the ends of each in-image segment, so the
// per-image mean is preserved exactly even for diagonal kernels.
inline Matrix motion_blur_chains(const Matrix& img, double m, int length) {
  const Index h = img.rows();
  const Index w = img.cols();
  const int half = (length - 1) / 2;
  Matrix out(h, w);
  const Index max_off = static_cast<Index>(std::ceil(std::abs(m) * (w - 1))) + 1;
  std::vector<Index> cols;
  std::vector<double> seg;
  for (Index base = -max_off; base < h + max_off; ++base) {
    cols.clear();
    seg.clear();
    for (Index c = 0; c < w; ++c) {
      const Index r = base + static_cast<Index>(std::lround(c * m));
      if (r >= 0 && r < h) {
        cols.push_back(c);
        seg.push_back(img(r, c));
      }
    }
    const Index len = static_cast<Index>(seg.size());
    for (Index p = 0; p < len; ++p) {
      double acc = 0.0;
      for (int s = -half; s <= half; ++s) acc += seg[static_cast<std::size_t>(reflect_index(p + s, len))];
      const Index c = cols[static_cast<std::size_t>(p)];
      out(base + static_cast<Index>(std::lround(c * m)), c) = acc / length;
    }
  }
  return out;
}

inline Matrix image_from_column(const Matrix& data, Index col, int h, int w) {
  Matrix img(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) img(r, c) = data(static_cast<Index>(r) * w + c, col);
  }
  return img;
}

inline void image_to_column(const Matrix& img, Matrix& data, Index col) {
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) data(r * img.cols() + c, col) = img(r, c);
  }
}

}  // namespace detail

/// Convolve every image with a normalized 2-D Gaussian (size 2*ceil(3*sigma)+1
/// per side) under reflecting borders; sigma = 0 is the identity.
inline ToyImageDataset gaussian_blur_shift(const ToyImageDataset& ds, double sigma) {
  if (sigma < 0.0) throw ContractError("gaussian_blur_shift: sigma must be >= 0");
  if (ds.images.rows() != static_cast<Index>(ds.height) * ds.width) {
    throw ContractError("gaussian_blur_shift: image size mismatch");
  }
  if (sigma == 0.0) return ds;
  const BlurKernel kernel = BlurKernel::gaussian(sigma);
  ToyImageDataset out = ds;
  for (Index col = 0; col < ds.images.cols(); ++col) {
    const Matrix img = detail::image_from_column(ds.images, col, ds.height, ds.width);
    detail::image_to_column(detail::convolve_reflect_2d(img, kernel.taps), out.images, col);
  }
  return out;
}

/// Mean filter of `length` taps along the digital line at `theta_deg` through
/// each pixel, reflecting at the borders along the blur path; length = 1 is
/// the identity. Length must be odd.
inline ToyImageDataset motion_blur_shift(const ToyImageDataset& ds, int length, double theta_deg) {
  if (length < 1) throw ParameterError("motion_blur_shift: length must be >= 1");
  if (length % 2 == 0) throw ParameterError("motion_blur_shift: length must be odd");
  if (ds.images.rows() != static_cast<Index>(ds.height) * ds.width) {
    throw ContractError("motion_blur_shift: image size mismatch");
  }
  if (length == 1) return ds;
  const double rad = theta_deg * M_PI / 180.0;
  const double uc = std::cos(rad);
  const double ur = -std::sin(rad);
  const bool col_dominant = std::abs(uc) >= std::abs(ur);
  const double slope = col_dominant ? ur / uc : uc / ur;
  ToyImageDataset out = ds;
  for (Index col = 0; col < ds.images.cols(); ++col) {
    Matrix img = detail::image_from_column(ds.images, col, ds.height, ds.width);
    if (col_dominant) {
      img = detail::motion_blur_chains(img, slope, length);
    } else {
      img = detail::motion_blur_chains(img.transpose(), slope, length).transpose();
    }
    detail::image_to_column(img, out.images, col);
  }
  return out;
}

/// Affine feature-space shift: a*x + b broadcast over columns.
inline Matrix linear_shift(const Matrix& x, const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) throw ContractError("linear_shift: matrix not square");
  if (a.cols() != x.rows()) throw ContractError("linear_shift: dimension mismatch");
  if (b.size() != x.rows()) throw ContractError("linear_shift: offset length mismatch");
  return (a * x).colwise() + b;
}

inline void save_dataset(const std::filesystem::path& prefix, const ToyImageDataset& ds) {
  save_matrix_binary(prefix.string() + ".mat", ds.images);
  save_labels_csv(prefix.string() + ".labels.csv", ds.labels);
}

inline ToyImageDataset load_dataset(const std::filesystem::path& images_file,
                                    const std::filesystem::path& labels_file, int h, int w) {
  ToyImageDataset ds;
  ds.images = load_matrix(images_file);
  ds.labels = load_labels_csv(labels_file);
  ds.height = h;
  ds.width = w;
  if (static_cast<Index>(ds.labels.size()) != ds.images.cols()) {
    throw ConfigError("dataset: label count does not match sample count");
  }
  if (h > 0 && w > 0 && ds.images.rows() != static_cast<Index>(h) * w) {
    throw ConfigError("dataset: image size does not match height*width");
  }
  return ds;
}

}  // namespace dadl
