#pragma once

#include "npn/core.hpp"

#include <complex>
#include <numbers>

namespace npn {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorCMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Orthonormal DCT-II matrix, C * C^T = I.
inline Mat dct_matrix(Index n) {
  Mat c(n, n);
  const double pi = std::numbers::pi;
  for (Index k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
    for (Index j = 0; j < n; ++j)
      c(k, j) = scale * std::cos(pi * static_cast<double>((2 * j + 1) * k) / (2.0 * static_cast<double>(n)));
  }
  return c;
}

/// Unitary DFT matrix F(k, j) = exp(-2 pi i k j / n) / sqrt(n).
inline CMat dft_matrix(Index n) {
  CMat f(n, n);
  const double pi = std::numbers::pi;
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index k = 0; k < n; ++k)
    for (Index j = 0; j < n; ++j) {
      // Reduce the product first so large indices keep full phase accuracy.
      const double phase = -2.0 * pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      f(k, j) = std::polar(norm, phase);
    }
  return f;
}

/// Separable orthonormal transform of a row-major image: rows_t * X * cols_t^T.
class SeparableDct {
 public:
  SeparableDct() = default;
  explicit SeparableDct(Shape shape)
      : shape_(shape), rows_(dct_matrix(shape.height)), cols_(dct_matrix(shape.width)) {}

  Vec forward(const Vec& x) const {
    Eigen::Map<const RowMajorMat> img(x.data(), shape_.height, shape_.width);
    RowMajorMat out = rows_ * img * cols_.transpose();
    return Eigen::Map<const Vec>(out.data(), out.size());
  }

  Vec inverse(const Vec& c) const {
    Eigen::Map<const RowMajorMat> coef(c.data(), shape_.height, shape_.width);
    RowMajorMat out = rows_.transpose() * coef * cols_;
    return Eigen::Map<const Vec>(out.data(), out.size());
  }

  const Shape& shape() const { return shape_; }

 private:
  Shape shape_;
  Mat rows_;
  Mat cols_;
};

class SeparableDft {
 public:
  SeparableDft() = default;
  explicit SeparableDft(Shape shape)
      : shape_(shape), rows_(dft_matrix(shape.height)), cols_(dft_matrix(shape.width)) {}

  CVec forward(const Vec& x) const {
    Eigen::Map<const RowMajorMat> img(x.data(), shape_.height, shape_.width);
    RowMajorCMat out = rows_ * img.cast<std::complex<double>>() * cols_.transpose();
    return Eigen::Map<const CVec>(out.data(), out.size());
  }

  /// Real part of F^H applied to a spectrum.
  Vec inverse_real(const CVec& spectrum) const {
    Eigen::Map<const RowMajorCMat> coef(spectrum.data(), shape_.height, shape_.width);
    RowMajorCMat out = rows_.adjoint() * coef * cols_.conjugate();
    Vec real(out.size());
    for (Index i = 0; i < real.size(); ++i) real[i] = out.data()[i].real();
    return real;
  }

  /// Flat index of the frequency whose coefficient is the conjugate of `k`'s
  /// for real input.
  Index conjugate_index(Index k) const {
    const Index r = k / shape_.width;
    const Index c = k % shape_.width;
    const Index rc = (shape_.height - r) % shape_.height;
    const Index cc = (shape_.width - c) % shape_.width;
    return rc * shape_.width + cc;
  }

  const Shape& shape() const { return shape_; }

 private:
  Shape shape_;
  CMat rows_;
  CMat cols_;
};

}  // namespace npn
