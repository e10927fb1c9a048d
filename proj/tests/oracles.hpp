#pragma once
// Independent reference computations used by the tests. Nothing here calls
// into the library's algorithms; only plain Eigen and loops.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline Vec randn(Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(gen);
  return v;
}

inline Mat randn(Index r, Index c, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = d(gen);
  return m;
}

/// Circulant matrix of a 1D circular filter with its anchor at `anchor`:
/// row i has weight w[j] in column (i + j - anchor) mod n.
inline Mat circulant(const std::vector<double>& w, Index anchor, Index n) {
  Mat c = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < static_cast<Index>(w.size()); ++j) c(i, ((i + j - anchor) % n + n) % n) += w[j];
  return c;
}

/// 2D unitary DFT coefficient of a row-major image at frequency (kr, kc).
inline std::complex<double> dft2(const Vec& x, Index h, Index w, Index kr, Index kc) {
  std::complex<double> acc = 0.0;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const double ph = -2.0 * std::numbers::pi * (double(kr * r) / double(h) + double(kc * c) / double(w));
      acc += x[r * w + c] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
  return acc / std::sqrt(double(h * w));
}

/// Orthonormal DCT-II basis vector k of length n.
inline Vec dct_row(Index k, Index n) {
  Vec v(n);
  const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  for (Index j = 0; j < n; ++j) v[j] = s * std::cos(std::numbers::pi * (j + 0.5) * k / n);
  return v;
}

/// Orthogonal projector onto the row space of m, from the SVD.
inline Mat row_projector(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-10 * s[0]) ++r;
  const Mat v = svd.matrixV().leftCols(r);
  return v * v.transpose();
}

inline double sigma_max(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues()[0]; }

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<double> r(n);
    for (size_t i = 0; i < n; ++i) {
      double less = 0, eq = 0;
      for (size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) less += 1;
        else if (v[j] == v[i]) eq += 1;
      }
      r[i] = less + (eq + 1) / 2.0;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
