#pragma once

#include "npn/core.hpp"
#include "npn/transforms.hpp"

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

namespace npn {

struct Identity {};

/// Circular Gaussian smoothing, separable on images. Nonnegative weights
/// that sum to one, so the map is nonexpansive.
struct GaussianSmooth {
  double sigma = 1.0;
};

/// Exact prox of tau * ||T x||_1 for the orthonormal DCT T.
struct TransformSoftThreshold {
  double tau = 0.1;
};

/// Prox of lambda * TV(x) by Chambolle's dual projection, isotropic on images.
struct TVChambolle {
  double lambda = 0.1;
  int inner_iters = 20;
  double tol = 0.0;  // optional early stop on the dual update, 0 disables
};

/// Sliding median over a window (window x window on images), edges replicated.
struct Median {
  Index window = 3;
};

using Denoiser = std::variant<Identity, GaussianSmooth, TransformSoftThreshold, TVChambolle, Median>;

inline std::string denoiser_name(const Denoiser& d) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Identity>) return "identity";
        else if constexpr (std::is_same_v<T, GaussianSmooth>) return "gaussian";
        else if constexpr (std::is_same_v<T, TransformSoftThreshold>) return "dct-soft";
        else if constexpr (std::is_same_v<T, TVChambolle>) return "tv";
        else return "median";
      },
      d);
}

namespace detail {

inline Index wrap_index(Index i, Index n) { return ((i % n) + n) % n; }

inline Vec gaussian_taps(double sigma, Index n) {
  Index radius = static_cast<Index>(std::ceil(3.0 * sigma));
  radius = std::min(radius, (n - 1) / 2);
  Vec g(2 * radius + 1);
  for (Index i = 0; i < g.size(); ++i) {
    const double d = static_cast<double>(i - radius);
    g[i] = std::exp(-0.5 * d * d / (sigma * sigma));
  }
  return g / g.sum();
}

/// Circular filtering of each row (axis 1) or each column (axis 0).
inline Vec filter_axis(const Vec& x, Shape s, const Vec& taps, int axis) {
  const Index h = s.height, w = s.width, radius = (taps.size() - 1) / 2;
  Vec y = Vec::Zero(x.size());
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Index j = 0; j < taps.size(); ++j) {
        const Index off = j - radius;
        acc += taps[j] * (axis == 1 ? x[r * w + wrap_index(c + off, w)] : x[wrap_index(r + off, h) * w + c]);
      }
      y[r * w + c] = acc;
    }
  return y;
}

inline Vec soft_threshold(const Vec& c, double tau) {
  return c.unaryExpr([tau](double v) { return v > tau ? v - tau : (v < -tau ? v + tau : 0.0); });
}

/// Forward-difference gradient with Neumann boundary; gy is zero for 1D.
inline void gradient(const Vec& u, Shape s, Vec& gx, Vec& gy) {
  const Index h = s.height, w = s.width;
  gx = Vec::Zero(u.size());
  gy = Vec::Zero(u.size());
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const Index i = r * w + c;
      if (c + 1 < w) gx[i] = u[i + 1] - u[i];
      if (s.two_d && r + 1 < h) gy[i] = u[i + w] - u[i];
    }
}

/// Negative adjoint of `gradient`.
inline Vec divergence(const Vec& px, const Vec& py, Shape s) {
  const Index h = s.height, w = s.width;
  Vec d = Vec::Zero(px.size());
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const Index i = r * w + c;
      double v = 0.0;
      if (c + 1 < w) v += px[i];
      if (c > 0) v -= px[i - 1];
      if (s.two_d) {
        if (r + 1 < h) v += py[i];
        if (r > 0) v -= py[i - w];
      }
      d[i] = v;
    }
  return d;
}

inline Vec tv_chambolle(const Vec& f, Shape s, const TVChambolle& p) {
  if (p.lambda <= 0.0) return f;
  const double tau = s.two_d ? 0.125 : 0.25;
  Vec px = Vec::Zero(f.size()), py = Vec::Zero(f.size()), gx, gy;
  for (int it = 0; it < p.inner_iters; ++it) {
    gradient(divergence(px, py, s) - f / p.lambda, s, gx, gy);
    const Vec mag = (gx.array().square() + gy.array().square()).sqrt();
    const Vec denom = (1.0 + tau * mag.array()).matrix();
    const Vec nx = ((px + tau * gx).array() / denom.array()).matrix();
    const Vec ny = ((py + tau * gy).array() / denom.array()).matrix();
    const double change = std::max((nx - px).cwiseAbs().maxCoeff(), (ny - py).cwiseAbs().maxCoeff());
    px = nx;
    py = ny;
    if (p.tol > 0.0 && change < p.tol) break;
  }
  return f - p.lambda * divergence(px, py, s);
}

inline Vec median_filter(const Vec& x, Shape s, Index window) {
  if (window < 1 || window % 2 == 0) throw InvalidParameter("median window must be a positive odd number");
  const Index h = s.height, w = s.width, half = window / 2;
  const Index row_half = s.two_d ? half : 0;
  Vec y(x.size());
  std::vector<double> buf;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      buf.clear();
      for (Index dr = -row_half; dr <= row_half; ++dr)
        for (Index dc = -half; dc <= half; ++dc) {
          const Index rr = std::clamp(r + dr, Index{0}, h - 1), cc = std::clamp(c + dc, Index{0}, w - 1);
          buf.push_back(x[rr * w + cc]);
        }
      auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
      std::nth_element(buf.begin(), mid, buf.end());
      y[r * w + c] = *mid;
    }
  return y;
}

}  // namespace detail

inline Vec denoise(const Denoiser& d, const Vec& x, Shape shape) {
  if (x.size() != shape.size()) throw DimensionError("denoise: shape does not match signal length");
  return std::visit(
      [&](const auto& v) -> Vec {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Identity>) {
          return x;
        } else if constexpr (std::is_same_v<T, GaussianSmooth>) {
          if (!(v.sigma > 0.0)) throw InvalidParameter("gaussian denoiser needs sigma > 0");
          Vec y = detail::filter_axis(x, shape, detail::gaussian_taps(v.sigma, shape.width), 1);
          if (shape.two_d) y = detail::filter_axis(y, shape, detail::gaussian_taps(v.sigma, shape.height), 0);
          return y;
        } else if constexpr (std::is_same_v<T, TransformSoftThreshold>) {
          if (v.tau < 0.0) throw InvalidParameter("soft threshold needs tau >= 0");
          const SeparableDct t(shape);
          return t.inverse(detail::soft_threshold(t.forward(x), v.tau));
        } else if constexpr (std::is_same_v<T, TVChambolle>) {
          if (v.lambda < 0.0 || v.inner_iters < 1) throw InvalidParameter("tv denoiser needs lambda >= 0, iters >= 1");
          return detail::tv_chambolle(x, shape, v);
        } else {
          return detail::median_filter(x, shape, v.window);
        }
      },
      d);
}

inline Signal denoise(const Denoiser& d, const Signal& x) { return Signal(denoise(d, x.values, x.shape), x.shape); }

/// Total variation: sum of isotropic forward-difference magnitudes.
inline double total_variation(const Vec& x, Shape s) {
  Vec gx, gy;
  detail::gradient(x, s, gx, gy);
  return (gx.array().square() + gy.array().square()).sqrt().sum();
}

/// delta-hat = max over distinct pairs of ||D(x) - D(z)||^2 / ||x - z||^2 - 1,
/// clipped below at 0. Samples are columns. Coincident pairs are skipped.
inline double estimate_delta(const Denoiser& d, const Mat& samples, Shape shape) {
  if (samples.cols() < 2) throw InvalidParameter("estimate_delta needs at least 2 samples");
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(samples.cols()));
  for (Index j = 0; j < samples.cols(); ++j) out.push_back(denoise(d, Vec(samples.col(j)), shape));
  double worst = 0.0;
  for (Index i = 0; i < samples.cols(); ++i)
    for (Index j = i + 1; j < samples.cols(); ++j) {
      const double den = (samples.col(i) - samples.col(j)).squaredNorm();
      if (den == 0.0) continue;
      worst = std::max(worst, (out[static_cast<std::size_t>(i)] - out[static_cast<std::size_t>(j)]).squaredNorm() / den - 1.0);
    }
  return worst;
}

}  // namespace npn
