#pragma once

#include "npn/core.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace npn {

// ---------------------------------------------------------------------------
// Single signals
// ---------------------------------------------------------------------------

/// Exactly k nonzeros at random positions, Gaussian amplitudes scaled to
/// unit peak magnitude.
inline Signal sparse_signal(Index n, Index k, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("sparse signal needs n >= 1");
  if (k < 0 || k > n) throw InvalidParameter("sparse signal needs 0 <= k <= n, got k = " + std::to_string(k));
  Rng rng = make_rng(seed, 201);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  Vec x = Vec::Zero(n);
  std::normal_distribution<double> amp;
  for (Index i = 0; i < k; ++i) {
    double a = 0.0;
    while (std::abs(a) < 0.1) a = amp(rng);
    x[idx[static_cast<std::size_t>(i)]] = a;
  }
  if (k > 0) x /= x.cwiseAbs().maxCoeff();
  return Signal(std::move(x));
}

/// Piecewise-constant signal in [0, 1]. 1D: `segments` runs with random
/// break points. 2D: `segments` overlapping axis-aligned rectangles.
inline Signal piecewise_signal(Shape shape, Index segments, std::uint64_t seed) {
  if (segments < 1) throw InvalidParameter("piecewise signal needs segments >= 1");
  Rng rng = make_rng(seed, 202);
  std::uniform_real_distribution<double> level(0.0, 1.0);
  Vec x = Vec::Zero(shape.size());
  if (!shape.two_d) {
    const Index n = shape.size();
    if (segments > n) throw InvalidParameter("piecewise signal has more segments than samples");
    std::vector<Index> cuts(static_cast<std::size_t>(n - 1));
    std::iota(cuts.begin(), cuts.end(), Index{1});
    std::shuffle(cuts.begin(), cuts.end(), rng);
    cuts.resize(static_cast<std::size_t>(segments - 1));
    cuts.push_back(0);
    cuts.push_back(n);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) x.segment(cuts[s], cuts[s + 1] - cuts[s]).setConstant(level(rng));
  } else {
    std::uniform_int_distribution<Index> row(0, shape.height - 1), col(0, shape.width - 1);
    for (Index s = 0; s < segments; ++s) {
      Index r0 = row(rng), r1 = row(rng), c0 = col(rng), c1 = col(rng);
      if (r0 > r1) std::swap(r0, r1);
      if (c0 > c1) std::swap(c0, c1);
      const double v = level(rng);
      for (Index r = r0; r <= r1; ++r)
        for (Index c = c0; c <= c1; ++c) x[r * shape.width + c] += v;
    }
  }
  const double peak = x.maxCoeff();
  if (peak > 0.0) x /= peak;
  return Signal(std::move(x), shape);
}

struct Ellipse {
  double intensity, a, b, x0, y0, phi_deg;
};

/// Modified Shepp-Logan table (Toft), coordinates in [-1, 1]^2.
inline const std::vector<Ellipse>& shepp_logan_table() {
  static const std::vector<Ellipse> table = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},         {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0}, {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},  {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  return table;
}

/// side x side ellipse-sum image sampled at pixel centres, clipped to [0, 1].
inline Signal shepp_logan(Index side) {
  if (side < 1) throw InvalidParameter("shepp_logan needs side >= 1");
  Vec x = Vec::Zero(side * side);
  const double s = static_cast<double>(side);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) {
      const double px = (2.0 * static_cast<double>(c) + 1.0) / s - 1.0;
      const double py = 1.0 - (2.0 * static_cast<double>(r) + 1.0) / s;
      double v = 0.0;
      for (const Ellipse& e : shepp_logan_table()) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = px - e.x0, dy = py - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      x[r * side + c] = std::clamp(v, 0.0, 1.0);
    }
  return Signal(std::move(x), Shape::image(side, side));
}

/// Sum of `count` isotropic Gaussian bumps, scaled to unit peak.
inline Signal bumps(Index side, Index count, std::uint64_t seed) {
  if (side < 1 || count < 1) throw InvalidParameter("bumps needs side >= 1 and count >= 1");
  Rng rng = make_rng(seed, 203);
  const double s = static_cast<double>(side);
  std::uniform_real_distribution<double> pos(0.0, s - 1.0), width(0.08 * s, 0.25 * s), amp(0.3, 1.0);
  Vec x = Vec::Zero(side * side);
  for (Index k = 0; k < count; ++k) {
    const double cy = pos(rng), cx = pos(rng), w = width(rng), a = amp(rng);
    for (Index r = 0; r < side; ++r)
      for (Index c = 0; c < side; ++c) {
        const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
        x[r * side + c] += a * std::exp(-0.5 * (dx * dx + dy * dy) / (w * w));
      }
  }
  x /= x.maxCoeff();
  return Signal(std::move(x), Shape::image(side, side));
}

// ---------------------------------------------------------------------------
// Toy manifold in R^3
// ---------------------------------------------------------------------------

/// Orthonormal 3 x 2 basis of the toy plane, span(h1 + s, h2 - s / 2) for a
/// 2 x 3 measurement matrix H and 1 x 3 null-space row s. The plane contains
/// neither the null direction nor the row space, so points on it carry a
/// nonzero, measurement-dependent null-space component.
inline Mat toy_plane(const Mat& h, const Mat& s) {
  if (h.rows() != 2 || h.cols() != 3 || s.rows() != 1 || s.cols() != 3)
    throw DimensionError("toy_plane expects H 2x3 and S 1x3");
  Mat span(3, 2);
  span.col(0) = (h.row(0) + s.row(0)).transpose();
  span.col(1) = (h.row(1) - 0.5 * s.row(0)).transpose();
  Eigen::HouseholderQR<Mat> qr(span);
  return qr.householderQ() * Mat::Identity(3, 2);
}

/// Points uniform in the disk of `radius` on the plane spanned by the columns
/// of `plane` (3 x 2, orthonormal). One point per column.
inline Mat toy3d_disk(Index count, double radius, const Mat& plane, std::uint64_t seed) {
  if (count < 1 || !(radius > 0.0)) throw InvalidParameter("toy3d_disk needs count >= 1 and radius > 0");
  if (plane.rows() != 3 || plane.cols() != 2) throw DimensionError("toy3d_disk plane must be 3x2");
  Rng rng = make_rng(seed, 204);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat pts(3, count);
  for (Index i = 0; i < count; ++i) {
    const double r = radius * std::sqrt(unit(rng));
    const double t = 2.0 * std::numbers::pi * unit(rng);
    pts.col(i) = plane * Vec{{r * std::cos(t), r * std::sin(t)}};
  }
  return pts;
}

/// Grid of plane coordinates over [lo, hi]^2, mapped into R^3.
inline Mat toy3d_grid(Index per_axis, double lo, double hi, const Mat& plane) {
  if (per_axis < 2) throw InvalidParameter("toy3d_grid needs at least 2 points per axis");
  Mat pts(3, per_axis * per_axis);
  for (Index i = 0; i < per_axis; ++i)
    for (Index j = 0; j < per_axis; ++j) {
      const double u = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(per_axis - 1);
      const double v = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(per_axis - 1);
      pts.col(i * per_axis + j) = plane * Vec{{u, v}};
    }
  return pts;
}

// ---------------------------------------------------------------------------
// Spec-driven generation
// ---------------------------------------------------------------------------

enum class PhantomKind { sparse, piecewise, shepp_logan, bumps };

inline PhantomKind parse_phantom(const std::string& s) {
  if (s == "sparse") return PhantomKind::sparse;
  if (s == "piecewise") return PhantomKind::piecewise;
  if (s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "bumps") return PhantomKind::bumps;
  throw InvalidParameter("unknown phantom '" + s + "'");
}

inline std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::sparse: return "sparse";
    case PhantomKind::piecewise: return "piecewise";
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::bumps: return "bumps";
  }
  return "?";
}

struct PhantomSpec {
  PhantomKind kind = PhantomKind::sparse;
  Shape shape = Shape::vector(100);
  Index k = 10;        // sparse nonzeros
  Index segments = 6;  // piecewise runs or rectangles
  Index count = 4;     // bumps
  std::uint64_t seed = 0;
};

/// Shepp-Logan ignores the seed and needs a square image.
inline Signal generate(const PhantomSpec& spec) {
  switch (spec.kind) {
    case PhantomKind::sparse: {
      Signal s = sparse_signal(spec.shape.size(), spec.k, spec.seed);
      return Signal(std::move(s.values), spec.shape);
    }
    case PhantomKind::piecewise: return piecewise_signal(spec.shape, spec.segments, spec.seed);
    case PhantomKind::shepp_logan:
      if (!spec.shape.two_d || spec.shape.height != spec.shape.width)
        throw InvalidParameter("shepp_logan needs a square image");
      return shepp_logan(spec.shape.height);
    case PhantomKind::bumps:
      if (!spec.shape.two_d || spec.shape.height != spec.shape.width)
        throw InvalidParameter("bumps needs a square image");
      return bumps(spec.shape.height, spec.count, spec.seed);
  }
  throw InvalidParameter("unknown phantom");
}

/// `count` signals with seeds seed, seed + 1, ...
inline std::vector<Signal> generate_set(PhantomSpec spec, Index count) {
  std::vector<Signal> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i, ++spec.seed) out.push_back(generate(spec));
  return out;
}

}  // namespace npn
