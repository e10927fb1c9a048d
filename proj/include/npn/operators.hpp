#pragma once

#include "npn/core.hpp"
#include "npn/transforms.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <concepts>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace npn {

inline constexpr Index kDenseCap = 4096;

// ---------------------------------------------------------------------------
// Convolution kernels
// ---------------------------------------------------------------------------

/// Small filter with an anchor. Applied as H[i, i + j - anchor] = h[j]
/// (circularly), so the anchor tap lines up with the output pixel.
struct Kernel {
  Mat weights;  // 1 x k for 1D signals, kh x kw for images
  Index anchor_row = 0;
  Index anchor_col = 0;

  Index rows() const { return weights.rows(); }
  Index cols() const { return weights.cols(); }
  double mass() const { return weights.sum(); }

  static Kernel from_weights(Mat w) {
    Kernel k;
    k.anchor_row = (w.rows() - 1) / 2;
    k.anchor_col = (w.cols() - 1) / 2;
    k.weights = std::move(w);
    return k;
  }

  static Kernel delta([[maybe_unused]] bool two_d) { return from_weights(Mat::Ones(1, 1)); }

  static Kernel gaussian(double sigma, bool two_d, Index radius = -1) {
    if (!(sigma > 0.0)) throw InvalidParameter("gaussian kernel needs sigma > 0");
    if (radius < 0) radius = static_cast<Index>(std::ceil(3.0 * sigma));
    const Index len = 2 * radius + 1;
    Vec g(len);
    for (Index i = 0; i < len; ++i) {
      const double d = static_cast<double>(i - radius);
      g[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    }
    Mat w = two_d ? Mat(g * g.transpose()) : Mat(g.transpose());
    w /= w.sum();
    return from_weights(std::move(w));
  }

  /// Triangle (bilinear interpolation) filter for a decimation factor.
  static Kernel bilinear(Index factor, bool two_d) {
    if (factor < 1) throw InvalidParameter("bilinear kernel needs factor >= 1");
    const Index len = 2 * factor - 1;
    Vec t(len);
    for (Index i = 0; i < len; ++i)
      t[i] = static_cast<double>(factor - std::abs(i - (factor - 1)));
    Mat w = two_d ? Mat(t * t.transpose()) : Mat(t.transpose());
    w /= w.sum();
    return from_weights(std::move(w));
  }

  static Kernel box(Index width, bool two_d) {
    if (width < 1) throw InvalidParameter("box kernel needs width >= 1");
    Mat w = two_d ? Mat::Ones(width, width) : Mat::Ones(1, width);
    w /= w.sum();
    return from_weights(std::move(w));
  }
};

// ---------------------------------------------------------------------------
// Operator variants
// ---------------------------------------------------------------------------

struct DenseRandom {
  Mat matrix;

  Index rows() const { return matrix.rows(); }
  Index cols() const { return matrix.cols(); }
  Shape input_shape() const { return Shape::vector(matrix.cols()); }
  Vec apply(const Vec& x) const { return matrix * x; }
  Vec apply_adjoint(const Vec& u) const { return matrix.transpose() * u; }
};

enum class FrequencyTransform { dft, dct };

/// Rows of an orthonormal frequency transform selected by a mask.
///
/// DFT rows are complex; each kept conjugate class becomes real rows:
/// self-conjugate frequencies (DC, Nyquist) give one unscaled real row, every
/// other class gives sqrt(2) * Re and sqrt(2) * Im rows. Listing both members
/// of a conjugate pair in the mask is the same as listing one.
class MaskedFrequency {
 public:
  enum class Part { real, real_scaled, imag_scaled };
  struct Row {
    Index frequency;
    Part part;
  };

  MaskedFrequency(Shape shape, FrequencyTransform transform, std::vector<Index> mask)
      : shape_(shape), transform_(transform), mask_(std::move(mask)) {
    const Index n = shape_.size();
    if (mask_.empty()) throw InvalidParameter("frequency mask is empty");
    std::set<Index> seen;
    for (Index k : mask_) {
      if (k < 0 || k >= n) throw InvalidParameter("frequency index " + std::to_string(k) + " out of range");
      if (!seen.insert(k).second) throw InvalidParameter("frequency index " + std::to_string(k) + " repeated");
    }
    if (transform_ == FrequencyTransform::dct) {
      dct_ = SeparableDct(shape_);
      for (Index k : seen) rows_.push_back({k, Part::real});
    } else {
      dft_ = SeparableDft(shape_);
      std::set<Index> classes;
      for (Index k : seen) classes.insert(std::min(k, dft_.conjugate_index(k)));
      for (Index k : classes) {
        if (dft_.conjugate_index(k) == k) {
          rows_.push_back({k, Part::real});
        } else {
          rows_.push_back({k, Part::real_scaled});
          rows_.push_back({k, Part::imag_scaled});
        }
      }
    }
  }

  Index rows() const { return static_cast<Index>(rows_.size()); }
  Index cols() const { return shape_.size(); }
  Shape input_shape() const { return shape_; }
  FrequencyTransform transform() const { return transform_; }
  const std::vector<Index>& mask() const { return mask_; }
  const std::vector<Row>& stacked_rows() const { return rows_; }

  /// Frequencies whose conjugate class is not covered by the mask.
  std::vector<Index> complement() const {
    std::set<Index> covered;
    for (const Row& r : rows_) {
      covered.insert(r.frequency);
      if (transform_ == FrequencyTransform::dft) covered.insert(dft_.conjugate_index(r.frequency));
    }
    std::vector<Index> out;
    for (Index k = 0; k < cols(); ++k)
      if (!covered.count(k)) out.push_back(k);
    return out;
  }

  Vec apply(const Vec& x) const {
    Vec y(rows());
    const double s2 = std::numbers::sqrt2;
    if (transform_ == FrequencyTransform::dct) {
      const Vec c = dct_.forward(x);
      for (Index i = 0; i < rows(); ++i) y[i] = c[rows_[i].frequency];
      return y;
    }
    const CVec spectrum = dft_.forward(x);
    for (Index i = 0; i < rows(); ++i) {
      const auto& z = spectrum[rows_[i].frequency];
      switch (rows_[i].part) {
        case Part::real: y[i] = z.real(); break;
        case Part::real_scaled: y[i] = s2 * z.real(); break;
        case Part::imag_scaled: y[i] = s2 * z.imag(); break;
      }
    }
    return y;
  }

  Vec apply_adjoint(const Vec& u) const {
    const double s2 = std::numbers::sqrt2;
    if (transform_ == FrequencyTransform::dct) {
      Vec c = Vec::Zero(cols());
      for (Index i = 0; i < rows(); ++i) c[rows_[i].frequency] += u[i];
      return dct_.inverse(c);
    }
    CVec spectrum = CVec::Zero(cols());
    for (Index i = 0; i < rows(); ++i) {
      auto& z = spectrum[rows_[i].frequency];
      switch (rows_[i].part) {
        case Part::real: z += u[i]; break;
        case Part::real_scaled: z += s2 * u[i]; break;
        case Part::imag_scaled: z += std::complex<double>(0.0, s2 * u[i]); break;
      }
    }
    return dft_.inverse_real(spectrum);
  }

 private:
  Shape shape_;
  FrequencyTransform transform_;
  std::vector<Index> mask_;
  std::vector<Row> rows_;
  SeparableDct dct_;
  SeparableDft dft_;
};

/// Circular convolution with a small kernel; m = n.
class ConvToeplitz {
 public:
  ConvToeplitz(Kernel kernel, Shape shape) : kernel_(std::move(kernel)), shape_(shape) {
    if (kernel_.rows() > shape_.height || kernel_.cols() > shape_.width)
      throw InvalidParameter("kernel " + dims(kernel_.rows(), kernel_.cols()) + " longer than signal " +
                             dims(shape_.height, shape_.width));
    if (!shape_.two_d && kernel_.rows() != 1) throw InvalidParameter("1D signal needs a 1D kernel");
  }

  Index rows() const { return shape_.size(); }
  Index cols() const { return shape_.size(); }
  Shape input_shape() const { return shape_; }
  const Kernel& kernel() const { return kernel_; }

  Vec apply(const Vec& x) const {
    const Index h = shape_.height, w = shape_.width;
    Vec y = Vec::Zero(rows());
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c) {
        double acc = 0.0;
        for (Index a = 0; a < kernel_.rows(); ++a) {
          const Index rr = wrap(r + a - kernel_.anchor_row, h);
          for (Index b = 0; b < kernel_.cols(); ++b)
            acc += kernel_.weights(a, b) * x[rr * w + wrap(c + b - kernel_.anchor_col, w)];
        }
        y[r * w + c] = acc;
      }
    return y;
  }

  Vec apply_adjoint(const Vec& u) const {
    const Index h = shape_.height, w = shape_.width;
    Vec x = Vec::Zero(cols());
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c) {
        const double v = u[r * w + c];
        for (Index a = 0; a < kernel_.rows(); ++a) {
          const Index rr = wrap(r + a - kernel_.anchor_row, h);
          for (Index b = 0; b < kernel_.cols(); ++b)
            x[rr * w + wrap(c + b - kernel_.anchor_col, w)] += kernel_.weights(a, b) * v;
        }
      }
    return x;
  }

 private:
  static Index wrap(Index i, Index n) { return ((i % n) + n) % n; }

  Kernel kernel_;
  Shape shape_;
};

/// Blur followed by keeping every `factor`-th sample along each image axis.
class DecimatedConv {
 public:
  DecimatedConv(Kernel kernel, Index factor, Shape shape) : blur_(std::move(kernel), shape), factor_(factor) {
    if (factor_ < 1) throw InvalidParameter("decimation factor must be >= 1");
    if (shape.width % factor_ != 0 || (shape.two_d && shape.height % factor_ != 0))
      throw InvalidParameter("decimation factor " + std::to_string(factor_) + " does not divide " +
                             dims(shape.height, shape.width));
    out_shape_ = shape.two_d ? Shape::image(shape.height / factor_, shape.width / factor_)
                             : Shape::vector(shape.width / factor_);
  }

  Index rows() const { return out_shape_.size(); }
  Index cols() const { return blur_.cols(); }
  Shape input_shape() const { return blur_.input_shape(); }
  Shape output_shape() const { return out_shape_; }
  Index factor() const { return factor_; }
  const ConvToeplitz& blur() const { return blur_; }

  Vec apply(const Vec& x) const {
    const Vec b = blur_.apply(x);
    const Index w = blur_.input_shape().width;
    Vec y(rows());
    for (Index r = 0; r < out_shape_.height; ++r)
      for (Index c = 0; c < out_shape_.width; ++c)
        y[r * out_shape_.width + c] = b[source_row(r) * w + c * factor_];
    return y;
  }

  Vec apply_adjoint(const Vec& u) const {
    const Index w = blur_.input_shape().width;
    Vec up = Vec::Zero(cols());
    for (Index r = 0; r < out_shape_.height; ++r)
      for (Index c = 0; c < out_shape_.width; ++c)
        up[source_row(r) * w + c * factor_] = u[r * out_shape_.width + c];
    return blur_.apply_adjoint(up);
  }

 private:
  Index source_row(Index r) const { return out_shape_.two_d ? r * factor_ : r; }

  ConvToeplitz blur_;
  Index factor_;
  Shape out_shape_;
};

/// Parallel-beam line integrals of a side x side image at a set of angles
/// (degrees). One detector per pixel column; each ray is sampled at unit
/// steps with bilinear interpolation. Rows are ordered angle-major.
class RadonSubset {
 public:
  RadonSubset(Index side, std::vector<double> angles_deg) : side_(side), angles_(std::move(angles_deg)) {
    if (side_ < 1) throw InvalidParameter("radon image side must be >= 1");
    if (angles_.empty()) throw InvalidParameter("radon angle set is empty");
    std::set<double> uniq(angles_.begin(), angles_.end());
    if (uniq.size() != angles_.size()) throw InvalidParameter("radon angles must be distinct");
    build();
  }

  Index rows() const { return static_cast<Index>(angles_.size()) * side_; }
  Index cols() const { return side_ * side_; }
  Index side() const { return side_; }
  Index detectors() const { return side_; }
  Shape input_shape() const { return Shape::image(side_, side_); }
  const std::vector<double>& angles() const { return angles_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return matrix_; }

  Vec apply(const Vec& x) const { return matrix_ * x; }
  Vec apply_adjoint(const Vec& u) const { return matrix_.transpose() * u; }

 private:
  static double snap(double v) {
    if (std::abs(v) < 1e-12) return 0.0;
    if (std::abs(v - 1.0) < 1e-12) return 1.0;
    if (std::abs(v + 1.0) < 1e-12) return -1.0;
    return v;
  }

  void build() {
    const double center = 0.5 * static_cast<double>(side_ - 1);
    const Index half = static_cast<Index>(std::ceil(static_cast<double>(side_) / std::numbers::sqrt2)) + 1;
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t a = 0; a < angles_.size(); ++a) {
      const double theta = angles_[a] * std::numbers::pi / 180.0;
      const double ct = snap(std::cos(theta)), st = snap(std::sin(theta));
      for (Index k = 0; k < side_; ++k) {
        const Index row = static_cast<Index>(a) * side_ + k;
        const double s = static_cast<double>(k) - center;
        for (Index t = -half; t <= half; ++t) {
          const double tt = static_cast<double>(t);
          const double px = center + s * ct - tt * st;
          const double py = center + s * st + tt * ct;
          const double fx = std::floor(px), fy = std::floor(py);
          const double wx = px - fx, wy = py - fy;
          const Index x0 = static_cast<Index>(fx), y0 = static_cast<Index>(fy);
          add(triplets, row, y0, x0, (1.0 - wy) * (1.0 - wx));
          add(triplets, row, y0, x0 + 1, (1.0 - wy) * wx);
          add(triplets, row, y0 + 1, x0, wy * (1.0 - wx));
          add(triplets, row, y0 + 1, x0 + 1, wy * wx);
        }
      }
    }
    matrix_.resize(rows(), cols());
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
  }

  void add(std::vector<Eigen::Triplet<double>>& out, Index row, Index y, Index x, double w) const {
    if (w == 0.0 || x < 0 || y < 0 || x >= side_ || y >= side_) return;
    out.emplace_back(row, y * side_ + x, w);
  }

  Index side_;
  std::vector<double> angles_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix_;
};

// ---------------------------------------------------------------------------
// SensingOperator
// ---------------------------------------------------------------------------

using OperatorVariant = std::variant<DenseRandom, MaskedFrequency, ConvToeplitz, DecimatedConv, RadonSubset>;

/// Linear forward map H, optionally multiplied by a constant gain.
/// Immutable after construction.
class SensingOperator {
 public:
  template <class V>
    requires std::constructible_from<OperatorVariant, V>
  explicit SensingOperator(V variant, double gain = 1.0, Index source_m = -1)
      : variant_(std::move(variant)), gain_(gain) {
    source_m_ = source_m >= 0 ? source_m : rows();
    if (!std::isfinite(gain_) || gain_ == 0.0) throw InvalidParameter("operator gain must be finite and nonzero");
  }

  Index rows() const {
    return std::visit([](const auto& v) { return v.rows(); }, variant_);
  }
  Index cols() const {
    return std::visit([](const auto& v) { return v.cols(); }, variant_);
  }
  Shape input_shape() const {
    return std::visit([](const auto& v) { return v.input_shape(); }, variant_);
  }
  Index source_m() const { return source_m_; }
  double gain() const { return gain_; }
  const OperatorVariant& variant() const { return variant_; }

  template <class V>
  const V* as() const {
    return std::get_if<V>(&variant_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, DenseRandom>) return "dense-random";
          else if constexpr (std::is_same_v<T, MaskedFrequency>) return "masked-frequency";
          else if constexpr (std::is_same_v<T, ConvToeplitz>) return "conv-toeplitz";
          else if constexpr (std::is_same_v<T, DecimatedConv>) return "decimated-conv";
          else return "radon-subset";
        },
        variant_);
  }

  /// g * Hx
  Vec apply(const Vec& x) const {
    if (x.size() != cols()) throw DimensionError("operator expects length " + std::to_string(cols()) + ", got " +
                                                 std::to_string(x.size()));
    Vec y = std::visit([&](const auto& v) { return v.apply(x); }, variant_);
    if (gain_ != 1.0) y *= gain_;
    return y;
  }

  Vec apply_adjoint(const Vec& u) const {
    if (u.size() != rows()) throw DimensionError("adjoint expects length " + std::to_string(rows()) + ", got " +
                                                 std::to_string(u.size()));
    Vec x = std::visit([&](const auto& v) { return v.apply_adjoint(u); }, variant_);
    if (gain_ != 1.0) x *= gain_;
    return x;
  }

  /// H^T H x
  Vec normal(const Vec& x) const { return apply_adjoint(apply(x)); }

 private:
  OperatorVariant variant_;
  double gain_ = 1.0;
  Index source_m_ = 0;
};

inline Measurement forward(const SensingOperator& op, const Signal& x) {
  if (x.size() != op.cols())
    throw DimensionError("forward: signal length " + std::to_string(x.size()) + " but operator has n = " +
                         std::to_string(op.cols()));
  return {op.apply(x.values), op.source_m()};
}

inline Signal adjoint(const SensingOperator& op, const Measurement& u) {
  if (u.size() != op.rows())
    throw DimensionError("adjoint: measurement length " + std::to_string(u.size()) + " but operator has m_eff = " +
                         std::to_string(op.rows()));
  Vec x = op.apply_adjoint(u.values);
  return {std::move(x), op.input_shape()};
}

/// Dense m_eff x n matrix; column j is H e_j.
inline Mat to_dense(const SensingOperator& op) {
  const Index n = op.cols();
  if (n > kDenseCap) throw InvalidParameter("to_dense: n = " + std::to_string(n) + " exceeds cap " +
                                            std::to_string(kDenseCap));
  if (const auto* d = op.as<DenseRandom>()) return op.gain() * d->matrix;
  if (const auto* r = op.as<RadonSubset>()) return op.gain() * Mat(r->matrix());
  Mat out(op.rows(), n);
  Vec e = Vec::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral norm
// ---------------------------------------------------------------------------

struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest |eigenvalue| of a symmetric linear map by power iteration from a
/// fixed pseudo-random start, so results are reproducible. For PSD maps the
/// Rayleigh quotient is used; otherwise ||A v|| (robust to +/- pairs).
inline SpectralEstimate power_iteration(const std::function<Vec(const Vec&)>& symmetric_apply, Index n, int iters,
                                        double tol, bool psd = true) {
  if (iters < 1) throw InvalidParameter("power iteration needs iters >= 1");
  Rng rng = make_rng(0x5eedULL, 17);
  Vec v = gaussian_vector(n, rng);
  v.normalize();
  SpectralEstimate est;
  double previous = 0.0;
  for (int k = 1; k <= iters; ++k) {
    Vec w = symmetric_apply(v);
    const double norm = w.norm();
    const double value = psd ? std::abs(v.dot(w)) : norm;
    est.iterations = k;
    est.value = value;
    if (norm == 0.0) {
      est.converged = true;
      return est;
    }
    if (k > 1 && std::abs(value - previous) <= tol * std::max(1.0, value)) {
      est.converged = true;
      return est;
    }
    previous = value;
    v = w / norm;
  }
  return est;
}

/// Largest singular value of H via power iteration on H^T H.
inline SpectralEstimate spectral_norm(const SensingOperator& op, int iters = 500, double tol = 1e-12) {
  auto est = power_iteration([&](const Vec& x) { return op.normal(x); }, op.cols(), iters, tol);
  est.value = std::sqrt(est.value);
  return est;
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

enum class MaskKind { radial, cartesian, random, lowpass };

namespace detail {

inline Index flat(Index r, Index c, const Shape& s) {
  return ((r % s.height + s.height) % s.height) * s.width + ((c % s.width + s.width) % s.width);
}

inline void close_conjugates(std::set<Index>& mask, const Shape& shape, FrequencyTransform t) {
  if (t != FrequencyTransform::dft) return;
  std::set<Index> closed = mask;
  for (Index k : mask) {
    const Index r = k / shape.width, c = k % shape.width;
    closed.insert(flat(-r, -c, shape));
  }
  mask.swap(closed);
}

/// Signed (DFT) or non-negative (DCT) frequency coordinate of an index.
inline double freq_coord(Index k, Index n, FrequencyTransform t) {
  if (t == FrequencyTransform::dct) return static_cast<double>(k);
  return static_cast<double>(k < (n + 1) / 2 ? k : k - n);
}

}  // namespace detail

/// Sampling mask keeping about n / acceleration frequencies.
inline std::vector<Index> make_mask(MaskKind kind, Shape shape, FrequencyTransform transform, double acceleration,
                                    std::uint64_t seed) {
  if (!(acceleration >= 1.0)) throw InvalidParameter("acceleration factor must be >= 1");
  const Index n = shape.size();
  const Index target = std::max<Index>(1, static_cast<Index>(std::ceil(static_cast<double>(n) / acceleration)));
  std::set<Index> mask;

  if ((kind == MaskKind::radial || kind == MaskKind::cartesian) && !shape.two_d)
    throw InvalidParameter("radial and cartesian masks need a 2D shape");

  auto radius = [&](Index k) {
    const double fr = detail::freq_coord(k / shape.width, shape.height, transform);
    const double fc = detail::freq_coord(k % shape.width, shape.width, transform);
    return std::hypot(fr, fc);
  };

  switch (kind) {
    case MaskKind::lowpass: {
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return radius(a) < radius(b); });
      for (Index k : order) {
        if (static_cast<Index>(mask.size()) >= target) break;
        mask.insert(k);
        detail::close_conjugates(mask, shape, transform);
      }
      break;
    }
    case MaskKind::random: {
      Rng rng = make_rng(seed, 101);
      mask.insert(0);
      std::uniform_int_distribution<Index> pick(0, n - 1);
      while (static_cast<Index>(mask.size()) < target) {
        mask.insert(pick(rng));
        detail::close_conjugates(mask, shape, transform);
      }
      break;
    }
    case MaskKind::cartesian: {
      // Whole rows of k-space (phase-encode lines); a fully sampled centre band.
      const Index h = shape.height;
      const Index lines = std::max<Index>(1, static_cast<Index>(std::ceil(static_cast<double>(h) / acceleration)));
      const Index center = std::max<Index>(1, static_cast<Index>(std::round(0.08 * static_cast<double>(h))));
      std::set<Index> chosen;
      std::vector<Index> order(static_cast<std::size_t>(h));
      for (Index r = 0; r < h; ++r) order[static_cast<std::size_t>(r)] = r;
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(detail::freq_coord(a, h, transform)) < std::abs(detail::freq_coord(b, h, transform));
      });
      auto add_line = [&](Index r) {
        chosen.insert(r);
        if (transform == FrequencyTransform::dft) chosen.insert((h - r) % h);
      };
      for (Index i = 0; i < std::min(center, h); ++i) add_line(order[static_cast<std::size_t>(i)]);
      Rng rng = make_rng(seed, 102);
      std::uniform_int_distribution<Index> pick(0, h - 1);
      while (static_cast<Index>(chosen.size()) < std::min(lines, h)) add_line(pick(rng));
      for (Index r : chosen)
        for (Index c = 0; c < shape.width; ++c) mask.insert(r * shape.width + c);
      break;
    }
    case MaskKind::radial: {
      const double reach = std::hypot(static_cast<double>(shape.height), static_cast<double>(shape.width));
      for (Index spokes = 1; static_cast<Index>(mask.size()) < target && spokes <= 4 * n; ++spokes) {
        mask.clear();
        const double span = transform == FrequencyTransform::dft ? std::numbers::pi : 0.5 * std::numbers::pi;
        const Index count = transform == FrequencyTransform::dft ? spokes : spokes + 1;
        for (Index j = 0; j < count; ++j) {
          const double theta = span * static_cast<double>(j) /
                               static_cast<double>(transform == FrequencyTransform::dft ? spokes : std::max<Index>(spokes, 1));
          const double lo = transform == FrequencyTransform::dft ? -reach : 0.0;
          for (double t = lo; t <= reach; t += 0.5) {
            const double fr = std::round(t * std::sin(theta));
            const double fc = std::round(t * std::cos(theta));
            if (transform == FrequencyTransform::dct) {
              if (fr < 0 || fc < 0 || fr >= static_cast<double>(shape.height) || fc >= static_cast<double>(shape.width))
                continue;
            } else if (std::abs(fr) > static_cast<double>(shape.height / 2) ||
                       std::abs(fc) > static_cast<double>(shape.width / 2)) {
              continue;
            }
            mask.insert(detail::flat(static_cast<Index>(fr), static_cast<Index>(fc), shape));
          }
        }
        detail::close_conjugates(mask, shape, transform);
      }
      break;
    }
  }
  return {mask.begin(), mask.end()};
}

/// Mask moved by half the grid in each axis (low <-> high frequencies).
inline std::vector<Index> shift_mask(const std::vector<Index>& mask, Shape shape) {
  std::set<Index> out;
  for (Index k : mask) {
    const Index r = k / shape.width, c = k % shape.width;
    out.insert(detail::flat(r + shape.height / 2, c + shape.width / 2, shape));
  }
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

enum class Problem { cs, mri, blur, sr, ct };
enum class CsEntries { binary, gaussian };
enum class RowNormalization { none, unit_rows };
enum class KernelKind { gaussian, bilinear, box, delta };
enum class AngleSelection { limited, sparse };

inline Problem parse_problem(const std::string& s) {
  if (s == "cs") return Problem::cs;
  if (s == "mri") return Problem::mri;
  if (s == "blur") return Problem::blur;
  if (s == "sr") return Problem::sr;
  if (s == "ct") return Problem::ct;
  throw InvalidParameter("unknown problem '" + s + "'");
}

inline std::string to_string(Problem p) {
  switch (p) {
    case Problem::cs: return "cs";
    case Problem::mri: return "mri";
    case Problem::blur: return "blur";
    case Problem::sr: return "sr";
    case Problem::ct: return "ct";
  }
  return "?";
}

/// Union of the per-problem parameters; each problem reads only its own.
struct OperatorParams {
  // cs
  Index n = 100;
  Index m = 0;            // explicit count; 0 means use `ratio`
  double ratio = 0.1;     // m / n
  CsEntries entries = CsEntries::binary;
  RowNormalization normalization = RowNormalization::none;
  // image problems
  Index height = 16;
  Index width = 16;
  bool two_d = true;
  // mri
  FrequencyTransform transform = FrequencyTransform::dft;
  MaskKind mask = MaskKind::radial;
  double acceleration = 4.0;
  std::vector<Index> explicit_mask;
  // blur / sr
  KernelKind kernel = KernelKind::gaussian;
  double sigma = 2.0;
  Index radius = -1;
  Index factor = 4;
  // ct
  Index total_angles = 180;
  Index acquired_angles = 60;
  AngleSelection angle_selection = AngleSelection::limited;
  // all
  double gain = 1.0;

  Shape shape() const { return two_d ? Shape::image(height, width) : Shape::vector(width); }
};

inline Kernel make_kernel(KernelKind kind, const OperatorParams& p) {
  const bool two_d = p.two_d;
  switch (kind) {
    case KernelKind::gaussian: return Kernel::gaussian(p.sigma, two_d, p.radius);
    case KernelKind::bilinear: return Kernel::bilinear(p.factor, two_d);
    case KernelKind::box: return Kernel::box(p.factor, two_d);
    case KernelKind::delta: return Kernel::delta(two_d);
  }
  throw InvalidParameter("unknown kernel");
}

/// All angles of a CT scan and the acquired subset, in degrees.
struct AngleSets {
  std::vector<double> full;
  std::vector<double> acquired;
};

inline AngleSets ct_angles(Index total, Index acquired, AngleSelection selection) {
  if (total < 1 || acquired < 1 || acquired > total)
    throw InvalidParameter("ct needs 1 <= acquired_angles <= total_angles");
  AngleSets s;
  for (Index i = 0; i < total; ++i) s.full.push_back(180.0 * static_cast<double>(i) / static_cast<double>(total));
  if (selection == AngleSelection::limited) {
    s.acquired.assign(s.full.begin(), s.full.begin() + acquired);
  } else {
    for (Index i = 0; i < acquired; ++i)
      s.acquired.push_back(s.full[static_cast<std::size_t>((i * total) / acquired)]);
  }
  return s;
}

inline SensingOperator make_operator(Problem problem, const OperatorParams& p, std::uint64_t seed) {
  switch (problem) {
    case Problem::cs: {
      const Index n = p.n;
      const Index m = p.m > 0 ? p.m : static_cast<Index>(std::llround(p.ratio * static_cast<double>(n)));
      if (n < 1) throw InvalidParameter("cs needs n >= 1");
      if (m < 1 || m > n) throw InvalidParameter("cs needs 1 <= m <= n, got m = " + std::to_string(m));
      Rng rng = make_rng(seed, 1);
      Mat h(m, n);
      if (p.entries == CsEntries::binary) {
        std::bernoulli_distribution coin(0.5);
        for (Index j = 0; j < n; ++j)
          for (Index i = 0; i < m; ++i) h(i, j) = coin(rng) ? 1.0 : 0.0;
      } else {
        h = gaussian_matrix(m, n, rng);
      }
      if (p.normalization == RowNormalization::unit_rows) {
        for (Index i = 0; i < m; ++i) {
          const double norm = h.row(i).norm();
          if (norm > 0.0) h.row(i) /= norm;
        }
      }
      return SensingOperator(DenseRandom{std::move(h)}, p.gain);
    }
    case Problem::mri: {
      const Shape shape = p.shape();
      std::vector<Index> mask = p.explicit_mask.empty() ? make_mask(p.mask, shape, p.transform, p.acceleration, seed)
                                                        : p.explicit_mask;
      const Index source = static_cast<Index>(mask.size());
      return SensingOperator(MaskedFrequency(shape, p.transform, std::move(mask)), p.gain, source);
    }
    case Problem::blur:
      return SensingOperator(ConvToeplitz(make_kernel(p.kernel, p), p.shape()), p.gain);
    case Problem::sr:
      return SensingOperator(DecimatedConv(make_kernel(p.kernel, p), p.factor, p.shape()), p.gain);
    case Problem::ct: {
      if (p.height != p.width || !p.two_d) throw InvalidParameter("ct needs a square image");
      const AngleSets a = ct_angles(p.total_angles, p.acquired_angles, p.angle_selection);
      return SensingOperator(RadonSubset(p.height, a.acquired), p.gain);
    }
  }
  throw InvalidParameter("unknown problem");
}

}  // namespace npn
