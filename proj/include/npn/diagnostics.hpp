#pragma once

#include "npn/core.hpp"
#include "npn/denoisers.hpp"
#include "npn/operators.hpp"
#include "npn/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace npn {

// ---------------------------------------------------------------------------
// Restricted isometry constants
// ---------------------------------------------------------------------------

using LinearMap = std::function<Vec(const Vec&)>;

/// max over distinct pairs of | ||M(x - z)||^2 / ||x - z||^2 - 1 |.
/// Pairs are matching columns of `a` and `b`; coincident pairs are skipped.
inline double estimate_ric_pairs(const LinearMap& m, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("estimate_ric: pair matrices differ in shape");
  double worst = 0.0;
  Index used = 0;
  for (Index j = 0; j < a.cols(); ++j) {
    const Vec d = a.col(j) - b.col(j);
    const double den = d.squaredNorm();
    if (den == 0.0) continue;
    ++used;
    worst = std::max(worst, std::abs(m(d).squaredNorm() / den - 1.0));
  }
  if (used == 0) throw InvalidParameter("estimate_ric needs at least one pair of distinct samples");
  return worst;
}

/// All pairs of columns of `cloud`.
inline double estimate_ric(const LinearMap& m, const Mat& cloud) {
  if (cloud.cols() < 2) throw InvalidParameter("estimate_ric needs at least 2 samples");
  const Index n = cloud.cols();
  Mat a(cloud.rows(), n * (n - 1) / 2), b(cloud.rows(), n * (n - 1) / 2);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j, ++k) {
      a.col(k) = cloud.col(i);
      b.col(k) = cloud.col(j);
    }
  return estimate_ric_pairs(m, a, b);
}

inline double estimate_ric(const Mat& m, const Mat& cloud) {
  return estimate_ric([&](const Vec& v) { return Vec(m * v); }, cloud);
}

inline double estimate_ric(const SensingOperator& op, const Mat& cloud) {
  return estimate_ric([&](const Vec& v) { return op.apply(v); }, cloud);
}

/// Each column of `cloud` paired with the same reference point.
inline double estimate_ric_to(const LinearMap& m, const Mat& cloud, const Vec& reference) {
  return estimate_ric_pairs(m, cloud, reference.replicate(1, cloud.cols()));
}

// ---------------------------------------------------------------------------
// Theorem 1 rate
// ---------------------------------------------------------------------------

inline constexpr Index kDenseSpectralLimit = 1500;

/// ||I - alpha (H^T H + S^T S)||_2. Dense eigen-decomposition for moderate n,
/// power iteration otherwise.
inline double contraction_norm(const SensingOperator& op, const Mat* s_eff, double alpha) {
  const Index n = op.cols();
  if (s_eff && s_eff->size() > 0 && s_eff->cols() != n) throw DimensionError("contraction_norm: S column mismatch");
  const bool use_s = s_eff && s_eff->size() > 0;
  if (n <= kDenseSpectralLimit) {
    Mat h = to_dense(op);
    Mat a = Mat::Identity(n, n) - alpha * (h.transpose() * h);
    if (use_s) a -= alpha * (s_eff->transpose() * *s_eff);
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(a, Eigen::EigenvaluesOnly).eigenvalues();
    return ev.cwiseAbs().maxCoeff();
  }
  return power_iteration(
             [&](const Vec& x) {
               Vec out = x - alpha * op.normal(x);
               if (use_s) out -= alpha * (s_eff->transpose() * (*s_eff * x));
               return out;
             },
             n, 5000, 1e-12, false)
      .value;
}

inline double matrix_norm2(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(m).singularValues()[0];
}

struct RhoReport {
  double rho = 0.0;          // (1 + delta)(||I - alpha A|| + (1 + Delta)||S_eff||)
  double rho_squared = 0.0;  // same with squared norms
  double contraction = 0.0;  // ||I - alpha A||
  double s_norm = 0.0;       // ||S_eff||
};

/// S_eff = sqrt(gamma) S; pass an empty matrix (or gamma = 0) to drop the S terms.
inline RhoReport compute_rho(double delta, double alpha, const SensingOperator& op, const Mat& s_eff, double delta_s) {
  RhoReport r;
  r.contraction = contraction_norm(op, &s_eff, alpha);
  r.s_norm = matrix_norm2(s_eff);
  r.rho = (1.0 + delta) * (r.contraction + (1.0 + delta_s) * r.s_norm);
  r.rho_squared = (1.0 + delta) * (r.contraction * r.contraction + (1.0 + delta_s) * r.s_norm * r.s_norm);
  return r;
}

inline Mat effective_s(const Mat& s, double gamma) { return gamma > 0.0 ? Mat(std::sqrt(gamma) * s) : Mat(); }

// ---------------------------------------------------------------------------
// Theorem 2 bound
// ---------------------------------------------------------------------------

struct Theorem2Constants {
  double C1 = 0.0;  // 1/(2 alpha) + (1 + Ds)^2 + K (1 + Dh)(1 + Ds) ||x*||
  double C2 = 0.0;  // (1 + Ds) + 1 / sqrt(2 alpha)
  double C1_squared = 0.0;  // (1/(2 alpha) + K (1 + Dh) ||x*||^2)(1 + Ds)
  double C2_squared = 0.0;  // (1 + Ds)^2 (1 + 1/(2 alpha))
  double residual = 0.0;    // K ||x*|| (1 + Dh)
  double residual_squared = 0.0;  // K ||x*||^2 (1 + Dh)
};

inline Theorem2Constants theorem2_constants(double alpha, double K, double delta_s, double delta_h, double x_norm) {
  if (!(alpha > 0.0)) throw InvalidParameter("theorem 2 constants need alpha > 0");
  Theorem2Constants c;
  const double ds = 1.0 + delta_s, dh = 1.0 + delta_h;
  c.C1 = 1.0 / (2.0 * alpha) + ds * ds + K * dh * ds * x_norm;
  c.C2 = ds + 1.0 / std::sqrt(2.0 * alpha);
  c.C1_squared = (1.0 / (2.0 * alpha) + K * dh * x_norm * x_norm) * ds;
  c.C2_squared = ds * ds * (1.0 + 1.0 / (2.0 * alpha));
  c.residual = K * x_norm * dh;
  c.residual_squared = K * x_norm * x_norm * dh;
  return c;
}

/// Quantities entering the bound for phi(x^(l+1)); l = 0 uses x^0 = 0.
struct Theorem2Point {
  double err_sq = 0.0;   // ||x* - x^l||^2
  double step_sq = 0.0;  // ||x^l - x^(l+1)||^2
  double phi = 0.0;      // ||G(y) - S x^(l+1)||^2
};

inline Theorem2Point theorem2_point(const SolverTrace& trace, std::size_t l) {
  if (l >= trace.rows.size()) throw InvalidParameter("theorem2_point: iteration beyond trace");
  Theorem2Point p;
  p.err_sq = l == 0 ? trace.initial_err_sq : trace.rows[l - 1].err_sq;
  p.step_sq = trace.rows[l].step_sq;
  p.phi = trace.rows[l].phi;
  return p;
}

/// Right-hand side of the unsquared bound: C1 ||x* - x^l|| + K||x*||(1 + Dh) + C2 ||x^l - x^(l+1)||.
/// Compare with sqrt(phi(x^(l+1))).
inline double theorem2_bound(const Theorem2Point& p, const Theorem2Constants& c) {
  return c.C1 * std::sqrt(p.err_sq) + c.residual + c.C2 * std::sqrt(p.step_sq);
}

/// Squared-norm variant: C1' ||x* - x^l||^2 + K||x*||^2(1 + Dh) + C2' ||x^l - x^(l+1)||^2.
/// Compare with phi(x^(l+1)).
inline double theorem2_bound_squared(const Theorem2Point& p, const Theorem2Constants& c) {
  return c.C1_squared * p.err_sq + c.residual_squared + c.C2_squared * p.step_sq;
}

inline double theorem2_bound(const SolverTrace& trace, std::size_t l, double alpha, double K, double delta_s,
                             double delta_h, double x_norm) {
  return theorem2_bound(theorem2_point(trace, l), theorem2_constants(alpha, K, delta_s, delta_h, x_norm));
}

// ---------------------------------------------------------------------------
// Convergence improvement zone
// ---------------------------------------------------------------------------

/// Iterations l with ||N||^2 <= ||S(x^l - x*)||^2 and a nonzero projected error.
inline std::vector<int> detect_ciz(const SolverTrace& trace, double n_norm) {
  std::vector<int> out;
  const double n_sq = n_norm * n_norm;
  for (const TraceRow& r : trace.rows)
    if (std::isfinite(r.proj_err_sq) && r.proj_err_sq > 0.0 && n_sq <= r.proj_err_sq) out.push_back(r.iter);
  return out;
}

/// Membership gated on the RIP upper bound (1 + Ds)||x^l - x*||^2 instead.
inline std::vector<int> detect_ciz_rip(const SolverTrace& trace, double n_norm, double delta_s) {
  std::vector<int> out;
  const double n_sq = n_norm * n_norm;
  for (const TraceRow& r : trace.rows) {
    const double upper = (1.0 + delta_s) * r.err_sq;
    if (std::isfinite(upper) && upper > 0.0 && n_sq <= upper) out.push_back(r.iter);
  }
  return out;
}

inline void mark_ciz(SolverTrace& trace, const std::vector<int>& ciz) {
  for (TraceRow& r : trace.rows) r.in_ciz = std::binary_search(ciz.begin(), ciz.end(), r.iter);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct TheoryReport {
  double delta = 0.0;    // denoiser expansion on the iterate cloud
  double fixed_point_residual = 0.0;  // ||D(x*) - x*|| / ||x*||
  double delta_s = 0.0;  // RIC of S_eff on (x^l, x*) pairs
  double delta_s_unscaled = 0.0;
  double delta_h = 0.0;  // RIC of H on the signal cloud
  double K = 0.0;
  bool K_certified = false;
  double n_norm = 0.0;  // ||G(y) - S x*||
  double x_norm = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  RhoReport rho;
  Theorem2Constants theorem2;
  std::vector<int> ciz;
  std::vector<int> ciz_rip;

  bool theorem2_certified() const { return delta_s_unscaled < 1.0 && delta_h < 1.0 && std::isfinite(K); }

  std::string to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    auto list = [](const std::vector<int>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    os << "delta = " << delta << "\n"
       << "fixed_point_residual = " << fixed_point_residual << "\n"
       << "delta_s = " << delta_s << "\n"
       << "delta_s_unscaled = " << delta_s_unscaled << "\n"
       << "delta_h = " << delta_h << "\n"
       << "K = " << K << "\n"
       << "K_kind = " << (K_certified ? "certified" : "declared") << "\n"
       << "n_norm = " << n_norm << "\n"
       << "x_norm = " << x_norm << "\n"
       << "alpha = " << alpha << "\n"
       << "gamma = " << gamma << "\n"
       << "contraction_norm = " << rho.contraction << "\n"
       << "s_eff_norm = " << rho.s_norm << "\n"
       << "rho = " << rho.rho << "\n"
       << "rho_squared = " << rho.rho_squared << "\n"
       << "C1 = " << theorem2.C1 << "\n"
       << "C2 = " << theorem2.C2 << "\n"
       << "C1_squared = " << theorem2.C1_squared << "\n"
       << "C2_squared = " << theorem2.C2_squared << "\n"
       << "ciz_size = " << ciz.size() << "\n"
       << "ciz = " << list(ciz) << "\n"
       << "ciz_rip_size = " << ciz_rip.size() << "\n"
       << "ciz_rip = " << list(ciz_rip) << "\n";
    return os.str();
  }
};

struct TheoryInputs {
  const SensingOperator* op = nullptr;
  const Mat* S = nullptr;
  const Denoiser* denoiser = nullptr;
  Vec x_true;
  Vec g;               // prior output G(y)
  Mat signal_cloud;    // ground truths (columns) for the RIC of H
  double gamma = 0.0;
  double K = std::numeric_limits<double>::quiet_NaN();  // NaN: declare from ||N||
  bool K_certified = false;
};

/// Iterate cloud of a trace with stored iterates, x^0 = 0 first.
inline Mat iterate_cloud(const SolverTrace& trace) {
  if (trace.iterates.empty()) throw InvalidParameter("iterate_cloud needs a trace with stored iterates");
  const Index n = trace.iterates.front().size();
  Mat cloud(n, static_cast<Index>(trace.iterates.size()) + 1);
  cloud.col(0).setZero();
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) cloud.col(static_cast<Index>(i) + 1) = trace.iterates[i];
  return cloud;
}

/// Measures every theory quantity for an NPN trace that kept its iterates.
/// When K is not supplied it is declared as ||N|| / ((1 + Dh)||x*||), the
/// smallest value satisfying the mismatch assumption at this test point.
inline TheoryReport build_theory_report(const SolverTrace& trace, const TheoryInputs& in) {
  if (!in.op || !in.S || !in.denoiser) throw InvalidParameter("theory report needs operator, S and denoiser");
  TheoryReport r;
  r.alpha = trace.alpha;
  r.gamma = in.gamma;
  r.x_norm = in.x_true.norm();
  r.n_norm = (in.g - *in.S * in.x_true).norm();

  const Mat cloud = iterate_cloud(trace);
  Mat pre_denoise = cloud;
  pre_denoise.conservativeResize(Eigen::NoChange, cloud.cols() + 1);
  pre_denoise.col(cloud.cols()) = in.x_true;
  r.delta = estimate_delta(*in.denoiser, pre_denoise, in.op->input_shape());
  r.fixed_point_residual = (denoise(*in.denoiser, in.x_true, in.op->input_shape()) - in.x_true).norm() /
                           std::max(r.x_norm, std::numeric_limits<double>::min());

  const Mat s_eff = effective_s(*in.S, in.gamma);
  const Mat& s_for_ric = in.gamma > 0.0 ? s_eff : *in.S;
  r.delta_s = estimate_ric_to([&](const Vec& v) { return Vec(s_for_ric * v); }, cloud.rightCols(cloud.cols() - 1),
                              in.x_true);
  r.delta_s_unscaled =
      estimate_ric_to([&](const Vec& v) { return Vec(*in.S * v); }, cloud.rightCols(cloud.cols() - 1), in.x_true);
  Mat signals = in.signal_cloud.size() > 0 ? in.signal_cloud : Mat(in.x_true);
  signals.conservativeResize(Eigen::NoChange, signals.cols() + 1);
  signals.col(signals.cols() - 1).setZero();
  r.delta_h = estimate_ric(*in.op, signals);

  if (std::isnan(in.K)) {
    r.K = r.x_norm > 0.0 ? r.n_norm / ((1.0 + r.delta_h) * r.x_norm) : 0.0;
    r.K_certified = false;
  } else {
    r.K = in.K;
    r.K_certified = in.K_certified;
  }
  r.rho = compute_rho(r.delta, r.alpha, *in.op, s_eff, r.delta_s);
  r.theorem2 = theorem2_constants(r.alpha, r.K, r.delta_s_unscaled, r.delta_h, r.x_norm);
  r.ciz = detect_ciz(trace, r.n_norm);
  r.ciz_rip = detect_ciz_rip(trace, r.n_norm, r.delta_s_unscaled);
  return r;
}

// ---------------------------------------------------------------------------
// Empirical checks
// ---------------------------------------------------------------------------

struct Theorem1Check {
  bool applicable = false;  // rho < 1 and plain (non-momentum) iteration
  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // max ||x^(l+1) - x*|| / ||x^l - x*|| over l in the CIZ
  double mean_ratio_sq = std::numeric_limits<double>::quiet_NaN();  // mean squared ratio over the CIZ
};

/// Per-step ratio of the step leaving each CIZ iterate, compared with rho.
inline Theorem1Check check_theorem1(const SolverTrace& trace, const std::vector<int>& ciz, double rho,
                                    bool plain_iteration, double tol = 1e-9) {
  Theorem1Check c;
  c.applicable = plain_iteration && rho < 1.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (int l : ciz) {
    if (static_cast<std::size_t>(l) >= trace.rows.size()) continue;
    const double ratio_sq = trace.rows[static_cast<std::size_t>(l)].ratio;
    if (!std::isfinite(ratio_sq)) continue;
    const double ratio = std::sqrt(ratio_sq);
    sum += ratio_sq;
    ++count;
    c.max_ratio = std::max(c.max_ratio, ratio);
    ++c.checked;
    if (ratio > rho + tol) ++c.violations;
  }
  if (count > 0) c.mean_ratio_sq = sum / static_cast<double>(count);
  return c;
}

/// Mean squared ratio of the steps leaving the given iterations.
inline double mean_ratio(const SolverTrace& trace, const std::vector<int>& iters) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int l : iters) {
    if (l < 0 || static_cast<std::size_t>(l) >= trace.rows.size()) continue;
    const double v = trace.rows[static_cast<std::size_t>(l)].ratio;
    if (!std::isfinite(v)) continue;
    sum += v;
    ++count;
  }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

struct Theorem2Check {
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::size_t squared_violations = 0;  // squared-norm variant, informational
  double max_excess = -std::numeric_limits<double>::infinity();  // max sqrt(phi) - bound
};

inline Theorem2Check check_theorem2(const SolverTrace& trace, const Theorem2Constants& c, double tol = 1e-9) {
  Theorem2Check out;
  for (std::size_t l = 0; l < trace.rows.size(); ++l) {
    const Theorem2Point p = theorem2_point(trace, l);
    if (!std::isfinite(p.phi) || !std::isfinite(p.err_sq)) continue;
    ++out.checked;
    const double excess = std::sqrt(p.phi) - theorem2_bound(p, c);
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > tol) ++out.violations;
    if (p.phi > theorem2_bound_squared(p, c) + tol) ++out.squared_violations;
  }
  return out;
}

}  // namespace npn
