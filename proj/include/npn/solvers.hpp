#pragma once

#include "npn/core.hpp"
#include "npn/denoisers.hpp"
#include "npn/metrics.hpp"
#include "npn/operators.hpp"
#include "npn/transforms.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace npn {

enum class Momentum { none, fista };

struct SolverConfig {
  double alpha = 0.0;  // step size; 0 selects 0.9 / ||H^T H + gamma S^T S||
  double gamma = 0.0;
  double lambda = 0.0;  // RED weight or sparsity threshold
  int L = 100;
  Momentum momentum = Momentum::fista;
  bool adaptive_restart = false;  // function-value restart, sparsity solver only
  double divergence_threshold = 1e12;
  double admm_rho = 1.0;
  int cg_max_iters = 200;
  double cg_tol = 1e-8;
  bool keep_iterates = false;

  void validate() const {
    if (alpha < 0.0 || !std::isfinite(alpha)) throw InvalidParameter("solver: alpha must be >= 0 (0 selects default)");
    if (gamma < 0.0) throw InvalidParameter("solver: gamma must be >= 0");
    if (lambda < 0.0) throw InvalidParameter("solver: lambda must be >= 0");
    if (L < 1) throw InvalidParameter("solver: L must be >= 1");
    if (!(admm_rho > 0.0)) throw InvalidParameter("solver: admm rho must be > 0");
  }
};

/// The NPN term gamma/2 ||S x - g||^2 with g = G(y).
struct NpnTerm {
  const Mat* S = nullptr;
  Vec g;
};

/// Ground-truth side information used only to fill the trace.
struct TraceContext {
  std::optional<Vec> x_true;
  const Mat* S = nullptr;  // projection used for proj_err_sq and phi
  Vec g;                   // prior output used for phi
  double peak = 1.0;
};

struct TraceRow {
  int iter = 0;
  double err_sq = 0.0;       // ||x^l - x*||^2
  double proj_err_sq = 0.0;  // ||S (x^l - x*)||^2
  double phi = 0.0;          // ||G(y) - S x^l||^2
  double data_res_sq = 0.0;  // ||H x^l - y||^2
  double psnr = 0.0;
  double ratio = 0.0;    // err_sq(l) / err_sq(l - 1), x^0 = 0
  bool in_ciz = false;   // filled by detect_ciz
  double step_sq = 0.0;  // ||x^l - x^(l-1)||^2
  double t = 1.0;        // momentum scalar after the update
};

struct SolverTrace {
  std::vector<TraceRow> rows;
  Vec x_hat;
  double initial_err_sq = 0.0;  // ||x^0 - x*||^2 = ||x*||^2
  double alpha = 0.0;
  bool diverged = false;
  int cg_failures = 0;
  std::vector<Vec> iterates;  // x^1 .. x^L when keep_iterates
};

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// H^T (H x - y)
inline Vec grad_fidelity(const SensingOperator& op, const Vec& x, const Vec& y) {
  if (x.size() != op.cols() || y.size() != op.rows()) throw DimensionError("grad_fidelity: dimension mismatch");
  return op.apply_adjoint(op.apply(x) - y);
}

/// S^T (S x - g); gamma is applied by the caller.
inline Vec npn_grad(const Mat& s, const Vec& x, const Vec& g) {
  if (x.size() != s.cols() || g.size() != s.rows()) throw DimensionError("npn_grad: dimension mismatch");
  return s.transpose() * (s * x - g);
}

inline bool npn_active(const NpnTerm* npn, double gamma) { return npn && npn->S && gamma != 0.0; }

inline void check_npn(const SensingOperator& op, const NpnTerm* npn) {
  if (!npn) return;
  if (!npn->S) throw InvalidParameter("NPN term needs a projection matrix");
  if (npn->S->cols() != op.cols() || npn->g.size() != npn->S->rows())
    throw DimensionError("NPN term: S is " + dims(npn->S->rows(), npn->S->cols()) + ", prior output has length " +
                         std::to_string(npn->g.size()) + ", n = " + std::to_string(op.cols()));
}

/// 0.9 / ||H^T H + gamma S^T S|| by power iteration.
inline double default_step(const SensingOperator& op, const NpnTerm* npn, double gamma) {
  const bool use_s = npn_active(npn, gamma);
  const auto est = power_iteration(
      [&](const Vec& x) {
        Vec out = op.normal(x);
        if (use_s) out += gamma * (npn->S->transpose() * (*npn->S * x));
        return out;
      },
      op.cols(), 1000, 1e-10);
  if (!(est.value > 0.0)) throw InvalidParameter("default step: H^T H + gamma S^T S is zero");
  return 0.9 / est.value;
}

namespace detail {

class TraceRecorder {
 public:
  TraceRecorder(const SensingOperator& op, const Vec& y, const TraceContext& ctx, const SolverConfig& cfg,
                SolverTrace& trace)
      : op_(op), y_(y), ctx_(ctx), cfg_(cfg), trace_(trace) {
    if (ctx_.x_true) {
      if (ctx_.x_true->size() != op.cols()) throw DimensionError("trace: ground truth length mismatch");
      previous_err_ = ctx_.x_true->squaredNorm();
      trace_.initial_err_sq = previous_err_;
    }
    if (ctx_.S && ctx_.S->cols() != op.cols()) throw DimensionError("trace: S column count mismatch");
    previous_ = Vec::Zero(op.cols());
  }

  /// Returns false when the iterate diverged.
  bool record(int iter, const Vec& x, double t) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TraceRow row;
    row.iter = iter;
    row.t = t;
    row.step_sq = (x - previous_).squaredNorm();
    row.data_res_sq = (op_.apply(x) - y_).squaredNorm();
    if (ctx_.x_true) {
      const Vec e = x - *ctx_.x_true;
      row.err_sq = e.squaredNorm();
      row.psnr = psnr(x, *ctx_.x_true, ctx_.peak);
      row.ratio = previous_err_ > 0.0 ? row.err_sq / previous_err_ : (row.err_sq == 0.0 ? 0.0 : nan);
      previous_err_ = row.err_sq;
      row.proj_err_sq = ctx_.S ? (*ctx_.S * e).squaredNorm() : nan;
    } else {
      row.err_sq = row.psnr = row.ratio = row.proj_err_sq = nan;
    }
    row.phi = ctx_.S && ctx_.g.size() == ctx_.S->rows() ? (ctx_.g - *ctx_.S * x).squaredNorm() : nan;
    previous_ = x;
    trace_.rows.push_back(row);
    if (cfg_.keep_iterates) trace_.iterates.push_back(x);
    const double norm = x.norm();
    if (!std::isfinite(norm) || norm > cfg_.divergence_threshold) {
      trace_.diverged = true;
      return false;
    }
    return true;
  }

 private:
  const SensingOperator& op_;
  const Vec& y_;
  const TraceContext& ctx_;
  const SolverConfig& cfg_;
  SolverTrace& trace_;
  Vec previous_;
  double previous_err_ = 0.0;
};

inline double next_t(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

enum class FistaKind { pnp, red };

inline SolverTrace fista_family(FistaKind kind, const SensingOperator& op, const Vec& y, const Denoiser& denoiser,
                                const SolverConfig& cfg, const NpnTerm* npn, const TraceContext& ctx) {
  cfg.validate();
  if (y.size() != op.rows()) throw DimensionError("solver: measurement length mismatch");
  check_npn(op, npn);
  const Shape shape = op.input_shape();
  const bool use_npn = npn_active(npn, cfg.gamma);
  SolverTrace trace;
  trace.alpha = cfg.alpha > 0.0 ? cfg.alpha : default_step(op, npn, cfg.gamma);
  const double alpha = trace.alpha;
  TraceRecorder rec(op, y, ctx, cfg, trace);

  Vec x_prev = Vec::Zero(op.cols());
  Vec z = x_prev;
  Vec x = x_prev;
  double t = 1.0;
  for (int l = 1; l <= cfg.L; ++l) {
    Vec grad = grad_fidelity(op, z, y);
    if (use_npn) grad += cfg.gamma * npn_grad(*npn->S, z, npn->g);
    if (kind == FistaKind::pnp) {
      x = denoise(denoiser, Vec(z - alpha * grad), shape);
    } else {
      x = z - alpha * grad;
      if (cfg.lambda != 0.0) x -= cfg.lambda * (z - denoise(denoiser, z, shape));
    }
    const double t_prev = t;
    t = next_t(t);
    if (cfg.momentum == Momentum::fista) z = x + ((t_prev - 1.0) / t) * (x - x_prev);
    else z = x;
    x_prev = x;
    if (!rec.record(l, x, t)) break;
  }
  trace.x_hat = x;
  return trace;
}

}  // namespace detail

/// PnP-FISTA; with an NPN term and gamma > 0 this is NPN-PnP-FISTA.
inline SolverTrace solve_pnp_fista(const SensingOperator& op, const Vec& y, const Denoiser& denoiser,
                                   const SolverConfig& cfg, const NpnTerm* npn = nullptr,
                                   const TraceContext& ctx = {}) {
  return detail::fista_family(detail::FistaKind::pnp, op, y, denoiser, cfg, npn, ctx);
}

/// RED-FISTA: x = z - alpha grad - lambda (z - D(z)).
inline SolverTrace solve_red_fista(const SensingOperator& op, const Vec& y, const Denoiser& denoiser,
                                   const SolverConfig& cfg, const NpnTerm* npn = nullptr,
                                   const TraceContext& ctx = {}) {
  return detail::fista_family(detail::FistaKind::red, op, y, denoiser, cfg, npn, ctx);
}

// ---------------------------------------------------------------------------
// PnP-ADMM
// ---------------------------------------------------------------------------

struct CgResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
};

/// Conjugate gradient for a symmetric positive definite map, warm started.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, const Vec& b, Vec x0, int max_iters, double tol) {
  CgResult out;
  out.x = std::move(x0);
  Vec r = b - apply(out.x);
  Vec p = r;
  double rr = r.squaredNorm();
  const double target = tol * tol * std::max(b.squaredNorm(), std::numeric_limits<double>::min());
  if (rr <= target) {
    out.converged = true;
    return out;
  }
  for (int k = 1; k <= max_iters; ++k) {
    const Vec ap = apply(p);
    const double step = rr / p.dot(ap);
    out.x += step * p;
    r -= step * ap;
    const double rr_next = r.squaredNorm();
    out.iterations = k;
    if (rr_next <= target) {
      out.converged = true;
      return out;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return out;
}

/// x = argmin 1/2||Hx - y||^2 + gamma/2||Sx - g||^2 + rho/2||x - v + u||^2,
/// v = D(x + u), u += x - v. The trace follows x.
inline SolverTrace solve_pnp_admm(const SensingOperator& op, const Vec& y, const Denoiser& denoiser,
                                  const SolverConfig& cfg, const NpnTerm* npn = nullptr,
                                  const TraceContext& ctx = {}) {
  cfg.validate();
  if (y.size() != op.rows()) throw DimensionError("solver: measurement length mismatch");
  check_npn(op, npn);
  const Shape shape = op.input_shape();
  const bool use_npn = npn_active(npn, cfg.gamma);
  const double rho = cfg.admm_rho;
  SolverTrace trace;
  trace.alpha = 1.0 / rho;
  detail::TraceRecorder rec(op, y, ctx, cfg, trace);

  auto system = [&](const Vec& v) {
    Vec out = op.normal(v) + rho * v;
    if (use_npn) out += cfg.gamma * (npn->S->transpose() * (*npn->S * v));
    return out;
  };
  Vec rhs_fixed = op.apply_adjoint(y);
  if (use_npn) rhs_fixed += cfg.gamma * (npn->S->transpose() * npn->g);

  Vec x = Vec::Zero(op.cols()), v = x, u = x;
  for (int l = 1; l <= cfg.L; ++l) {
    const CgResult cg = conjugate_gradient(system, Vec(rhs_fixed + rho * (v - u)), x, cfg.cg_max_iters, cfg.cg_tol);
    if (!cg.converged) ++trace.cg_failures;
    x = cg.x;
    v = denoise(denoiser, Vec(x + u), shape);
    u += x - v;
    if (!rec.record(l, x, 1.0)) break;
  }
  trace.x_hat = x;
  return trace;
}

// ---------------------------------------------------------------------------
// FISTA with a sparsity prior
// ---------------------------------------------------------------------------

enum class SparsityBasis { identity, dct };

/// min 1/2||Hx - y||^2 + tau ||T x||_1 (+ gamma/2 ||Sx - g||^2) for an
/// orthonormal T. With adaptive restart a step that raises the objective is
/// replaced by a plain proximal-gradient step from x^(l-1) and t resets to 1,
/// so the objective never increases (for alpha <= 1 / Lipschitz constant).
inline SolverTrace solve_fista_sparsity(const SensingOperator& op, const Vec& y, SparsityBasis basis, double tau,
                                        const SolverConfig& cfg, const NpnTerm* npn = nullptr,
                                        const TraceContext& ctx = {}) {
  cfg.validate();
  if (tau < 0.0) throw InvalidParameter("sparsity weight tau must be >= 0");
  if (y.size() != op.rows()) throw DimensionError("solver: measurement length mismatch");
  check_npn(op, npn);
  const Shape shape = op.input_shape();
  const bool use_npn = npn_active(npn, cfg.gamma);
  const SeparableDct dct(shape);
  auto forward_t = [&](const Vec& x) { return basis == SparsityBasis::dct ? dct.forward(x) : x; };
  auto inverse_t = [&](const Vec& c) { return basis == SparsityBasis::dct ? dct.inverse(c) : c; };

  SolverTrace trace;
  trace.alpha = cfg.alpha > 0.0 ? cfg.alpha : default_step(op, npn, cfg.gamma);
  const double alpha = trace.alpha;
  detail::TraceRecorder rec(op, y, ctx, cfg, trace);

  auto objective = [&](const Vec& x) {
    double f = 0.5 * (op.apply(x) - y).squaredNorm() + tau * forward_t(x).lpNorm<1>();
    if (use_npn) f += 0.5 * cfg.gamma * (*npn->S * x - npn->g).squaredNorm();
    return f;
  };
  auto prox_step = [&](const Vec& z) {
    Vec grad = grad_fidelity(op, z, y);
    if (use_npn) grad += cfg.gamma * npn_grad(*npn->S, z, npn->g);
    return Vec(inverse_t(detail::soft_threshold(forward_t(Vec(z - alpha * grad)), alpha * tau)));
  };

  Vec x_prev = Vec::Zero(op.cols()), z = x_prev, x = x_prev;
  double t = 1.0;
  double f_prev = objective(x_prev);
  for (int l = 1; l <= cfg.L; ++l) {
    x = prox_step(z);
    double t_prev = t;
    t = detail::next_t(t);
    if (cfg.adaptive_restart) {
      double f = objective(x);
      if (f > f_prev) {
        x = prox_step(x_prev);
        f = objective(x);
        t_prev = 1.0;
        t = 1.0;
      }
      f_prev = f;
    }
    if (cfg.momentum == Momentum::fista) z = x + ((t_prev - 1.0) / t) * (x - x_prev);
    else z = x;
    x_prev = x;
    if (!rec.record(l, x, t)) break;
  }
  trace.x_hat = x;
  return trace;
}

}  // namespace npn
