#pragma once

#include "npn/core.hpp"
#include "npn/nullspace.hpp"
#include "npn/operators.hpp"

#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace npn {

// ---------------------------------------------------------------------------
// Error terms for the oracle prior
// ---------------------------------------------------------------------------

enum class ErrorKind { zero, gaussian, lipschitz_nonlinear };

struct ErrorSpec {
  ErrorKind kind = ErrorKind::zero;
  double epsilon = 0.0;  // gaussian std, or tanh output scale
  double K = 1.0;        // Lipschitz bound for the nonlinear kind
  std::uint64_t seed = 0;

  static ErrorSpec zero() { return {}; }
  static ErrorSpec gaussian(double eps, std::uint64_t seed) { return {ErrorKind::gaussian, eps, 0.0, seed}; }
  static ErrorSpec lipschitz(double eps, double k, std::uint64_t seed) {
    return {ErrorKind::lipschitz_nonlinear, eps, k, seed};
  }
};

/// N(u) = eps * tanh(B u). tanh is 1-Lipschitz per entry, so the map is
/// (eps * ||B||)-Lipschitz; B is scaled to make that at most K.
struct LipschitzError {
  Mat B;
  double epsilon = 0.0;
  double certified = 0.0;  // max slope seen on the probe pairs

  Vec operator()(const Vec& u) const {
    if (epsilon == 0.0) return Vec::Zero(B.rows());
    return epsilon * (B * u).array().tanh().matrix();
  }
};

inline LipschitzError realize_lipschitz_error(double epsilon, double K, Index p, Index m_eff, std::uint64_t seed,
                                              Index probe_pairs = 1000) {
  if (!(K > 0.0)) throw InvalidParameter("lipschitz error needs K > 0");
  if (epsilon < 0.0) throw InvalidParameter("lipschitz error needs epsilon >= 0");
  LipschitzError n;
  n.epsilon = epsilon;
  Rng rng = make_rng(seed, 302);
  n.B = gaussian_matrix(p, m_eff, rng);
  if (epsilon > 0.0) {
    const double norm = Eigen::BDCSVD<Mat>(n.B).singularValues()[0];
    n.B *= K / (epsilon * norm);
  }
  Rng probe = make_rng(seed, 303);
  std::uniform_real_distribution<double> scale(-3.0, 1.0);
  for (Index i = 0; i < probe_pairs; ++i) {
    const Vec u = gaussian_vector(m_eff, probe);
    const Vec v = u + std::pow(10.0, scale(probe)) * gaussian_vector(m_eff, probe);
    const double d = (u - v).norm();
    if (d > 0.0) n.certified = std::max(n.certified, (n(u) - n(v)).norm() / d);
  }
  return n;
}

/// G(y) = S x* + N(y). Needs the ground truth, so only for validation.
class OraclePrior {
 public:
  OraclePrior(Mat s, ErrorSpec spec, Index m_eff = 0) : S_(std::move(s)), spec_(spec) {
    if (spec_.epsilon < 0.0) throw InvalidParameter("oracle error needs epsilon >= 0");
    if (spec_.kind == ErrorKind::lipschitz_nonlinear) {
      if (m_eff < 1) throw InvalidParameter("lipschitz oracle needs the measurement length");
      lipschitz_ = realize_lipschitz_error(spec_.epsilon, spec_.K, S_.rows(), m_eff, spec_.seed);
    }
  }

  const Mat& S() const { return S_; }
  const ErrorSpec& spec() const { return spec_; }
  const std::optional<LipschitzError>& lipschitz() const { return lipschitz_; }
  Index p() const { return S_.rows(); }

  /// The error realization N(y).
  Vec error(const Vec& y) const {
    switch (spec_.kind) {
      case ErrorKind::zero: return Vec::Zero(p());
      case ErrorKind::gaussian: {
        Rng rng = make_rng(spec_.seed, 301);
        return spec_.epsilon * gaussian_vector(p(), rng);
      }
      case ErrorKind::lipschitz_nonlinear: return (*lipschitz_)(y);
    }
    return Vec::Zero(p());
  }

  Vec predict(const Vec& y, const Vec& x_true) const {
    if (x_true.size() != S_.cols()) throw DimensionError("oracle prior: ground truth length mismatch");
    return S_ * x_true + error(y);
  }

 private:
  Mat S_;
  ErrorSpec spec_;
  std::optional<LipschitzError> lipschitz_;
};

// ---------------------------------------------------------------------------
// Two-layer network G(y) = V phi(W (y - mean) / scale + b)
// ---------------------------------------------------------------------------

enum class Activation { tanh, relu };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw InvalidParameter("unknown activation '" + s + "'");
}

struct TwoLayerNet {
  Mat W;  // k x m_eff
  Mat V;  // p x k
  Vec b;  // k, hidden bias
  Activation activation = Activation::tanh;
  Vec mean;   // input standardization, length m_eff
  Vec scale;  // input standardization, length m_eff

  Index k() const { return W.rows(); }
  Index m_eff() const { return W.cols(); }
  Index p() const { return V.rows(); }

  void validate() const {
    if (V.cols() != W.rows() || b.size() != W.rows() || mean.size() != W.cols() || scale.size() != W.cols())
      throw DimensionError("two-layer net: inconsistent dimensions W " + dims(W.rows(), W.cols()) + ", V " +
                           dims(V.rows(), V.cols()));
  }

  Mat normalize(const Mat& y) const { return (y.colwise() - mean).array().colwise() / scale.array(); }

  Mat activate(const Mat& z) const {
    return activation == Activation::tanh ? Mat(z.array().tanh()) : Mat(z.cwiseMax(0.0));
  }

  Mat activate_derivative(const Mat& z) const {
    if (activation == Activation::tanh) return (1.0 - z.array().tanh().square()).matrix();
    return (z.array() > 0.0).cast<double>().matrix();
  }

  /// One measurement per column.
  Mat predict_batch(const Mat& y) const { return V * activate((W * normalize(y)).colwise() + b); }

  Vec predict(const Vec& y) const {
    if (y.size() != m_eff()) throw DimensionError("two-layer net expects input length " + std::to_string(m_eff()));
    return predict_batch(y);
  }
};

inline TwoLayerNet make_net(Index m_eff, Index p, Index k, Activation act, std::uint64_t seed) {
  if (m_eff < 1 || p < 1 || k < 1) throw InvalidParameter("two-layer net needs positive dimensions");
  Rng rng = make_rng(seed, 401);
  TwoLayerNet net;
  net.W = gaussian_matrix(k, m_eff, rng, 1.0 / std::sqrt(static_cast<double>(m_eff)));
  net.V = gaussian_matrix(p, k, rng, 1.0 / std::sqrt(static_cast<double>(k)));
  net.b = Vec::Zero(k);
  net.activation = act;
  net.mean = Vec::Zero(m_eff);
  net.scale = Vec::Ones(m_eff);
  return net;
}

/// Per-feature mean and std of the inputs (columns are samples).
inline void fit_normalization(TwoLayerNet& net, const Mat& inputs) {
  const double count = static_cast<double>(inputs.cols());
  net.mean = inputs.rowwise().mean();
  const Mat centred = inputs.colwise() - net.mean;
  net.scale = (centred.array().square().rowwise().sum() / count).sqrt().matrix();
  for (Index i = 0; i < net.scale.size(); ++i)
    if (!(net.scale[i] > 1e-12)) net.scale[i] = 1.0;
}

struct NetGradient {
  Mat dW, dV, db;
  double loss = 0.0;
};

/// Mean over columns of ||G(u) - t||^2 and its gradient in (W, b, V).
inline NetGradient net_loss_gradient(const TwoLayerNet& net, const Mat& inputs, const Mat& targets) {
  const double b = static_cast<double>(inputs.cols());
  const Mat u = net.normalize(inputs);
  const Mat z = (net.W * u).colwise() + net.b;
  const Mat a = net.activate(z);
  const Mat r = net.V * a - targets;
  NetGradient g;
  g.loss = r.squaredNorm() / b;
  g.dV = (2.0 / b) * r * a.transpose();
  const Mat dz = ((net.V.transpose() * r).array() * net.activate_derivative(z).array()).matrix() * (2.0 / b);
  g.dW = dz * u.transpose();
  g.db = dz.rowwise().sum();
  return g;
}

/// Adam moments for one parameter block.
struct AdamState {
  Mat m, v;
  long step = 0;

  void update(Mat& param, const Mat& grad, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (m.size() == 0) {
      m = Mat::Zero(param.rows(), param.cols());
      v = Mat::Zero(param.rows(), param.cols());
    }
    ++step;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainParams {
  double lr = 1e-3;
  int epochs = 100;
  Index batch = 32;
  std::uint64_t seed = 0;
  double fit_weight = 1.0;
  double noise_std = 0.0;  // measurement noise augmentation, off by default
  bool normalize_inputs = true;
  std::ostream* progress = nullptr;  // CSV rows: epoch,fit,lambda1_term,lambda2_term,holdout_error
};

struct TrainReport {
  double final_mmse_loss = 0.0;
  double fit_loss = 0.0;
  double invertibility_term = 0.0;  // mean ||x - A^+ A x||^2
  double gram_term = 0.0;           // ||A^T A - I||_F^2
  int epochs = 0;
  double holdout_relative_error = 0.0;
  std::vector<std::string> warnings;
};

/// sqrt(sum ||S x - G(H x)||^2 / sum ||S x||^2) over the columns of x.
inline double relative_projection_error(const TwoLayerNet& net, const Mat& inputs, const Mat& targets) {
  if (inputs.cols() == 0) return 0.0;
  const double den = targets.squaredNorm();
  const double num = (net.predict_batch(inputs) - targets).squaredNorm();
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace detail {

inline Mat measure_columns(const SensingOperator& op, const Mat& x) {
  Mat y(op.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) y.col(j) = op.apply(x.col(j));
  return y;
}

inline Mat stack_rows(const Mat& h, const Mat& s) {
  Mat a(h.rows() + s.rows(), h.cols());
  a << h, s;
  return a;
}

inline double gram_penalty(const Mat& h, const Mat& s) {
  const Mat a = stack_rows(h, s);
  return (a.transpose() * a - Mat::Identity(a.cols(), a.cols())).squaredNorm();
}

/// Gradient in S of ||A^T A - I||_F^2, A = [H; S]: 4 S (A^T A - I).
inline Mat gram_gradient(const Mat& h, const Mat& s) {
  const Mat a = stack_rows(h, s);
  return 4.0 * s * (a.transpose() * a - Mat::Identity(a.cols(), a.cols()));
}

/// Mean ||x - A^+ A x||^2 over the columns of x and its gradient in S.
/// With r = x - A^+ A x and w = (A^+)^T x the per-sample gradient in A is
/// -2 w r^T; the S block is the last p rows.
inline double invertibility_term(const Mat& h, const Mat& s, const Mat& x, Mat* grad_s) {
  const Mat a = stack_rows(h, s);
  const Mat pinv = pseudo_inverse(a);
  const Mat r = x - pinv * (a * x);
  const double b = static_cast<double>(x.cols());
  if (grad_s) {
    const Mat w = pinv.transpose() * x;
    *grad_s = (-2.0 / b) * w.bottomRows(s.rows()) * r.transpose();
  }
  return r.squaredNorm() / b;
}

struct JointTerms {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  const Mat* h = nullptr;
};

/// Shared loop. When `s` is learnable and a lambda or the fit term touches it,
/// S gets its own Adam state; with both lambdas zero S is left untouched.
inline TrainReport train_loop(TwoLayerNet& net, Mat& s, bool learn_s, const Mat& x_train, const Mat& y_train,
                              const Mat& x_holdout, const Mat& y_holdout, const TrainParams& params,
                              const JointTerms& joint) {
  if (x_train.cols() < 1) throw InvalidParameter("training set is empty");
  if (params.batch < 1 || params.epochs < 0 || !(params.lr > 0.0)) throw InvalidParameter("bad training parameters");
  if (net.m_eff() != y_train.rows() || net.p() != s.rows())
    throw DimensionError("net dimensions " + dims(net.p(), net.m_eff()) + " do not match data (p = " +
                         std::to_string(s.rows()) + ", m_eff = " + std::to_string(y_train.rows()) + ")");
  net.validate();
  if (params.normalize_inputs) fit_normalization(net, y_train);

  Rng rng = make_rng(params.seed, 402);
  AdamState adam_w, adam_b, adam_v, adam_s;
  const Index count = x_train.cols();
  std::vector<Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});

  TrainReport report;
  auto evaluate = [&](int epoch) {
    report.fit_loss = net_loss_gradient(net, y_train, s * x_train).loss;
    if (joint.h) {
      report.invertibility_term = invertibility_term(*joint.h, s, x_train, nullptr);
      report.gram_term = gram_penalty(*joint.h, s);
    }
    report.final_mmse_loss = params.fit_weight * report.fit_loss + joint.lambda1 * report.invertibility_term +
                             joint.lambda2 * report.gram_term;
    report.holdout_relative_error = relative_projection_error(net, y_holdout, s * x_holdout);
    if (!std::isfinite(report.final_mmse_loss))
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                            std::to_string(report.final_mmse_loss) + ", lr " + std::to_string(params.lr) + ")");
    if (params.progress)
      *params.progress << std::setprecision(10) << epoch << ',' << report.fit_loss << ','
                       << joint.lambda1 * report.invertibility_term << ',' << joint.lambda2 * report.gram_term << ','
                       << report.holdout_relative_error << '\n';
  };

  if (params.progress) *params.progress << "epoch,fit,lambda1_term,lambda2_term,holdout_error\n";
  std::normal_distribution<double> noise(0.0, params.noise_std > 0.0 ? params.noise_std : 1.0);
  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < count; start += params.batch) {
      const Index b = std::min(params.batch, count - start);
      Mat xb(x_train.rows(), b), yb(y_train.rows(), b);
      for (Index j = 0; j < b; ++j) {
        xb.col(j) = x_train.col(order[static_cast<std::size_t>(start + j)]);
        yb.col(j) = y_train.col(order[static_cast<std::size_t>(start + j)]);
      }
      if (params.noise_std > 0.0)
        for (Index i = 0; i < yb.size(); ++i) yb.data()[i] += noise(rng);

      const Mat targets = s * xb;
      NetGradient g = net_loss_gradient(net, yb, targets);
      if (learn_s) {
        // d/dS of the fit term: targets depend on S.
        const Mat r = net.predict_batch(yb) - targets;
        Mat grad_s = params.fit_weight * (-2.0 / static_cast<double>(b)) * r * xb.transpose();
        if (joint.lambda1 > 0.0) {
          Mat g1;
          invertibility_term(*joint.h, s, xb, &g1);
          grad_s += joint.lambda1 * g1;
        }
        if (joint.lambda2 > 0.0) grad_s += joint.lambda2 * gram_gradient(*joint.h, s);
        adam_s.update(s, grad_s, params.lr);
      }
      adam_w.update(net.W, params.fit_weight * g.dW, params.lr);
      adam_v.update(net.V, params.fit_weight * g.dV, params.lr);
      Mat bias = net.b;
      adam_b.update(bias, params.fit_weight * g.db, params.lr);
      net.b = bias;
    }
    evaluate(epoch);
    report.epochs = epoch;
  }
  if (params.epochs == 0) evaluate(0);
  return report;
}

}  // namespace detail

/// Train G on (H x, S x) pairs with S fixed. Samples are columns of x.
inline TrainReport train_mmse(TwoLayerNet& net, const Mat& x_train, const SensingOperator& op, const Mat& s,
                              const TrainParams& params, const Mat& x_holdout = Mat()) {
  Mat s_copy = s;
  const Mat hold = x_holdout.size() ? x_holdout : Mat(x_train.rows(), 0);
  return detail::train_loop(net, s_copy, false, x_train, detail::measure_columns(op, x_train), hold,
                            detail::measure_columns(op, hold), params, {});
}

/// Generic regression of targets from inputs (used for direct-reconstruction
/// baselines). Columns are samples.
inline TrainReport train_regression(TwoLayerNet& net, const Mat& inputs, const Mat& targets, const TrainParams& params,
                                    const Mat& holdout_inputs = Mat(), const Mat& holdout_targets = Mat()) {
  Mat eye = Mat::Identity(targets.rows(), targets.rows());
  const Mat hx = holdout_inputs.size() ? holdout_inputs : Mat(inputs.rows(), 0);
  const Mat ht = holdout_targets.size() ? holdout_targets : Mat(targets.rows(), 0);
  return detail::train_loop(net, eye, false, targets, inputs, ht, hx, params, {});
}

struct JointResult {
  NullSpaceBasis basis;
  TrainReport report;
};

/// Optimize (W, V, S) on fit + lambda1 * invertibility + lambda2 * gram.
inline JointResult train_joint(TwoLayerNet& net, const Mat& s_init, const Mat& x_train, const Mat& h, double lambda1,
                               double lambda2, const TrainParams& params, const Mat& x_holdout = Mat()) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw InvalidParameter("train_joint needs lambda1, lambda2 >= 0");
  if (s_init.cols() != h.cols()) throw DimensionError("train_joint: S and H column counts differ");
  Mat s = s_init;
  const Mat hold = x_holdout.size() ? x_holdout : Mat(x_train.rows(), 0);
  const bool learn_s = lambda1 > 0.0 || lambda2 > 0.0;
  detail::JointTerms joint{lambda1, lambda2, &h};
  JointResult out;
  out.report = detail::train_loop(net, s, learn_s, x_train, h * x_train, hold, h * hold, params, joint);
  if (s.rows() > h.cols() - h.rows())
    out.report.warnings.push_back("p = " + std::to_string(s.rows()) + " exceeds n - m = " +
                                  std::to_string(h.cols() - h.rows()) + "; exact orthogonality is unreachable");
  out.basis.S = s;
  out.basis.method = BasisMethod::learned;
  record_residuals(out.basis, h);
  return out;
}

// ---------------------------------------------------------------------------
// Prior model
// ---------------------------------------------------------------------------

using PriorModel = std::variant<OraclePrior, TwoLayerNet>;

/// Oracle priors need the ground truth; nets ignore it.
inline Vec predict(const PriorModel& prior, const Measurement& y, const std::optional<Vec>& x_true = std::nullopt) {
  if (const auto* o = std::get_if<OraclePrior>(&prior)) {
    if (!x_true) throw InvalidParameter("oracle prior needs the ground truth signal");
    return o->predict(y.values, *x_true);
  }
  return std::get<TwoLayerNet>(prior).predict(y.values);
}

// ---------------------------------------------------------------------------
// Model files: text header then flat arrays, one per line.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_array(std::ostream& os, const std::string& name, const Mat& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols();
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) os << ' ' << m(i, j);
  os << '\n';
}

inline Mat read_array(std::istream& is, const std::string& name) {
  std::string tag;
  Index r = 0, c = 0;
  if (!(is >> tag >> r >> c) || tag != name || r < 0 || c < 0)
    throw InvalidParameter("model file: expected array '" + name + "'");
  Mat m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i)
      if (!(is >> m(i, j))) throw InvalidParameter("model file: truncated array '" + name + "'");
  return m;
}

}  // namespace detail

inline void save_net(std::ostream& os, const TwoLayerNet& net) {
  os << "npn-net 1\n";
  os << "k " << net.k() << "\nm_eff " << net.m_eff() << "\np " << net.p() << "\nactivation "
     << to_string(net.activation) << '\n';
  os << std::setprecision(17);
  detail::write_array(os, "mean", net.mean);
  detail::write_array(os, "scale", net.scale);
  detail::write_array(os, "W", net.W);
  detail::write_array(os, "b", net.b);
  detail::write_array(os, "V", net.V);
}

inline TwoLayerNet load_net(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "npn-net 1") throw InvalidParameter("model file: bad magic line");
  std::string key, act;
  Index k = 0, m = 0, p = 0;
  if (!(is >> key >> k) || key != "k" || !(is >> key >> m) || key != "m_eff" || !(is >> key >> p) || key != "p" ||
      !(is >> key >> act) || key != "activation")
    throw InvalidParameter("model file: bad header");
  TwoLayerNet net;
  net.activation = parse_activation(act);
  net.mean = detail::read_array(is, "mean");
  net.scale = detail::read_array(is, "scale");
  net.W = detail::read_array(is, "W");
  net.b = detail::read_array(is, "b");
  net.V = detail::read_array(is, "V");
  if (net.k() != k || net.m_eff() != m || net.p() != p) throw InvalidParameter("model file: header disagrees with arrays");
  net.validate();
  return net;
}

}  // namespace npn
