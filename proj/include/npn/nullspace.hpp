#pragma once

#include "npn/core.hpp"
#include "npn/operators.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace npn {

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-10;

enum class BasisMethod { qr_random, fourier_complement, radon_complement, toeplitz_complement, sr_complement, learned };

inline std::string to_string(BasisMethod m) {
  switch (m) {
    case BasisMethod::qr_random: return "qr-random";
    case BasisMethod::fourier_complement: return "fourier-complement";
    case BasisMethod::radon_complement: return "radon-complement";
    case BasisMethod::toeplitz_complement: return "toeplitz-complement";
    case BasisMethod::sr_complement: return "sr-complement";
    case BasisMethod::learned: return "learned";
  }
  return "?";
}

inline BasisMethod parse_basis_method(const std::string& s) {
  for (auto m : {BasisMethod::qr_random, BasisMethod::fourier_complement, BasisMethod::radon_complement,
                 BasisMethod::toeplitz_complement, BasisMethod::sr_complement, BasisMethod::learned})
    if (to_string(m) == s) return m;
  throw InvalidParameter("unknown basis method '" + s + "'");
}

/// Projection matrix S (p x n) and how well it complements H.
struct NullSpaceBasis {
  Mat S;
  BasisMethod method = BasisMethod::qr_random;
  double ortho_to_H_residual = 0.0;  // ||S H^T||_F
  double row_gram_residual = 0.0;    // ||S S^T - I||_F

  Index p() const { return S.rows(); }
  Index n() const { return S.cols(); }
};

// ---------------------------------------------------------------------------
// Linear-algebra helpers
// ---------------------------------------------------------------------------

inline Eigen::BDCSVD<Mat> thin_svd(const Mat& a) { return Eigen::BDCSVD<Mat>(a, Eigen::ComputeThinU | Eigen::ComputeThinV); }

inline Index numerical_rank(const Vec& singular_values) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = kRankTolerance * singular_values.maxCoeff();
  Index r = 0;
  for (Index i = 0; i < singular_values.size(); ++i)
    if (singular_values[i] > cutoff) ++r;
  return r;
}

inline Index numerical_rank(const Mat& a) {
  if (a.size() == 0) return 0;
  return numerical_rank(Eigen::BDCSVD<Mat>(a).singularValues());
}

/// Moore-Penrose pseudoinverse with the relative rank cutoff.
inline Mat pseudo_inverse(const Mat& a) {
  const auto svd = thin_svd(a);
  const Vec& s = svd.singularValues();
  const Index r = numerical_rank(s);
  Vec inv = Vec::Zero(s.size());
  for (Index i = 0; i < r; ++i) inv[i] = 1.0 / s[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthonormal basis (columns) of the row space of `a`.
inline Mat row_space_basis(const Mat& a) {
  const auto svd = thin_svd(a);
  return svd.matrixV().leftCols(numerical_rank(svd.singularValues()));
}

inline void record_residuals(NullSpaceBasis& b, const Mat& h_dense) {
  b.ortho_to_H_residual = (b.S * h_dense.transpose()).norm();
  b.row_gram_residual = (b.S * b.S.transpose() - Mat::Identity(b.p(), b.p())).norm();
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

/// p orthonormal rows spanning a random subspace of Null(H): full QR of H^T
/// gives a null-space basis N, a seeded Gaussian (n-m) x p matrix is
/// orthonormalised to U, and S = U^T N^T.
inline NullSpaceBasis qr_nullspace(const Mat& h, Index p, std::uint64_t seed) {
  const Index m = h.rows(), n = h.cols();
  if (n > kDenseCap) throw InvalidParameter("qr_nullspace: n = " + std::to_string(n) + " exceeds dense cap");
  if (p < 1) throw InvalidParameter("qr_nullspace: p must be >= 1");
  if (p > n - m)
    throw InfeasibleDimension("qr_nullspace: p = " + std::to_string(p) + " exceeds n - m = " + std::to_string(n - m));
  const Index rank = numerical_rank(h);
  if (rank < m)
    throw RankDeficient("qr_nullspace: H has numerical rank " + std::to_string(rank) + " < m = " + std::to_string(m),
                        rank);

  Eigen::HouseholderQR<Mat> qr(h.transpose());
  const Mat q_full = qr.householderQ();
  const Mat null_basis = q_full.rightCols(n - m);

  Rng rng = make_rng(seed, 2);
  const Mat gauss = gaussian_matrix(n - m, p, rng);
  Eigen::HouseholderQR<Mat> qr_p(gauss);
  const Mat u = qr_p.householderQ() * Mat::Identity(n - m, p);

  NullSpaceBasis b;
  b.S = u.transpose() * null_basis.transpose();
  b.method = BasisMethod::qr_random;
  record_residuals(b, h);
  return b;
}

/// Stacked rows of the frequencies the mask leaves out, ascending.
inline NullSpaceBasis fourier_complement(const SensingOperator& op) {
  const auto* freq = op.as<MaskedFrequency>();
  if (!freq) throw InvalidParameter("fourier_complement needs a masked-frequency operator, got " + op.name());
  const std::vector<Index> rest = freq->complement();
  if (rest.empty()) throw InfeasibleDimension("fourier_complement: mask covers every frequency, complement is empty");
  const SensingOperator complement(MaskedFrequency(freq->input_shape(), freq->transform(), rest));
  NullSpaceBasis b;
  b.S = to_dense(complement);
  b.method = BasisMethod::fourier_complement;
  record_residuals(b, to_dense(op));
  return b;
}

/// Radon rows at the angles that were not acquired. Not exactly orthogonal
/// to H; residuals are recorded, not enforced. p may exceed n here.
inline NullSpaceBasis radon_complement(const std::vector<double>& full_angles, const std::vector<double>& acquired,
                                       Index side, double gain = 1.0) {
  std::set<double> full(full_angles.begin(), full_angles.end());
  std::set<double> got(acquired.begin(), acquired.end());
  for (double a : got)
    if (!full.count(a)) throw InvalidParameter("radon_complement: acquired angle " + std::to_string(a) + " not in full set");
  std::vector<double> rest;
  for (double a : full_angles)
    if (!got.count(a)) rest.push_back(a);
  if (rest.empty()) throw InfeasibleDimension("radon_complement: every angle acquired, complement is empty");

  NullSpaceBasis b;
  b.S = Mat(RadonSubset(side, rest).matrix());
  b.method = BasisMethod::radon_complement;
  record_residuals(b, gain * Mat(RadonSubset(side, acquired).matrix()));
  return b;
}

inline NullSpaceBasis radon_complement(const SensingOperator& op, const std::vector<double>& full_angles) {
  const auto* radon = op.as<RadonSubset>();
  if (!radon) throw InvalidParameter("radon_complement needs a radon operator, got " + op.name());
  return radon_complement(full_angles, radon->angles(), radon->side(), op.gain());
}

namespace detail {

/// S = I - B for the circulant blur B, i.e. generating row delta - h.
inline Mat complement_of_blur(const ConvToeplitz& blur) { return Mat::Identity(blur.rows(), blur.cols()) - to_dense(SensingOperator(blur)); }

}  // namespace detail

/// High-pass complement of a circular blur: S = I - B. Its generating row
/// has DFT 1 - DFT(kernel) at every bin.
inline NullSpaceBasis toeplitz_complement(const SensingOperator& op) {
  const auto* conv = op.as<ConvToeplitz>();
  if (!conv) throw InvalidParameter("toeplitz_complement needs a convolution operator, got " + op.name());
  NullSpaceBasis b;
  b.S = detail::complement_of_blur(*conv);
  b.method = BasisMethod::toeplitz_complement;
  record_residuals(b, to_dense(op));
  return b;
}

inline NullSpaceBasis toeplitz_complement(const Kernel& kernel, Shape shape) {
  return toeplitz_complement(SensingOperator(ConvToeplitz(kernel, shape)));
}

/// Super-resolution complement: built from the blur alone (no decimation).
inline NullSpaceBasis sr_complement(const SensingOperator& op) {
  const auto* sr = op.as<DecimatedConv>();
  if (!sr) throw InvalidParameter("sr_complement needs a decimated-convolution operator, got " + op.name());
  NullSpaceBasis b;
  b.S = detail::complement_of_blur(sr->blur());
  b.method = BasisMethod::sr_complement;
  record_residuals(b, to_dense(op));
  return b;
}

inline NullSpaceBasis sr_complement(const Kernel& kernel, Index factor, Shape shape) {
  return sr_complement(SensingOperator(DecimatedConv(kernel, factor, shape)));
}

// ---------------------------------------------------------------------------
// Orthogonality report
// ---------------------------------------------------------------------------

struct OrthogonalityReport {
  double ortho_residual = 0.0;
  double row_gram_residual = 0.0;
  Index rank_of_stack = 0;
  double invertibility_loss = 0.0;
};

/// Mean of ||x - M^+ M x||^2 over the columns of `samples`.
inline double invertibility_loss(const Mat& m, const Mat& samples) {
  if (samples.cols() == 0) return 0.0;
  if (samples.rows() != m.cols()) throw DimensionError("invertibility_loss: sample length mismatch");
  const Mat basis = row_space_basis(m);
  const Mat resid = samples - basis * (basis.transpose() * samples);
  return resid.colwise().squaredNorm().mean();
}

/// A = [H; S]. `samples` holds one signal per column.
inline OrthogonalityReport orthogonality_report(const Mat& s, const Mat& h, const Mat& samples) {
  if (s.cols() != h.cols())
    throw DimensionError("orthogonality_report: S is " + dims(s.rows(), s.cols()) + ", H is " + dims(h.rows(), h.cols()));
  Mat a(h.rows() + s.rows(), h.cols());
  a << h, s;
  OrthogonalityReport r;
  r.ortho_residual = (s * h.transpose()).norm();
  r.row_gram_residual = (s * s.transpose() - Mat::Identity(s.rows(), s.rows())).norm();
  r.rank_of_stack = numerical_rank(a);
  r.invertibility_loss = invertibility_loss(a, samples);
  return r;
}

// ---------------------------------------------------------------------------
// Serialization: text header then one comma-separated row of S per line.
// ---------------------------------------------------------------------------

inline void save_basis(std::ostream& os, const NullSpaceBasis& b) {
  os << "npn-basis 1\n";
  os << "method=" << to_string(b.method) << "\n";
  os << "p=" << b.p() << "\n";
  os << "n=" << b.n() << "\n";
  os << std::setprecision(17);
  os << "ortho_to_H_residual=" << b.ortho_to_H_residual << "\n";
  os << "row_gram_residual=" << b.row_gram_residual << "\n";
  os << "data\n";
  for (Index i = 0; i < b.p(); ++i) {
    for (Index j = 0; j < b.n(); ++j) {
      if (j) os << ',';
      os << b.S(i, j);
    }
    os << '\n';
  }
}

inline NullSpaceBasis load_basis(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "npn-basis 1") throw InvalidParameter("load_basis: bad magic line");
  NullSpaceBasis b;
  Index p = -1, n = -1;
  while (std::getline(is, line) && line != "data") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidParameter("load_basis: malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "method") b.method = parse_basis_method(value);
    else if (key == "p") p = std::stoll(value);
    else if (key == "n") n = std::stoll(value);
    else if (key == "ortho_to_H_residual") b.ortho_to_H_residual = std::stod(value);
    else if (key == "row_gram_residual") b.row_gram_residual = std::stod(value);
    else throw InvalidParameter("load_basis: unknown header key '" + key + "'");
  }
  if (p < 1 || n < 1) throw InvalidParameter("load_basis: missing p or n");
  b.S.resize(p, n);
  for (Index i = 0; i < p; ++i) {
    if (!std::getline(is, line)) throw InvalidParameter("load_basis: truncated data");
    std::stringstream row(line);
    std::string cell;
    for (Index j = 0; j < n; ++j) {
      if (!std::getline(row, cell, ',')) throw InvalidParameter("load_basis: short row " + std::to_string(i));
      b.S(i, j) = std::stod(cell);
    }
  }
  return b;
}

}  // namespace npn
