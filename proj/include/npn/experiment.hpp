#pragma once

#include "npn/core.hpp"
#include "npn/denoisers.hpp"
#include "npn/diagnostics.hpp"
#include "npn/nullspace.hpp"
#include "npn/operators.hpp"
#include "npn/phantoms.hpp"
#include "npn/priors.hpp"
#include "npn/solvers.hpp"

#include "json.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace npn {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SolverKind { pnp_fista, red_fista, pnp_admm, fista_sparsity };
enum class PriorKind { oracle, net };

struct BasisConfig {
  std::string method;  // empty: default for the problem
  Index p = 0;         // 0: use p_ratio, or n - m when both are unset
  double p_ratio = 0.0;
  double scale = 1.0;
};

struct NetConfig {
  Index k = 64;
  Activation activation = Activation::tanh;
  Index train_count = 200;
  Index holdout_count = 50;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  TrainParams train;
};

struct PriorConfig {
  PriorKind kind = PriorKind::oracle;
  ErrorSpec error;
  bool relative = false;  // epsilon in units of ||S x*|| / sqrt(p)
  NetConfig net;
};

struct SolverChoice {
  SolverKind kind = SolverKind::pnp_fista;
  SolverConfig cfg;
  SparsityBasis sparsity_basis = SparsityBasis::dct;
  double tau = 0.01;
};

struct ToyConfig {
  Index train_count = 500;
  Index holdout_count = 200;
  double radius = 1.0;
  Index k = 50;
  Index k_direct = 0;  // 0: match the NPN net's parameter count
  Activation activation = Activation::relu;
  TrainParams train;
  Index grid_per_axis = 10;
  double ood_lo = 2.0;
  double ood_hi = 4.0;

  ToyConfig() {
    train.lr = 1e-3;
    train.epochs = 300;
    train.batch = 32;
  }
};

struct ExperimentConfig {
  std::string problem_name = "cs";
  bool toy = false;
  Problem problem = Problem::cs;
  std::uint64_t seed = 0;
  OperatorParams op;
  PhantomSpec signal;
  bool signal_set = false;
  BasisConfig basis;
  PriorConfig prior;
  Denoiser denoiser = Identity{};
  SolverChoice solver;
  std::optional<double> snr_db;
  std::string output = "out";
  bool theory = true;
  ToyConfig toy_cfg;
  std::string source;  // file the config came from, for error messages
};

namespace detail {

inline void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected a table");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + (path.empty() ? "" : path + ".") + it.key() + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError((path.empty() ? "" : path + ".") + key + ": wrong type");
  }
}

template <class Parse, class T>
void read_enum(const Json& j, const char* key, T& out, const std::string& path, Parse parse) {
  if (!j.contains(key)) return;
  std::string s;
  read(j, key, s, path);
  try {
    out = parse(s);
  } catch (const Error& e) {
    throw ConfigError((path.empty() ? "" : path + ".") + key + ": " + e.what());
  }
}

inline void read_train(const Json& j, TrainParams& t, const std::string& path) {
  read(j, "lr", t.lr, path);
  read(j, "epochs", t.epochs, path);
  read(j, "batch", t.batch, path);
  read(j, "noise_std", t.noise_std, path);
  read(j, "normalize_inputs", t.normalize_inputs, path);
}

inline Activation parse_act(const std::string& s) { return parse_activation(s); }

inline void parse_operator(const Json& j, OperatorParams& p) {
  allow_keys(j,
             {"n", "m", "ratio", "entries", "normalization", "height", "width", "two_d", "transform", "mask",
              "acceleration", "explicit_mask", "kernel", "sigma", "radius", "factor", "total_angles",
              "acquired_angles", "angle_selection", "gain"},
             "operator");
  const std::string path = "operator";
  read(j, "n", p.n, path);
  read(j, "m", p.m, path);
  read(j, "ratio", p.ratio, path);
  read_enum(j, "entries", p.entries, path, [](const std::string& s) {
    if (s == "binary") return CsEntries::binary;
    if (s == "gaussian") return CsEntries::gaussian;
    throw InvalidParameter("expected binary or gaussian");
  });
  read_enum(j, "normalization", p.normalization, path, [](const std::string& s) {
    if (s == "none") return RowNormalization::none;
    if (s == "unit_rows") return RowNormalization::unit_rows;
    throw InvalidParameter("expected none or unit_rows");
  });
  read(j, "height", p.height, path);
  read(j, "width", p.width, path);
  read(j, "two_d", p.two_d, path);
  read_enum(j, "transform", p.transform, path, [](const std::string& s) {
    if (s == "dft") return FrequencyTransform::dft;
    if (s == "dct") return FrequencyTransform::dct;
    throw InvalidParameter("expected dft or dct");
  });
  read_enum(j, "mask", p.mask, path, [](const std::string& s) {
    if (s == "radial") return MaskKind::radial;
    if (s == "cartesian") return MaskKind::cartesian;
    if (s == "random") return MaskKind::random;
    if (s == "lowpass") return MaskKind::lowpass;
    throw InvalidParameter("expected radial, cartesian, random or lowpass");
  });
  read(j, "acceleration", p.acceleration, path);
  read(j, "explicit_mask", p.explicit_mask, path);
  read_enum(j, "kernel", p.kernel, path, [](const std::string& s) {
    if (s == "gaussian") return KernelKind::gaussian;
    if (s == "bilinear") return KernelKind::bilinear;
    if (s == "box") return KernelKind::box;
    if (s == "delta") return KernelKind::delta;
    throw InvalidParameter("expected gaussian, bilinear, box or delta");
  });
  read(j, "sigma", p.sigma, path);
  read(j, "radius", p.radius, path);
  read(j, "factor", p.factor, path);
  read(j, "total_angles", p.total_angles, path);
  read(j, "acquired_angles", p.acquired_angles, path);
  read_enum(j, "angle_selection", p.angle_selection, path, [](const std::string& s) {
    if (s == "limited") return AngleSelection::limited;
    if (s == "sparse") return AngleSelection::sparse;
    throw InvalidParameter("expected limited or sparse");
  });
  read(j, "gain", p.gain, path);
}

inline Denoiser parse_denoiser(const Json& j) {
  allow_keys(j, {"kind", "sigma", "tau", "lambda", "inner_iters", "window"}, "denoiser");
  std::string kind = "identity";
  read(j, "kind", kind, "denoiser");
  if (kind == "identity") return Identity{};
  if (kind == "gaussian") {
    GaussianSmooth d;
    read(j, "sigma", d.sigma, "denoiser");
    return d;
  }
  if (kind == "dct-soft") {
    TransformSoftThreshold d;
    read(j, "tau", d.tau, "denoiser");
    return d;
  }
  if (kind == "tv") {
    TVChambolle d;
    read(j, "lambda", d.lambda, "denoiser");
    read(j, "inner_iters", d.inner_iters, "denoiser");
    return d;
  }
  if (kind == "median") {
    Median d;
    read(j, "window", d.window, "denoiser");
    return d;
  }
  throw ConfigError("denoiser.kind: unknown denoiser '" + kind + "'");
}

inline void parse_solver(const Json& j, SolverChoice& s) {
  const std::string path = "solver";
  allow_keys(j,
             {"kind", "alpha", "gamma", "lambda", "L", "momentum", "adaptive_restart", "rho", "cg_max_iters",
              "cg_tol", "sparsity_basis", "tau", "divergence_threshold"},
             path);
  read_enum(j, "kind", s.kind, path, [](const std::string& v) {
    if (v == "pnp_fista") return SolverKind::pnp_fista;
    if (v == "red_fista") return SolverKind::red_fista;
    if (v == "pnp_admm") return SolverKind::pnp_admm;
    if (v == "fista_sparsity") return SolverKind::fista_sparsity;
    throw InvalidParameter("expected pnp_fista, red_fista, pnp_admm or fista_sparsity");
  });
  read(j, "alpha", s.cfg.alpha, path);
  read(j, "gamma", s.cfg.gamma, path);
  read(j, "lambda", s.cfg.lambda, path);
  read(j, "L", s.cfg.L, path);
  read_enum(j, "momentum", s.cfg.momentum, path, [](const std::string& v) {
    if (v == "none") return Momentum::none;
    if (v == "fista") return Momentum::fista;
    throw InvalidParameter("expected none or fista");
  });
  read(j, "adaptive_restart", s.cfg.adaptive_restart, path);
  read(j, "rho", s.cfg.admm_rho, path);
  read(j, "cg_max_iters", s.cfg.cg_max_iters, path);
  read(j, "cg_tol", s.cfg.cg_tol, path);
  read(j, "divergence_threshold", s.cfg.divergence_threshold, path);
  read_enum(j, "sparsity_basis", s.sparsity_basis, path, [](const std::string& v) {
    if (v == "identity") return SparsityBasis::identity;
    if (v == "dct") return SparsityBasis::dct;
    throw InvalidParameter("expected identity or dct");
  });
  read(j, "tau", s.tau, path);
}

inline void parse_prior(const Json& j, PriorConfig& p) {
  const std::string path = "prior";
  allow_keys(j, {"kind", "error", "epsilon", "K", "relative", "error_seed", "net"}, path);
  read_enum(j, "kind", p.kind, path, [](const std::string& v) {
    if (v == "oracle") return PriorKind::oracle;
    if (v == "net") return PriorKind::net;
    throw InvalidParameter("expected oracle or net");
  });
  read_enum(j, "error", p.error.kind, path, [](const std::string& v) {
    if (v == "zero") return ErrorKind::zero;
    if (v == "gaussian") return ErrorKind::gaussian;
    if (v == "lipschitz") return ErrorKind::lipschitz_nonlinear;
    throw InvalidParameter("expected zero, gaussian or lipschitz");
  });
  read(j, "epsilon", p.error.epsilon, path);
  read(j, "K", p.error.K, path);
  read(j, "relative", p.relative, path);
  read(j, "error_seed", p.error.seed, path);
  if (j.contains("net")) {
    const Json& n = j.at("net");
    const std::string np = "prior.net";
    allow_keys(n,
               {"k", "activation", "train_count", "holdout_count", "lambda1", "lambda2", "lr", "epochs", "batch",
                "noise_std", "normalize_inputs"},
               np);
    read(n, "k", p.net.k, np);
    read_enum(n, "activation", p.net.activation, np, parse_act);
    read(n, "train_count", p.net.train_count, np);
    read(n, "holdout_count", p.net.holdout_count, np);
    read(n, "lambda1", p.net.lambda1, np);
    read(n, "lambda2", p.net.lambda2, np);
    read_train(n, p.net.train, np);
  }
}

inline void parse_toy(const Json& j, ToyConfig& t) {
  const std::string path = "toy";
  allow_keys(j,
             {"train_count", "holdout_count", "radius", "k", "k_direct", "activation", "lr", "epochs", "batch",
              "noise_std", "normalize_inputs", "grid_per_axis", "ood_lo", "ood_hi"},
             path);
  read(j, "train_count", t.train_count, path);
  read(j, "holdout_count", t.holdout_count, path);
  read(j, "radius", t.radius, path);
  read(j, "k", t.k, path);
  read(j, "k_direct", t.k_direct, path);
  read_enum(j, "activation", t.activation, path, parse_act);
  read_train(j, t.train, path);
  read(j, "grid_per_axis", t.grid_per_axis, path);
  read(j, "ood_lo", t.ood_lo, path);
  read(j, "ood_hi", t.ood_hi, path);
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j, const std::string& source = "") {
  ExperimentConfig c;
  c.source = source;
  detail::allow_keys(j,
                     {"problem", "seed", "operator", "signal", "basis", "prior", "denoiser", "solver", "snr_db",
                      "output", "theory", "toy"},
                     "");
  detail::read(j, "problem", c.problem_name, "");
  if (c.problem_name == "toy3d") {
    c.toy = true;
  } else {
    try {
      c.problem = parse_problem(c.problem_name);
    } catch (const Error& e) {
      throw ConfigError(std::string("problem: ") + e.what());
    }
  }
  detail::read(j, "seed", c.seed, "");
  if (j.contains("operator")) detail::parse_operator(j.at("operator"), c.op);
  if (j.contains("signal")) {
    const Json& s = j.at("signal");
    detail::allow_keys(s, {"kind", "k", "segments", "count"}, "signal");
    detail::read_enum(s, "kind", c.signal.kind, "signal", parse_phantom);
    c.signal_set = s.contains("kind");
    detail::read(s, "k", c.signal.k, "signal");
    detail::read(s, "segments", c.signal.segments, "signal");
    detail::read(s, "count", c.signal.count, "signal");
  }
  if (j.contains("basis")) {
    const Json& b = j.at("basis");
    detail::allow_keys(b, {"method", "p", "p_ratio", "scale"}, "basis");
    detail::read(b, "method", c.basis.method, "basis");
    detail::read(b, "p", c.basis.p, "basis");
    detail::read(b, "p_ratio", c.basis.p_ratio, "basis");
    detail::read(b, "scale", c.basis.scale, "basis");
  }
  if (j.contains("prior")) detail::parse_prior(j.at("prior"), c.prior);
  if (j.contains("denoiser")) c.denoiser = detail::parse_denoiser(j.at("denoiser"));
  if (j.contains("solver")) detail::parse_solver(j.at("solver"), c.solver);
  if (j.contains("snr_db") && !j.at("snr_db").is_null()) {
    double s = 0.0;
    detail::read(j, "snr_db", s, "");
    c.snr_db = s;
  }
  detail::read(j, "output", c.output, "");
  detail::read(j, "theory", c.theory, "");
  if (j.contains("toy")) detail::parse_toy(j.at("toy"), c.toy_cfg);

  if (c.solver.cfg.gamma < 0.0) throw ConfigError("solver.gamma must be >= 0");
  if (c.solver.cfg.L < 1) throw ConfigError("solver.L must be >= 1");
  if (c.solver.cfg.alpha < 0.0) throw ConfigError("solver.alpha must be >= 0 (0 selects the default)");
  if (c.prior.error.epsilon < 0.0) throw ConfigError("prior.epsilon must be >= 0");
  if (!(c.basis.scale > 0.0)) throw ConfigError("basis.scale must be > 0");
  if (c.basis.p < 0 || c.basis.p_ratio < 0.0) throw ConfigError("basis.p and basis.p_ratio must be >= 0");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return parse_config(j, path);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Directory precedence: explicit argument, then NPN_OUT_DIR, then the config.
inline std::string resolve_output_dir(const ExperimentConfig& c, const std::string& cli_out = "") {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("NPN_OUT_DIR"); env && *env) return env;
  return c.output;
}

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

struct ToyGeometry {
  Mat H;      // 2 x 3
  Mat S;      // 1 x 3
  Mat plane;  // 3 x 2
};

inline ToyGeometry toy_geometry(std::uint64_t seed) {
  ToyGeometry g;
  Rng rng = make_rng(seed, 701);
  g.H = gaussian_matrix(2, 3, rng);
  g.S = qr_nullspace(g.H, 1, seed).S;
  g.plane = toy_plane(g.H, g.S);
  return g;
}

struct Instance {
  std::optional<SensingOperator> op;
  Vec x_true;
  Shape shape;
  NullSpaceBasis basis;
  std::optional<ToyGeometry> toy;
};

inline PhantomSpec signal_spec(const ExperimentConfig& c, Shape shape) {
  PhantomSpec s = c.signal;
  s.shape = shape;
  s.seed = c.seed;
  if (!c.signal_set) {
    switch (c.problem) {
      case Problem::cs: s.kind = PhantomKind::sparse; break;
      case Problem::mri:
      case Problem::ct: s.kind = PhantomKind::shepp_logan; break;
      case Problem::blur:
      case Problem::sr: s.kind = shape.two_d && shape.height == shape.width ? PhantomKind::bumps : PhantomKind::piecewise; break;
    }
  }
  return s;
}

inline std::string default_basis_method(const ExperimentConfig& c) {
  if (c.toy) return "qr-random";
  switch (c.problem) {
    case Problem::cs: return "qr-random";
    case Problem::mri: return "fourier-complement";
    case Problem::blur: return "toeplitz-complement";
    case Problem::sr: return "sr-complement";
    case Problem::ct: return "radon-complement";
  }
  return "qr-random";
}

inline Index resolve_p(const ExperimentConfig& c, Index n, Index m_eff) {
  if (c.basis.p > 0) return c.basis.p;
  if (c.basis.p_ratio > 0.0) return std::max<Index>(1, static_cast<Index>(std::llround(c.basis.p_ratio * static_cast<double>(n))));
  return n - m_eff;
}

/// Builds the operator (or toy geometry), the ground truth and S.
inline Instance build_instance(const ExperimentConfig& c) {
  Instance inst;
  const std::string method = c.basis.method.empty() ? default_basis_method(c) : c.basis.method;
  BasisMethod bm;
  try {
    bm = parse_basis_method(method);
  } catch (const Error& e) {
    throw ConfigError(std::string("basis.method: ") + e.what());
  }
  if (c.toy) {
    inst.toy = toy_geometry(c.seed);
    inst.op.emplace(DenseRandom{inst.toy->H});
    inst.shape = Shape::vector(3);
    inst.x_true = toy3d_disk(1, c.toy_cfg.radius, inst.toy->plane, c.seed + 3).col(0);
    if (bm != BasisMethod::qr_random) throw ConfigError("basis.method: toy3d supports qr-random only");
    inst.basis = qr_nullspace(inst.toy->H, 1, c.seed);
  } else {
    inst.op.emplace(make_operator(c.problem, c.op, c.seed));
    inst.shape = inst.op->input_shape();
    inst.x_true = generate(signal_spec(c, inst.shape)).values;
    const SensingOperator& op = *inst.op;
    const bool analytic = bm != BasisMethod::qr_random && bm != BasisMethod::learned;
    if (analytic && (c.basis.p > 0 || c.basis.p_ratio > 0.0))
      throw ConfigError("basis.p: the " + method + " basis has a fixed number of rows");
    switch (bm) {
      case BasisMethod::qr_random: inst.basis = qr_nullspace(to_dense(op), resolve_p(c, op.cols(), op.rows()), c.seed); break;
      case BasisMethod::fourier_complement: inst.basis = fourier_complement(op); break;
      case BasisMethod::radon_complement:
        inst.basis = radon_complement(op, ct_angles(c.op.total_angles, c.op.acquired_angles, c.op.angle_selection).full);
        break;
      case BasisMethod::toeplitz_complement: inst.basis = toeplitz_complement(op); break;
      case BasisMethod::sr_complement: inst.basis = sr_complement(op); break;
      case BasisMethod::learned:
        // initialization only; run() optimizes S jointly with the prior net
        inst.basis = qr_nullspace(to_dense(op), resolve_p(c, op.cols(), op.rows()), c.seed);
        inst.basis.method = BasisMethod::learned;
        break;
    }
  }
  if (c.basis.scale != 1.0) inst.basis.S *= c.basis.scale;
  return inst;
}

/// Training signals (columns) from the same family as the ground truth.
inline Mat training_signals(const ExperimentConfig& c, const Instance& inst, Index count, std::uint64_t offset) {
  if (count < 1) return Mat(inst.shape.size(), 0);
  if (inst.toy) return toy3d_disk(count, c.toy_cfg.radius, inst.toy->plane, c.seed + offset);
  PhantomSpec s = signal_spec(c, inst.shape);
  s.seed = c.seed + offset;
  const auto set = generate_set(s, count);
  Mat out(inst.shape.size(), count);
  for (Index i = 0; i < count; ++i) out.col(i) = set[static_cast<std::size_t>(i)].values;
  return out;
}

inline Vec add_noise(const Vec& hx, std::optional<double> snr_db, std::uint64_t seed) {
  if (!snr_db) return hx;
  const double power = hx.squaredNorm() / static_cast<double>(hx.size());
  const double sigma = std::sqrt(power / std::pow(10.0, *snr_db / 10.0));
  Rng rng = make_rng(seed, 501);
  return hx + gaussian_vector(hx.size(), rng, sigma);
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

struct Summary {
  std::string problem;
  std::uint64_t seed = 0;
  std::string solver;
  std::string basis;
  Index n = 0;
  Index m_eff = 0;
  Index p = 0;
  double gamma = 0.0;
  double epsilon = 0.0;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  double baseline_psnr = 0.0;
  double npn_psnr = 0.0;
  double baseline_err = 0.0;  // ||x_hat - x*|| / ||x*||
  double npn_err = 0.0;
  double n_norm = 0.0;
  std::size_t ciz_size = 0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double holdout_error = std::numeric_limits<double>::quiet_NaN();
  bool baseline_diverged = false;
  bool npn_diverged = false;

  static std::string header() {
    return "problem,seed,solver,basis,n,m_eff,p,gamma,epsilon,snr_db,baseline_psnr,npn_psnr,psnr_gain,baseline_rel_err,"
           "npn_rel_err,n_norm,ciz_size,rho,holdout_rel_proj_err,baseline_diverged,npn_diverged";
  }

  std::string row() const {
    std::ostringstream os;
    os << std::setprecision(17) << problem << ',' << seed << ',' << solver << ',' << basis << ',' << n << ',' << m_eff
       << ',' << p << ',' << gamma << ',' << epsilon << ',' << snr_db << ',' << baseline_psnr << ',' << npn_psnr << ','
       << npn_psnr - baseline_psnr << ',' << baseline_err << ',' << npn_err << ',' << n_norm << ',' << ciz_size << ','
       << rho << ',' << holdout_error << ',' << baseline_diverged << ',' << npn_diverged;
    return os.str();
  }
};

struct RunResult {
  ExperimentConfig config;
  Instance instance;
  Vec y;
  Vec g;
  SolverTrace baseline;
  SolverTrace npn;
  std::optional<TheoryReport> theory;
  std::optional<TrainReport> training;
  Summary summary;
};

inline std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::pnp_fista: return "pnp_fista";
    case SolverKind::red_fista: return "red_fista";
    case SolverKind::pnp_admm: return "pnp_admm";
    case SolverKind::fista_sparsity: return "fista_sparsity";
  }
  return "?";
}

inline SolverTrace dispatch_solve(const SolverChoice& s, const SensingOperator& op, const Vec& y, const Denoiser& d,
                                  const SolverConfig& cfg, const NpnTerm* npn, const TraceContext& ctx) {
  switch (s.kind) {
    case SolverKind::pnp_fista: return solve_pnp_fista(op, y, d, cfg, npn, ctx);
    case SolverKind::red_fista: return solve_red_fista(op, y, d, cfg, npn, ctx);
    case SolverKind::pnp_admm: return solve_pnp_admm(op, y, d, cfg, npn, ctx);
    case SolverKind::fista_sparsity: return solve_fista_sparsity(op, y, s.sparsity_basis, s.tau, cfg, npn, ctx);
  }
  throw InvalidParameter("unknown solver");
}

/// Builds the problem, the prior and the noisy measurement, then solves the
/// baseline (gamma = 0) and the NPN variant on the same y.
inline RunResult run(const ExperimentConfig& c) {
  RunResult r;
  r.config = c;
  r.instance = build_instance(c);
  Instance& inst = r.instance;
  const SensingOperator& op = *inst.op;
  const Vec& x = inst.x_true;
  r.y = add_noise(op.apply(x), c.snr_db, c.seed);

  ErrorSpec err = c.prior.error;
  const Index p = inst.basis.S.rows();
  if (c.prior.relative) err.epsilon *= (inst.basis.S * x).norm() / std::sqrt(static_cast<double>(p));
  if (err.seed == 0) err.seed = c.seed;

  Mat signal_cloud;
  if (c.prior.kind == PriorKind::oracle) {
    const OraclePrior prior(inst.basis.S, err, op.rows());
    r.g = prior.predict(r.y, x);
  } else {
    const NetConfig& nc = c.prior.net;
    const Mat train = training_signals(c, inst, nc.train_count, 10000);
    const Mat hold = training_signals(c, inst, nc.holdout_count, 20000);
    TwoLayerNet net = make_net(op.rows(), p, nc.k, nc.activation, c.seed);
    TrainParams tp = nc.train;
    tp.seed = c.seed;
    if (inst.basis.method == BasisMethod::learned) {
      JointResult jr = train_joint(net, inst.basis.S, train, to_dense(op), nc.lambda1, nc.lambda2, tp, hold);
      inst.basis = jr.basis;
      r.training = jr.report;
    } else {
      r.training = train_mmse(net, train, op, inst.basis.S, tp, hold);
    }
    r.g = net.predict(r.y);
    signal_cloud = train.leftCols(std::min<Index>(train.cols(), 16));
  }

  SolverConfig base_cfg = c.solver.cfg;
  base_cfg.gamma = 0.0;
  SolverConfig npn_cfg = c.solver.cfg;
  npn_cfg.keep_iterates = c.theory;
  const NpnTerm term{&inst.basis.S, r.g};
  TraceContext ctx;
  ctx.x_true = x;
  ctx.S = &inst.basis.S;
  ctx.g = r.g;
  const double peak = std::max(x.cwiseAbs().maxCoeff(), 1e-12);
  ctx.peak = peak;
  r.baseline = dispatch_solve(c.solver, op, r.y, c.denoiser, base_cfg, nullptr, ctx);
  r.npn = dispatch_solve(c.solver, op, r.y, c.denoiser, npn_cfg, &term, ctx);

  const double n_norm = (r.g - inst.basis.S * x).norm();
  std::vector<int> ciz = detect_ciz(r.npn, n_norm);
  if (c.theory) {
    if (signal_cloud.size() == 0) signal_cloud = training_signals(c, inst, 8, 30000);
    signal_cloud.conservativeResize(Eigen::NoChange, signal_cloud.cols() + 1);
    signal_cloud.col(signal_cloud.cols() - 1) = x;
    TheoryInputs in{&op, &inst.basis.S, &c.denoiser, x, r.g, signal_cloud, npn_cfg.gamma};
    r.theory = build_theory_report(r.npn, in);
    ciz = r.theory->ciz;
  }
  mark_ciz(r.baseline, ciz);
  mark_ciz(r.npn, ciz);

  Summary& s = r.summary;
  s.problem = c.toy ? "toy3d" : to_string(c.problem);
  s.seed = c.seed;
  s.solver = to_string(c.solver.kind);
  s.basis = to_string(inst.basis.method);
  s.n = op.cols();
  s.m_eff = op.rows();
  s.p = p;
  s.gamma = c.solver.cfg.gamma;
  s.epsilon = err.epsilon;
  if (c.snr_db) s.snr_db = *c.snr_db;
  s.baseline_psnr = psnr(r.baseline.x_hat, x, peak);
  s.npn_psnr = psnr(r.npn.x_hat, x, peak);
  const double xn = std::max(x.norm(), 1e-300);
  s.baseline_err = (r.baseline.x_hat - x).norm() / xn;
  s.npn_err = (r.npn.x_hat - x).norm() / xn;
  s.n_norm = n_norm;
  s.ciz_size = ciz.size();
  if (r.theory) s.rho = r.theory->rho.rho;
  if (r.training) s.holdout_error = r.training->holdout_relative_error;
  s.baseline_diverged = r.baseline.diverged;
  s.npn_diverged = r.npn.diverged;
  return r;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const SolverTrace& t) {
  os << "iter,err_sq,proj_err_sq,phi,data_res_sq,psnr,ratio,in_ciz\n";
  os << std::setprecision(17);
  for (const TraceRow& r : t.rows)
    os << r.iter << ',' << r.err_sq << ',' << r.proj_err_sq << ',' << r.phi << ',' << r.data_res_sq << ',' << r.psnr
       << ',' << r.ratio << ',' << (r.in_ciz ? 1 : 0) << '\n';
}

inline std::string trace_csv(const SolverTrace& t) {
  std::ostringstream os;
  write_trace_csv(os, t);
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

/// baseline_trace.csv, npn_trace.csv, theory.txt, summary.csv
inline void write_run(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "baseline_trace.csv", trace_csv(r.baseline));
  write_text(dir / "npn_trace.csv", trace_csv(r.npn));
  std::ostringstream theory;
  theory << std::setprecision(17) << "problem = " << r.summary.problem << "\nseed = " << r.summary.seed
         << "\nbasis = " << r.summary.basis << "\northo_to_H_residual = " << r.instance.basis.ortho_to_H_residual
         << "\n";
  if (r.theory) theory << r.theory->to_text();
  write_text(dir / "theory.txt", theory.str());
  write_text(dir / "summary.csv", Summary::header() + "\n" + r.summary.row() + "\n");
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

enum class SweepParam { gamma, p, p_ratio, epsilon, af, sigma_blur };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "gamma") return SweepParam::gamma;
  if (s == "p") return SweepParam::p;
  if (s == "p_ratio") return SweepParam::p_ratio;
  if (s == "epsilon") return SweepParam::epsilon;
  if (s == "af") return SweepParam::af;
  if (s == "sigma_blur") return SweepParam::sigma_blur;
  throw ConfigError("unknown sweep parameter '" + s + "' (gamma, p, p_ratio, epsilon, af, sigma_blur)");
}

inline ExperimentConfig with_param(ExperimentConfig c, SweepParam param, double v) {
  switch (param) {
    case SweepParam::gamma: c.solver.cfg.gamma = v; break;
    case SweepParam::p: c.basis.p = static_cast<Index>(std::llround(v)); break;
    case SweepParam::p_ratio: c.basis.p_ratio = v; break;
    case SweepParam::epsilon: c.prior.error.epsilon = v; break;
    case SweepParam::af: c.op.acceleration = v; break;
    case SweepParam::sigma_blur: c.op.sigma = v; break;
  }
  return c;
}

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  Summary summary;
};

/// One run per grid value, all with the config's seed. Points run on a small
/// thread pool; a failing point is recorded and the sweep continues.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepParam param, const std::vector<double>& grid,
                                   unsigned threads = 0) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      rows[i].value = grid[i];
      try {
        ExperimentConfig c = with_param(base, param, grid[i]);
        c.theory = false;
        rows[i].summary = run(c).summary;
        rows[i].ok = true;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(grid.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

inline std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
  const std::string header = Summary::header();
  const auto empty_fields = static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
  std::ostringstream os;
  os << std::setprecision(17) << "param,value,status," << header << ",error\n";
  for (const SweepRow& r : rows) {
    os << param << ',' << r.value << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) os << r.summary.row();
    else os << std::string(empty_fields, ',');
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << ',' << err << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Theory check
// ---------------------------------------------------------------------------

enum class CheckStatus { pass = 0, fail = 1, inconclusive = 2 };

inline constexpr double kFixedPointTolerance = 1e-9;

inline std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

struct TheoryCheckResult {
  CheckStatus status = CheckStatus::pass;
  CheckStatus contraction = CheckStatus::pass;  // (a)
  CheckStatus bound = CheckStatus::pass;        // (b)
  CheckStatus ciz = CheckStatus::pass;          // (c)
  std::vector<std::string> lines;
  Theorem1Check theorem1;
  Theorem2Check theorem2;
  RunResult run;
};

/// (a) per-step ratio <= rho inside the CIZ when rho < 1, for the plain
/// iteration with D(x*) = x*; (b) the unsquared Theorem 2 bound at every iteration when the
/// RIP constants are below 1; (c) a non-empty CIZ when ||N|| <= 0.1 ||S x*||.
/// Unmet preconditions make a check inconclusive rather than failed.
inline TheoryCheckResult theory_check(ExperimentConfig c) {
  if (c.prior.kind != PriorKind::oracle) throw ConfigError("theory-check needs an oracle prior");
  const std::string method = c.basis.method.empty() ? default_basis_method(c) : c.basis.method;
  if (method != "qr-random" && method != "fourier-complement")
    throw ConfigError("theory-check needs a qr-random or fourier-complement basis, got " + method);
  if (c.solver.kind != SolverKind::pnp_fista) throw ConfigError("theory-check runs the pnp_fista solver");
  c.theory = true;
  TheoryCheckResult out;
  out.run = run(c);
  const TheoryReport& t = *out.run.theory;
  const SolverTrace& tr = out.run.npn;
  std::ostringstream os;

  const bool plain = c.solver.cfg.momentum == Momentum::none;
  out.theorem1 = check_theorem1(tr, t.ciz, t.rho.rho, plain);
  if (t.ciz.empty()) {
    os << "theorem1: pass (vacuous, empty CIZ)";
  } else if (!plain) {
    out.contraction = CheckStatus::inconclusive;
    os << "theorem1: inconclusive (momentum iteration; the rate covers the plain iteration)";
  } else if (t.fixed_point_residual > kFixedPointTolerance) {
    out.contraction = CheckStatus::inconclusive;
    os << "theorem1: inconclusive (x* is not a fixed point of the denoiser, relative residual "
       << t.fixed_point_residual << ")";
  } else if (!(t.rho.rho < 1.0) || !(t.delta_s < 1.0)) {
    out.contraction = CheckStatus::inconclusive;
    os << "theorem1: inconclusive (rho = " << t.rho.rho << ", delta_s = " << t.delta_s << ")";
  } else if (out.theorem1.violations > 0) {
    out.contraction = CheckStatus::fail;
    os << "theorem1: fail (" << out.theorem1.violations << " of " << out.theorem1.checked
       << " steps exceed rho = " << t.rho.rho << ", max ratio " << out.theorem1.max_ratio << ")";
  } else {
    os << "theorem1: pass (" << out.theorem1.checked << " steps in CIZ, max ratio " << out.theorem1.max_ratio
       << " <= rho = " << t.rho.rho << ")";
  }
  out.lines.push_back(os.str());
  os.str("");

  out.theorem2 = check_theorem2(tr, t.theorem2);
  if (!t.theorem2_certified()) {
    out.bound = CheckStatus::inconclusive;
    os << "theorem2: inconclusive (delta_s = " << t.delta_s_unscaled << ", delta_h = " << t.delta_h << ")";
  } else if (out.theorem2.violations > 0) {
    out.bound = CheckStatus::fail;
    os << "theorem2: fail (" << out.theorem2.violations << " of " << out.theorem2.checked << " iterations)";
  } else {
    os << "theorem2: pass (" << out.theorem2.checked << " iterations, max excess " << out.theorem2.max_excess << ")";
  }
  out.lines.push_back(os.str());
  os.str("");

  const double s_norm = (out.run.instance.basis.S * out.run.instance.x_true).norm();
  if (t.n_norm <= 0.1 * s_norm) {
    out.ciz = t.ciz.empty() ? CheckStatus::fail : CheckStatus::pass;
    os << "ciz: " << to_string(out.ciz) << " (" << t.ciz.size() << " iterations, ||N|| = " << t.n_norm << ")";
  } else {
    os << "ciz: pass (vacuous, ||N|| = " << t.n_norm << " > 0.1 ||S x*||; " << t.ciz.size() << " iterations)";
  }
  out.lines.push_back(os.str());

  for (CheckStatus s : {out.contraction, out.bound, out.ciz}) {
    if (s == CheckStatus::fail) out.status = CheckStatus::fail;
    else if (s == CheckStatus::inconclusive && out.status == CheckStatus::pass) out.status = CheckStatus::inconclusive;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy R^3 experiment
// ---------------------------------------------------------------------------

struct ToyReport {
  double in_distribution_error = 0.0;  // NPN net, held-out disk points
  double ood_error = 0.0;              // NPN net on the grid
  double direct_in_distribution_error = 0.0;  // ||S(x - F(Hx))|| relative, disk
  double direct_ood_error = 0.0;              // same on the grid
  Index k = 0;
  Index k_direct = 0;
  Index params_npn = 0;
  Index params_direct = 0;
  double reconstruction_error = 0.0;  // NPN solve with the trained net, held-out point
  Mat holdout;
  Mat grid;
  TwoLayerNet npn_net;
  TwoLayerNet direct_net;
  ToyGeometry geometry;

  std::string to_text() const {
    std::ostringstream os;
    os << std::setprecision(17) << "k = " << k << "\nk_direct = " << k_direct << "\nparams_npn = " << params_npn
       << "\nparams_direct = " << params_direct << "\nin_distribution_error = " << in_distribution_error
       << "\nood_error = " << ood_error << "\ndirect_in_distribution_error = " << direct_in_distribution_error
       << "\ndirect_ood_error = " << direct_ood_error << "\nreconstruction_error = " << reconstruction_error << "\n";
    return os.str();
  }
};

inline Index net_parameters(const TwoLayerNet& n) { return n.W.size() + n.b.size() + n.V.size(); }

inline double projected_direct_error(const TwoLayerNet& direct, const Mat& h, const Mat& s, const Mat& x) {
  const Mat proj_err = s * (x - direct.predict_batch(h * x));
  const double den = (s * x).squaredNorm();
  return den > 0.0 ? std::sqrt(proj_err.squaredNorm() / den) : std::sqrt(proj_err.squaredNorm());
}

/// Trains G on Hx -> Sx and a parameter-matched direct net on Hx -> x over
/// the unit disk of the toy plane, then evaluates both in distribution and on
/// the out-of-distribution grid.
inline ToyReport toy3d(const ExperimentConfig& c) {
  const ToyConfig& t = c.toy_cfg;
  ToyReport r;
  r.geometry = toy_geometry(c.seed);
  const Mat& h = r.geometry.H;
  const Mat& s = r.geometry.S;
  const Mat train = toy3d_disk(t.train_count, t.radius, r.geometry.plane, c.seed + 1);
  r.holdout = toy3d_disk(t.holdout_count, t.radius, r.geometry.plane, c.seed + 2);
  r.grid = toy3d_grid(t.grid_per_axis, t.ood_lo, t.ood_hi, r.geometry.plane);

  TrainParams tp = t.train;
  tp.seed = c.seed;
  r.k = t.k;
  r.npn_net = make_net(2, 1, t.k, t.activation, c.seed);
  train_regression(r.npn_net, h * train, s * train, tp);
  r.params_npn = net_parameters(r.npn_net);

  // hidden width k' with k'(m + 1 + n) closest to k(m + 1 + p)
  r.k_direct = t.k_direct > 0 ? t.k_direct
                              : std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(r.params_npn) / 6.0)));
  r.direct_net = make_net(2, 3, r.k_direct, t.activation, c.seed + 1);
  train_regression(r.direct_net, h * train, train, tp);
  r.params_direct = net_parameters(r.direct_net);

  r.in_distribution_error = relative_projection_error(r.npn_net, h * r.holdout, s * r.holdout);
  r.ood_error = relative_projection_error(r.npn_net, h * r.grid, s * r.grid);
  r.direct_in_distribution_error = projected_direct_error(r.direct_net, h, s, r.holdout);
  r.direct_ood_error = projected_direct_error(r.direct_net, h, s, r.grid);

  const Vec x = r.holdout.col(0);
  const SensingOperator op(DenseRandom{h});
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.L = 500;
  const NpnTerm term{&s, r.npn_net.predict(h * x)};
  r.reconstruction_error = (solve_pnp_fista(op, h * x, Identity{}, cfg, &term).x_hat - x).norm();
  return r;
}

inline std::string toy_points_csv(const ToyReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "split,x0,x1,x2,sx,g,direct_sx\n";
  auto emit = [&](const char* split, const Mat& pts) {
    const Mat hx = r.geometry.H * pts;
    const Mat g = r.npn_net.predict_batch(hx);
    const Mat d = r.geometry.S * r.direct_net.predict_batch(hx);
    const Mat sx = r.geometry.S * pts;
    for (Index i = 0; i < pts.cols(); ++i)
      os << split << ',' << pts(0, i) << ',' << pts(1, i) << ',' << pts(2, i) << ',' << sx(0, i) << ',' << g(0, i)
         << ',' << d(0, i) << '\n';
  };
  emit("holdout", r.holdout);
  emit("ood", r.grid);
  return os.str();
}

}  // namespace npn
