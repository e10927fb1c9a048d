// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include "npn/experiment.hpp"

#include "../oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

namespace {

using npn::Index;
using npn::Json;
using npn::Mat;
using npn::Vec;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

npn::ExperimentConfig cfg(const Json& j) { return npn::parse_config(j); }

Json with_seed(Json j, int seed) {
  j["seed"] = seed;
  return j;
}

// ---------------------------------------------------------------------------

npn::OperatorParams operator_params(npn::Problem problem, int s) {
  npn::OperatorParams p;
  switch (problem) {
    case npn::Problem::cs:
      p.n = 50 + 5 * (s % 10);
      p.ratio = 0.1 + 0.02 * (s % 5);
      p.entries = s % 2 ? npn::CsEntries::binary : npn::CsEntries::gaussian;
      p.normalization = s % 3 ? npn::RowNormalization::none : npn::RowNormalization::unit_rows;
      break;
    case npn::Problem::mri: {
      const npn::MaskKind masks[] = {npn::MaskKind::radial, npn::MaskKind::cartesian, npn::MaskKind::random,
                                     npn::MaskKind::lowpass};
      p.two_d = s % 4 != 3;
      p.height = p.two_d ? 16 : 1;
      p.width = p.two_d ? 16 : 64;
      p.transform = s % 2 ? npn::FrequencyTransform::dct : npn::FrequencyTransform::dft;
      p.mask = p.two_d ? masks[s % 4] : npn::MaskKind::random;
      p.acceleration = 2.0 + (s % 4);
      break;
    }
    case npn::Problem::blur: {
      const npn::KernelKind kernels[] = {npn::KernelKind::gaussian, npn::KernelKind::bilinear, npn::KernelKind::box,
                                         npn::KernelKind::delta};
      p.two_d = s % 5 != 4;
      p.height = p.two_d ? 16 : 1;
      p.width = p.two_d ? 16 : 64;
      p.kernel = kernels[s % 4];
      p.sigma = 0.6 + 0.05 * s;
      p.radius = p.kernel == npn::KernelKind::gaussian ? -1 : 1 + s % 3;
      break;
    }
    case npn::Problem::sr:
      p.height = p.width = 16;
      p.factor = s % 2 ? 2 : 4;
      p.kernel = s % 3 ? npn::KernelKind::gaussian : npn::KernelKind::box;
      p.sigma = 0.8 + 0.05 * s;
      p.radius = p.kernel == npn::KernelKind::box ? 1 : -1;
      break;
    case npn::Problem::ct:
      p.height = p.width = s % 2 ? 12 : 16;
      p.total_angles = 30;
      p.acquired_angles = 8 + s % 5;
      p.angle_selection = s % 3 ? npn::AngleSelection::limited : npn::AngleSelection::sparse;
      break;
  }
  return p;
}

Outcome criterion1() {
  Outcome o;
  double worst_dot = 0.0, worst_dense = 0.0;
  int cases = 0;
  for (npn::Problem problem :
       {npn::Problem::cs, npn::Problem::mri, npn::Problem::blur, npn::Problem::sr, npn::Problem::ct}) {
    for (int s = 0; s < 20; ++s) {
      const npn::SensingOperator op = npn::make_operator(problem, operator_params(problem, s), 1000 + s);
      const Vec x = oracle::randn(op.cols(), 7 * s + 1);
      const Vec u = oracle::randn(op.rows(), 7 * s + 2);
      const Vec ax = op.apply(x);
      const Vec atu = op.apply_adjoint(u);
      const double dot = std::abs(ax.dot(u) - x.dot(atu)) / (ax.norm() * u.norm());
      const Mat dense = npn::to_dense(op);
      const double fwd = (dense * x - ax).norm() / ax.norm();
      const double adj = (dense.transpose() * u - atu).norm() / atu.norm();
      worst_dot = std::max(worst_dot, dot);
      worst_dense = std::max({worst_dense, fwd, adj});
      ++cases;
    }
  }
  o.pass = worst_dot < 1e-10 && worst_dense < 1e-12;
  o.detail = std::to_string(cases) + " operators, max dot residual " + fmt(worst_dot) + " (< 1e-10), max dense gap " +
             fmt(worst_dense) + " (< 1e-12)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion2() {
  double worst_ortho = 0.0, worst_gram = 0.0;
  int qr = 0, fourier = 0;
  for (int s = 0; s < 20; ++s) {
    Mat h, sm;
    if (s % 2 == 0) {
      const Index n = 30 + 7 * s;
      const Index m = 3 + s;
      const Index p = 1 + (5 * s + 3) % (n - m);
      h = oracle::randn(m, n, 100 + s);
      sm = npn::qr_nullspace(h, p, 200 + s).S;
      ++qr;
    } else {
      const npn::SensingOperator op = npn::make_operator(npn::Problem::mri, operator_params(npn::Problem::mri, s), 300 + s);
      h = npn::to_dense(op);
      sm = npn::fourier_complement(op).S;
      ++fourier;
    }
    worst_ortho = std::max(worst_ortho, (sm * h.transpose()).norm());
    worst_gram = std::max(worst_gram, (sm * sm.transpose() - Mat::Identity(sm.rows(), sm.rows())).norm());
  }
  Outcome o;
  o.pass = worst_ortho < 1e-9 && worst_gram < 1e-9;
  o.detail = std::to_string(qr) + " qr + " + std::to_string(fourier) + " fourier bases, max ||S H^T||_F " +
             fmt(worst_ortho) + ", max ||S S^T - I||_F " + fmt(worst_gram) + " (both < 1e-9)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
  double worst = 0.0, worst_oracle = 0.0;
  for (int s = 0; s < 10; ++s) {
    npn::OperatorParams p;
    p.n = 100;
    p.m = 10;
    p.entries = npn::CsEntries::gaussian;
    p.normalization = npn::RowNormalization::unit_rows;
    const npn::SensingOperator op = npn::make_operator(npn::Problem::cs, p, 40 + s);
    const Mat h = npn::to_dense(op);
    const Mat sm = npn::qr_nullspace(h, 90, 50 + s).S;
    const Vec x = oracle::randn(100, 60 + s);
    const Vec y = op.apply(x);
    const npn::OraclePrior prior(sm, npn::ErrorSpec::zero(), op.rows());
    const npn::NpnTerm term{&sm, prior.predict(y, x)};
    npn::SolverConfig c;
    c.gamma = 1.0;
    c.L = 1500;
    const Vec x_hat = npn::solve_pnp_fista(op, y, npn::Identity{}, c, &term).x_hat;

    Mat a(100, 100);
    a << h, sm;
    Vec rhs(100);
    rhs << y, sm * x;
    const Vec x_oracle = Eigen::CompleteOrthogonalDecomposition<Mat>(a).solve(rhs);
    worst = std::max(worst, (x_hat - x).norm());
    worst_oracle = std::max(worst_oracle, (x_hat - x_oracle).norm());
  }
  Outcome o;
  o.pass = worst < 1e-6 && worst_oracle < 1e-6;
  o.detail = "10 instances (n=100, m=10, p=90), max ||x_hat - x*|| " + fmt(worst) +
             ", max distance to stacked pseudoinverse " + fmt(worst_oracle) + " (< 1e-6)";
  return o;
}

// ---------------------------------------------------------------------------

Json contracting(int seed) {
  return with_seed(Json::parse(R"({
    "problem": "mri",
    "operator": {"two_d": false, "width": 40, "transform": "dct", "mask": "random", "acceleration": 4,
                 "gain": 0.31622776601683794},
    "signal": {"kind": "piecewise", "segments": 5},
    "basis": {"method": "fourier-complement"},
    "prior": {"kind": "oracle", "error": "zero"},
    "solver": {"kind": "pnp_fista", "alpha": 10, "gamma": 0.05, "momentum": "none", "L": 30}})"),
                   seed);
}

double ric_brute(const Mat& m, const std::vector<Vec>& iterates, const Vec& x) {
  double worst = 0.0;
  for (std::size_t l = 1; l < iterates.size(); ++l) {
    const Vec e = iterates[l] - x;
    if (e.squaredNorm() == 0.0) continue;
    worst = std::max(worst, std::abs((m * e).squaredNorm() / e.squaredNorm() - 1.0));
  }
  return worst;
}

Outcome criterion4() {
  Outcome o;
  int steps = 0;
  double max_step = 0.0, max_rho = 0.0, npn_mean = 0.0, base_mean = 0.0;
  int ordered = 0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    const npn::RunResult r = npn::run(cfg(contracting(seed)));
    const Mat h = npn::to_dense(*r.instance.op);
    const Mat& sm = r.instance.basis.S;
    const Vec& x = r.instance.x_true;
    const double alpha = r.npn.alpha, gamma = r.config.solver.cfg.gamma;
    const Mat s_eff = std::sqrt(gamma) * sm;
    const Mat t = Mat::Identity(h.cols(), h.cols()) - alpha * (h.transpose() * h + s_eff.transpose() * s_eff);
    const double ds = ric_brute(s_eff, r.npn.iterates, x);
    const double rho = oracle::sigma_max(t) + (1.0 + ds) * oracle::sigma_max(s_eff);
    max_rho = std::max(max_rho, rho);
    if (!(rho < 1.0) || !(ds < 1.0) || std::abs(rho - r.theory->rho.rho) > 1e-9) {
      o.pass = false;
      o.detail = "seed " + std::to_string(seed) + ": rho " + fmt(rho) + " (report " + fmt(r.theory->rho.rho) +
                 "), delta_s " + fmt(ds);
      return o;
    }
    const double n_norm = (r.g - sm * x).norm();
    double npn_sum = 0.0, base_sum = 0.0;
    int count = 0;
    for (std::size_t l = 0; l + 1 < r.npn.iterates.size(); ++l) {
      const Vec e = r.npn.iterates[l] - x;
      const double proj = (sm * e).squaredNorm();
      if (!(proj > 0.0 && n_norm * n_norm <= proj)) continue;
      const double ratio = (r.npn.iterates[l + 1] - x).squaredNorm() / e.squaredNorm();
      if (std::sqrt(ratio) > rho + 1e-9 || ratio > rho * rho + 1e-9) o.pass = false;
      max_step = std::max(max_step, std::sqrt(ratio));
      npn_sum += ratio;
      base_sum += r.baseline.rows[l + 1].ratio;
      ++count;
      ++steps;
    }
    if (count == 0) {
      o.pass = false;
      o.detail = "seed " + std::to_string(seed) + ": empty CIZ";
      return o;
    }
    npn_mean += npn_sum / count / seeds;
    base_mean += base_sum / count / seeds;
    ordered += npn_sum < base_sum;
  }
  o.pass = o.pass && ordered == seeds;
  o.detail = std::to_string(steps) + " CIZ steps over " + std::to_string(seeds) + " seeds, max step factor " +
             fmt(max_step) + " <= rho (max " + fmt(max_rho) + "); mean ratio NPN " + fmt(npn_mean) +
             " < baseline " + fmt(base_mean) + " in " + std::to_string(ordered) + "/" + std::to_string(seeds);
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
  Outcome o;
  int certified = 0, traces = 0, checked = 0;
  double max_excess = -1e300, final_phi = 0.0;
  for (int seed = 1; seed <= 3; ++seed) {
    for (const char* error : {"zero", "gaussian", "lipschitz"}) {
      for (const char* momentum : {"none", "fista"}) {
        Json j = contracting(seed);
        j["prior"] = {{"kind", "oracle"}, {"error", error}, {"epsilon", 0.01}, {"relative", true}, {"K", 0.5}};
        j["solver"]["momentum"] = momentum;
        const npn::RunResult r = npn::run(cfg(j));
        ++traces;
        const npn::TheoryReport& t = *r.theory;
        if (!t.theorem2_certified()) continue;
        ++certified;
        const Mat& sm = r.instance.basis.S;
        const Vec& x = r.instance.x_true;
        const double xn = x.norm();
        const double dh = t.delta_h, ds = ric_brute(sm, r.npn.iterates, x);
        const double k = (r.g - sm * x).norm() / ((1.0 + dh) * xn);
        const double a = r.npn.alpha;
        const double c1 = 1.0 / (2.0 * a) + (1.0 + ds) * (1.0 + ds) + k * (1.0 + dh) * (1.0 + ds) * xn;
        const double c2 = (1.0 + ds) + 1.0 / std::sqrt(2.0 * a);
        const auto& it = r.npn.iterates;
        for (std::size_t l = 0; l + 1 < it.size(); ++l) {
          const double phi_next = (r.g - sm * it[l + 1]).norm();
          const double bound = c1 * (x - it[l]).norm() + k * xn * (1.0 + dh) + c2 * (it[l] - it[l + 1]).norm();
          max_excess = std::max(max_excess, phi_next - bound);
          if (phi_next > bound + 1e-9) o.pass = false;
          ++checked;
        }
        if (std::string(error) == "zero" && std::string(momentum) == "none")
          final_phi = std::max(final_phi, (r.g - sm * it.back()).squaredNorm());
      }
    }
  }
  o.pass = o.pass && certified > 0 && final_phi < 1e-10;
  o.detail = std::to_string(certified) + "/" + std::to_string(traces) + " traces certified, " +
             std::to_string(checked) + " iterations, max(phi - bound) " + fmt(max_excess) +
             "; eps=0 final phi " + fmt(final_phi) + " (< 1e-10)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  const char* problems[] = {
      R"({"problem": "cs", "operator": {"n": 64, "ratio": 0.25, "entries": "gaussian", "normalization": "unit_rows"},
          "signal": {"kind": "sparse", "k": 6}, "denoiser": {"kind": "dct-soft", "tau": 0.002}})",
      R"({"problem": "mri", "operator": {"height": 16, "width": 16, "mask": "random", "acceleration": 4},
          "signal": {"kind": "piecewise", "segments": 4}, "denoiser": {"kind": "tv", "lambda": 0.005}})",
      R"({"problem": "blur", "operator": {"height": 16, "width": 16, "sigma": 1.5},
          "signal": {"kind": "bumps", "count": 4}, "denoiser": {"kind": "tv", "lambda": 0.005}})",
      R"({"problem": "sr", "operator": {"height": 16, "width": 16, "factor": 2, "sigma": 1.0},
          "signal": {"kind": "bumps", "count": 4}, "denoiser": {"kind": "tv", "lambda": 0.005}})",
      R"({"problem": "ct", "operator": {"height": 16, "width": 16, "total_angles": 36, "acquired_angles": 12},
          "signal": {"kind": "shepp_logan"}, "denoiser": {"kind": "tv", "lambda": 0.005}})"};
  int wins = 0, total = 0, out_of_range = 0;
  double gain = 0.0;
  for (const char* p : problems) {
    for (int seed = 1; seed <= 5; ++seed) {
      for (bool noisy : {false, true}) {
        Json j = Json::parse(p);
        j["seed"] = seed;
        j["prior"] = {{"kind", "oracle"}, {"error", "gaussian"}, {"epsilon", 0.008}, {"relative", true}};
        j["solver"] = {{"kind", "pnp_fista"}, {"gamma", 1.0}, {"L", 100}};
        j["theory"] = false;
        if (noisy) j["snr_db"] = 5.0;
        const npn::RunResult r = npn::run(cfg(j));
        const double n_norm = (r.g - r.instance.basis.S * r.instance.x_true).norm();
        if (n_norm > 0.01 * (r.instance.basis.S * r.instance.x_true).norm()) ++out_of_range;
        const double b = npn::psnr(r.baseline.x_hat, r.instance.x_true, r.instance.x_true.cwiseAbs().maxCoeff());
        const double n = npn::psnr(r.npn.x_hat, r.instance.x_true, r.instance.x_true.cwiseAbs().maxCoeff());
        wins += n >= b;
        gain += n - b;
        ++total;
      }
    }
  }
  Outcome o;
  o.pass = out_of_range == 0 && wins >= (9 * total + 9) / 10 && gain / total > 0.5;
  o.detail = "NPN >= baseline in " + std::to_string(wins) + "/" + std::to_string(total) + ", mean gain " +
             fmt(gain / total) + " dB, instances with ||N|| > 0.01 ||S x*||: " + std::to_string(out_of_range);
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion7() {
  const int seeds = 40;
  double npn_ood = 0.0, direct_ood = 0.0, worst_in = 0.0;
  int wins = 0;
  for (int seed = 1; seed <= seeds; ++seed) {
    npn::ExperimentConfig c = cfg(Json{{"problem", "toy3d"}, {"seed", seed}});
    const npn::ToyReport r = npn::toy3d(c);
    const Mat& s = r.geometry.S;
    const Mat& h = r.geometry.H;
    const Mat sx = s * r.grid;
    const double npn_err = std::sqrt((sx - r.npn_net.predict_batch(h * r.grid)).squaredNorm() / sx.squaredNorm());
    const double direct_err =
        std::sqrt((sx - s * r.direct_net.predict_batch(h * r.grid)).squaredNorm() / sx.squaredNorm());
    const Mat sh = s * r.holdout;
    const double in_err = std::sqrt((sh - r.npn_net.predict_batch(h * r.holdout)).squaredNorm() / sh.squaredNorm());
    worst_in = std::max(worst_in, in_err);
    npn_ood += npn_err / seeds;
    direct_ood += direct_err / seeds;
    wins += direct_err > npn_err;
  }
  Outcome o;
  o.pass = worst_in < 0.2 && direct_ood > npn_ood;
  o.detail = "max in-distribution error " + fmt(worst_in) + " (< 0.2); OOD grid mean over " + std::to_string(seeds) +
             " seeds: direct " + fmt(direct_ood) + " vs NPN " + fmt(npn_ood) + " (direct worse in " +
             std::to_string(wins) + "/" + std::to_string(seeds) + " seeds)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion8() {
  const auto c = cfg(Json::parse(R"({
    "problem": "blur", "seed": 3,
    "operator": {"height": 16, "width": 16, "sigma": 1.5},
    "signal": {"kind": "bumps", "count": 4},
    "prior": {"kind": "oracle", "error": "gaussian", "relative": true},
    "denoiser": {"kind": "tv", "lambda": 0.005},
    "solver": {"gamma": 1.0, "L": 100}})"));
  const std::vector<double> grid{0.001, 0.01, 0.03, 0.1, 0.3, 1.0};
  const auto rows = npn::sweep(c, npn::SweepParam::epsilon, grid);
  std::vector<double> psnr;
  bool monotone = true, ok = true;
  std::string cizs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ok = ok && rows[i].ok;
    psnr.push_back(rows[i].summary.npn_psnr);
    cizs += (i ? "," : "") + std::to_string(rows[i].summary.ciz_size);
    if (i > 0 && rows[i].summary.ciz_size > rows[i - 1].summary.ciz_size) monotone = false;
  }
  const double rho = oracle::spearman(grid, psnr);
  Outcome o;
  o.pass = ok && rho <= -0.8 && monotone;
  o.detail = "Spearman(eps, PSNR) " + fmt(rho) + " (<= -0.8), CIZ sizes " + cizs +
             (monotone ? " non-increasing" : " not monotone");
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion9() {
  const std::vector<double> grid{0.1, 0.3, 0.5};
  const int seeds = 4;
  std::vector<double> mean(grid.size(), 0.0);
  int monotone_seeds = 0;
  bool ok = true;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto c = cfg(with_seed(Json::parse(R"({
      "problem": "cs",
      "operator": {"n": 64, "ratio": 0.25, "entries": "gaussian", "normalization": "unit_rows"},
      "signal": {"kind": "piecewise", "segments": 4},
      "basis": {"method": "learned"},
      "prior": {"kind": "net", "net": {"k": 16, "train_count": 400, "holdout_count": 200, "epochs": 150,
                "lr": 0.0005, "batch": 32, "lambda1": 1.0, "lambda2": 10.0}},
      "solver": {"gamma": 1.0, "L": 5}})"), seed));
    const auto rows = npn::sweep(c, npn::SweepParam::p_ratio, grid);
    bool mono = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ok = ok && rows[i].ok;
      mean[i] += rows[i].summary.holdout_error / seeds;
      if (i > 0 && rows[i].summary.holdout_error < rows[i - 1].summary.holdout_error) mono = false;
    }
    monotone_seeds += mono;
  }
  const double rho = oracle::spearman(grid, mean);
  Outcome o;
  o.pass = ok && rho >= 0.8;
  o.detail = "held-out relative projection error at p/n 0.1/0.3/0.5: " + fmt(mean[0]) + ", " + fmt(mean[1]) + ", " +
             fmt(mean[2]) + " (mean of " + std::to_string(seeds) + " seeds), Spearman " + fmt(rho) +
             " (>= 0.8); non-decreasing in " + std::to_string(monotone_seeds) + "/" + std::to_string(seeds) + " seeds";
  return o;
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion10() {
  Outcome o;
  int identical = 0, solvers = 0;
  const auto base = cfg(Json::parse(R"({
    "problem": "cs", "seed": 4,
    "operator": {"n": 64, "ratio": 0.25, "entries": "gaussian", "normalization": "unit_rows"},
    "signal": {"kind": "sparse", "k": 4},
    "prior": {"kind": "oracle", "error": "gaussian", "epsilon": 0.01, "relative": true},
    "denoiser": {"kind": "dct-soft", "tau": 0.001},
    "solver": {"L": 40, "lambda": 0.1}, "snr_db": 20})"));
  const npn::Instance inst = npn::build_instance(base);
  const npn::SensingOperator& op = *inst.op;
  const Vec y = npn::add_noise(op.apply(inst.x_true), base.snr_db, base.seed);
  const npn::NpnTerm term{&inst.basis.S, Vec::Constant(inst.basis.S.rows(), 0.3)};
  for (npn::SolverKind kind : {npn::SolverKind::pnp_fista, npn::SolverKind::red_fista, npn::SolverKind::pnp_admm,
                               npn::SolverKind::fista_sparsity}) {
    npn::SolverChoice choice = base.solver;
    choice.kind = kind;
    npn::SolverConfig c = choice.cfg;
    c.gamma = 0.0;
    npn::TraceContext ctx;
    ctx.x_true = inst.x_true;
    const auto with = npn::dispatch_solve(choice, op, y, base.denoiser, c, &term, ctx);
    const auto without = npn::dispatch_solve(choice, op, y, base.denoiser, c, nullptr, ctx);
    ++solvers;
    identical += npn::trace_csv(with) == npn::trace_csv(without) && with.x_hat == without.x_hat;
  }

  const auto rows = npn::sweep(base, npn::SweepParam::gamma, {0.0, 0.5});
  const npn::RunResult fresh = npn::run(base);
  const bool sweep_ok = rows[0].ok && rows[0].summary.npn_err == fresh.summary.baseline_err &&
                        rows[0].summary.npn_psnr == fresh.summary.baseline_psnr;

  const auto dir = std::filesystem::temp_directory_path() / "npn_acceptance_repro";
  std::filesystem::remove_all(dir);
  npn::write_run(npn::run(base), dir / "a");
  npn::write_run(npn::run(base), dir / "b");
  bool files_ok = true;
  for (const char* f : {"baseline_trace.csv", "npn_trace.csv", "theory.txt", "summary.csv"})
    files_ok = files_ok && !slurp(dir / "a" / f).empty() && slurp(dir / "a" / f) == slurp(dir / "b" / f);

  bool cli_ok = true;
#ifdef NPN_CLI_PATH
  {
    const auto config = dir / "config.json";
    std::ofstream(config) << R"({"problem": "cs", "seed": 4, "operator": {"n": 64, "ratio": 0.25},
      "prior": {"kind": "oracle", "error": "gaussian", "epsilon": 0.01, "relative": true},
      "solver": {"gamma": 1.0, "L": 30}, "snr_db": 10})";
    for (const char* sub : {"c1", "c2"}) {
      const std::string cmd = std::string(NPN_CLI_PATH) + " run --config " + config.string() + " --out " +
                              (dir / sub).string() + " > /dev/null 2>&1";
      cli_ok = cli_ok && std::system(cmd.c_str()) == 0;
    }
    cli_ok = cli_ok && !slurp(dir / "c1" / "npn_trace.csv").empty() &&
             slurp(dir / "c1" / "npn_trace.csv") == slurp(dir / "c2" / "npn_trace.csv") &&
             slurp(dir / "c1" / "baseline_trace.csv") == slurp(dir / "c2" / "baseline_trace.csv");
  }
#endif
  o.pass = identical == solvers && sweep_ok && files_ok && cli_ok;
  o.detail = "gamma=0 bit-identical for " + std::to_string(identical) + "/" + std::to_string(solvers) +
             " solvers, sweep row gamma=0 " + (sweep_ok ? "equals" : "differs from") + " fresh baseline, repeated runs " +
             (files_ok && cli_ok ? "byte-identical" : "differ");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "operator correctness", 10, criterion1},      {2, "null-space membership", 10, criterion2},
      {3, "exact-recovery oracle", 30, criterion3},     {4, "Theorem 1 contraction", 60, criterion4},
      {5, "Theorem 2 bound", 60, criterion5},           {6, "directional improvement", 300, criterion6},
      {7, "toy R^3 replication", 120, criterion7},      {8, "monotone degradation", 180, criterion8},
      {9, "p/n trend", 300, criterion9},                {10, "reduction and reproducibility", 30, criterion10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs, 3) << " s, limit " << c.limit_s << " s" << (in_time ? "" : ", exceeded") << "]"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
