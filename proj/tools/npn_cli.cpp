#include "npn/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace fs = std::filesystem;

namespace {

enum Exit { kPass = 0, kFail = 1, kInconclusive = 2, kConfigError = 3 };

int report_error(const std::string& config, const std::exception& e, int code) {
  std::cerr << "npn: " << config << ": " << e.what() << "\n";
  return code;
}

// Module errors raised while assembling a run come from the config values.
template <class F>
int guarded(const std::string& config, F&& body) {
  try {
    return body();
  } catch (const npn::ConfigError& e) {
    return report_error(config, e, kConfigError);
  } catch (const npn::InvalidParameter& e) {
    return report_error(config, e, kConfigError);
  } catch (const npn::DimensionError& e) {
    return report_error(config, e, kConfigError);
  } catch (const npn::InfeasibleDimension& e) {
    return report_error(config, e, kConfigError);
  } catch (const std::exception& e) {
    return report_error(config, e, kFail);
  }
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out) {
  return guarded(path, [&] {
    npn::ExperimentConfig c = npn::load_config(path);
    if (seed) c.seed = *seed;
    const npn::RunResult r = npn::run(c);
    const fs::path dir = npn::resolve_output_dir(c, out);
    npn::write_run(r, dir);
    std::cout << npn::Summary::header() << "\n" << r.summary.row() << "\n";
    std::cout << "wrote " << dir.string() << "\n";
    return int(kPass);
  });
}

int cmd_sweep(const std::string& path, const std::string& param, const std::vector<double>& grid,
              const std::string& out, unsigned threads) {
  return guarded(path, [&] {
    const npn::ExperimentConfig c = npn::load_config(path);
    const npn::SweepParam p = npn::parse_sweep_param(param);
    const auto rows = npn::sweep(c, p, grid, threads);
    const fs::path dir = npn::resolve_output_dir(c, out);
    fs::create_directories(dir);
    const std::string csv = npn::sweep_csv(param, rows);
    npn::write_text(dir / "summary.csv", csv);
    std::cout << csv;
    const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.ok; });
    return int(any_failed ? kFail : kPass);
  });
}

int cmd_theory_check(const std::string& path, const std::string& out) {
  return guarded(path, [&] {
    const npn::ExperimentConfig c = npn::load_config(path);
    const npn::TheoryCheckResult r = npn::theory_check(c);
    const fs::path dir = npn::resolve_output_dir(c, out);
    npn::write_run(r.run, dir);
    for (const auto& line : r.lines) std::cout << line << "\n";
    std::cout << "result: " << npn::to_string(r.status) << "\n";
    return static_cast<int>(r.status);
  });
}

int cmd_toy3d(const std::string& path, const std::string& out) {
  return guarded(path, [&] {
    npn::ExperimentConfig c = npn::load_config(path);
    if (!c.toy) throw npn::ConfigError("toy3d needs problem = \"toy3d\"");
    const npn::ToyReport r = npn::toy3d(c);
    const npn::RunResult oracle = npn::run(c);
    const fs::path dir = npn::resolve_output_dir(c, out);
    npn::write_run(oracle, dir);
    npn::write_text(dir / "toy_report.txt", r.to_text());
    npn::write_text(dir / "toy_points.csv", npn::toy_points_csv(r));
    std::cout << r.to_text();
    std::cout << "oracle_run_npn_rel_err = " << oracle.summary.npn_err << "\n";
    std::cout << "oracle_run_baseline_rel_err = " << oracle.summary.baseline_err << "\n";
    return int(kPass);
  });
}

int cmd_inspect_basis(const std::string& path, const std::string& out) {
  return guarded(path, [&] {
    const npn::ExperimentConfig c = npn::load_config(path);
    const npn::Instance inst = npn::build_instance(c);
    const npn::Mat h = npn::to_dense(*inst.op);
    const npn::Mat samples = npn::training_signals(c, inst, 8, 30000);
    const npn::OrthogonalityReport rep = npn::orthogonality_report(inst.basis.S, h, samples);
    std::ostringstream os;
    os << std::setprecision(17) << "method = " << npn::to_string(inst.basis.method) << "\nn = " << h.cols()
       << "\nm_eff = " << h.rows() << "\np = " << inst.basis.S.rows() << "\northo_residual = " << rep.ortho_residual
       << "\nrow_gram_residual = " << rep.row_gram_residual << "\nrank_of_stack = " << rep.rank_of_stack
       << "\ninvertibility_loss = " << rep.invertibility_loss << "\n";
    const fs::path dir = npn::resolve_output_dir(c, out);
    fs::create_directories(dir);
    std::ofstream basis(dir / "basis.txt");
    npn::save_basis(basis, inst.basis);
    npn::write_text(dir / "basis_report.txt", os.str());
    std::cout << os.str();
    return int(kPass);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NPN experiments: null-space projection priors for linear inverse problems"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string param;
  std::vector<double> grid;
  unsigned threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides NPN_OUT_DIR and the config)");
  };

  CLI::App* run = app.add_subcommand("run", "baseline and NPN solves on one measurement");
  add_common(run);
  run->add_option("--seed", seed, "override the config seed");

  CLI::App* sweep = app.add_subcommand("sweep", "one run per grid value");
  add_common(sweep);
  sweep->add_option("--param", param, "gamma, p, p_ratio, epsilon, af or sigma_blur")->required();
  sweep->add_option("--grid", grid, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--threads", threads, "worker threads (0: hardware concurrency)");

  CLI::App* check = app.add_subcommand("theory-check", "empirical checks of the convergence theorems");
  add_common(check);

  CLI::App* toy = app.add_subcommand("toy3d", "R^3 toy: NPN net against a direct reconstruction net");
  add_common(toy);

  CLI::App* inspect = app.add_subcommand("inspect-basis", "build S and report its orthogonality to H");
  add_common(inspect);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (run->parsed()) return cmd_run(config, seed, out);
  if (sweep->parsed()) return cmd_sweep(config, param, grid, out, threads);
  if (check->parsed()) return cmd_theory_check(config, out);
  if (toy->parsed()) return cmd_toy3d(config, out);
  return cmd_inspect_basis(config, out);
}
