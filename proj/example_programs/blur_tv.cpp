// Gaussian deblurring with a TV denoiser, driven by a JSON config. Prints the
// summary row and the first few iterations of both traces.

#include "npn/npn.hpp"

#include <iostream>

int main(int argc, char** argv) {
  npn::Json j = npn::Json::parse(R"({
    "problem": "blur", "seed": 3,
    "operator": {"height": 16, "width": 16, "sigma": 1.5},
    "signal": {"kind": "bumps", "count": 4},
    "prior": {"kind": "oracle", "error": "gaussian", "epsilon": 0.01, "relative": true},
    "denoiser": {"kind": "tv", "lambda": 0.005},
    "solver": {"kind": "pnp_fista", "gamma": 1.0, "L": 100},
    "snr_db": 20})");
  if (argc > 1) j["seed"] = std::stoi(argv[1]);

  const npn::RunResult r = npn::run(npn::parse_config(j));
  std::cout << npn::Summary::header() << "\n" << r.summary.row() << "\n\n";
  std::cout << "iter  baseline_psnr  npn_psnr\n";
  for (std::size_t l = 0; l < r.npn.rows.size(); l += 10)
    std::cout << l << "  " << r.baseline.rows[l].psnr << "  " << r.npn.rows[l].psnr << "\n";
  std::cout << "\n" << r.theory->to_text();
}
