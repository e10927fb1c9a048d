#pragma once

#include "npn/core.hpp"

namespace npn {

inline constexpr double kPsnrCap = 200.0;

/// 10 log10(peak^2 n / ||x_hat - x||^2), capped at 200 dB.
inline double psnr(const Vec& x_hat, const Vec& x_true, double peak = 1.0) {
  if (x_hat.size() != x_true.size()) throw DimensionError("psnr: length mismatch");
  if (!(peak > 0.0)) throw InvalidParameter("psnr: peak must be positive");
  const double err = (x_hat - x_true).squaredNorm();
  if (err == 0.0) return kPsnrCap;
  const double value = 10.0 * std::log10(peak * peak * static_cast<double>(x_true.size()) / err);
  return std::min(value, kPsnrCap);
}

}  // namespace npn
