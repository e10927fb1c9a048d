#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace npn {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error hierarchy. Every module throws a subclass of npn::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct InvalidParameter : Error {
  using Error::Error;
};
struct InfeasibleDimension : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  RankDeficient(const std::string& what, Index numerical_rank)
      : Error(what), rank(numerical_rank) {}
  Index rank;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Layout of a signal: a 1D vector or a row-major h x w image.
struct Shape {
  Index height = 1;
  Index width = 1;
  bool two_d = false;

  static Shape vector(Index n) { return {1, n, false}; }
  static Shape image(Index h, Index w) { return {h, w, true}; }

  Index size() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

struct Signal {
  Vec values;
  Shape shape;

  Signal() = default;
  Signal(Vec v, Shape s) : values(std::move(v)), shape(s) { validate(); }
  explicit Signal(Vec v) : values(std::move(v)), shape(Shape::vector(values.size())) { validate(); }

  Index size() const { return values.size(); }

  void validate() const {
    if (values.size() < 1) throw DimensionError("signal must have at least one entry");
    if (shape.size() != values.size())
      throw DimensionError("signal shape " + std::to_string(shape.height) + "x" +
                           std::to_string(shape.width) + " does not match length " +
                           std::to_string(values.size()));
    if (!values.allFinite()) throw InvalidParameter("signal has non-finite entries");
  }
};

/// Measurement vector. For operators that stack real and imaginary parts,
/// `values.size()` (m_eff) differs from the logical count `source_m`.
struct Measurement {
  Vec values;
  Index source_m = 0;

  Index size() const { return values.size(); }
};

inline std::string dims(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline Vec gaussian_vector(Index n, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Mat gaussian_matrix(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  // Column-major fill: the leading columns are a prefix of the stream.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace npn
