#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bglgm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Planar site location, kilometres.
struct Site {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Site& a, const Site& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Thrown when a Cholesky factorization hits a non-positive pivot.
/// `minor()` is the 1-based order of the first failing leading minor.
class SingularMatrixError : public Error {
 public:
  explicit SingularMatrixError(long minor)
      : Error("matrix not positive definite: leading minor " +
              std::to_string(minor) + " is not positive"),
        minor_(minor) {}
  long minor() const { return minor_; }

 private:
  long minor_;
};

inline double inv_logit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// SplitMix64 finalizer; turns (master, stream) into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace bglgm
