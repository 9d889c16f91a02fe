#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bglgm/bglgm.hpp"

namespace bglgm::testing {

inline std::vector<Site> random_sites(int n, Rng& rng, double extent = 10.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Site> s(static_cast<std::size_t>(n));
  for (auto& site : s) site = {u(rng), u(rng)};
  return s;
}

inline Matrix random_design(int n, Rng& rng) {
  std::normal_distribution<double> z;
  Matrix X(n, 4);
  for (int i = 0; i < n; ++i) X.row(i) << 1.0, z(rng), -std::abs(z(rng)), std::abs(z(rng));
  return X;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

inline Matrix random_spd(Eigen::Index n, Rng& rng) {
  const Matrix a = Matrix::NullaryExpr(n, n, [&] { return std::normal_distribution<double>()(rng); });
  return a * a.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
}

/// Small synthetic dataset with `n` plots built directly (no generator).
inline SpatialDataset toy_dataset(int n, std::uint64_t seed, double extent = 50.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::uniform_int_distribution<int> total(5, 30);
  std::normal_distribution<double> z;
  SpatialDataset d;
  for (int i = 0; i < n; ++i) {
    PlotRecord r;
    r.id = "p" + std::to_string(i + 1);
    r.x = u(rng);
    r.y = u(rng);
    r.n_total = total(rng);
    r.y_hardwood = std::uniform_int_distribution<int>(0, r.n_total)(rng);
    r.elevation = 320.0 + 50.0 * z(rng);
    r.vegetation = 0.3 + 0.08 * z(rng);
    d.records.push_back(r);
  }
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bglgm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Maximizes the binomial-logit likelihood by gradient ascent with
/// backtracking. Deliberately shares no code with the IRLS fit.
inline Vector brute_force_logistic(const Matrix& X, std::span<const int> y,
                                   std::span<const int> n, int max_iter = 200000) {
  Vector beta = Vector::Zero(X.cols());
  const Vector yv = Eigen::Map<const Eigen::VectorXi>(y.data(), static_cast<Eigen::Index>(y.size())).cast<double>();
  const Vector nv = Eigen::Map<const Eigen::VectorXi>(n.data(), static_cast<Eigen::Index>(n.size())).cast<double>();
  auto loglik = [&](const Vector& b) {
    const Vector eta = X * b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += yv(i) * eta(i) - nv(i) * softplus(eta(i));
    return s;
  };
  double step = 1.0;
  double f = loglik(beta);
  for (int it = 0; it < max_iter; ++it) {
    const Vector eta = X * beta;
    Vector p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p(i) = inv_logit(eta(i));
    const Vector grad = X.transpose() * (yv - nv.cwiseProduct(p));
    if (grad.norm() < 1e-10) break;
    step *= 2.0;
    while (true) {
      const Vector cand = beta + step * grad;
      const double fc = loglik(cand);
      if (fc >= f + 1e-4 * step * grad.squaredNorm()) {
        beta = cand;
        f = fc;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) return beta;
    }
  }
  return beta;
}

}  // namespace bglgm::testing
