#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "bglgm/common.hpp"

namespace bglgm {

/// Spatial covariance parameters: marginal variance of the field U (sigma2),
/// nugget variance of Z (tau2), range phi in km and Matern shape kappa.
struct CovarianceModel {
  double sigma2 = 1.0;
  double tau2 = 0.0;
  double phi = 1.0;
  double kappa = 1.5;

  /// Throws ValidationError unless sigma2, tau2 >= 0 and phi, kappa > 0.
  void validate() const;
};

/// Matern correlation rho(h; phi, kappa)
///   = (h/phi)^kappa K_kappa(h/phi) / (2^(kappa-1) Gamma(kappa)),
/// with rho(0) = 1. Half-integer kappa in {0.5, 1.5, 2.5} use closed forms.
double matern_correlation(double h, double phi, double kappa);

/// Factorization failures report the first failing leading minor.
Matrix cholesky_lower(const Matrix& a);

/// Dense symmetric covariance matrix with a lazily computed lower Cholesky
/// factor.
class CovMatrix {
 public:
  CovMatrix() = default;
  explicit CovMatrix(Matrix values) : values_(std::move(values)) {}

  const Matrix& values() const { return values_; }
  Eigen::Index size() const { return values_.rows(); }

  /// Throws SingularMatrixError if the matrix is not positive definite.
  const Matrix& lower_factor() const;
  double log_determinant() const;
  Vector solve(const Vector& b) const;

 private:
  Matrix values_;
  mutable std::optional<Matrix> lower_;
};

Matrix correlation_matrix(std::span<const Site> sites, double phi, double kappa);
Matrix cross_correlation(std::span<const Site> rows, std::span<const Site> cols,
                         double phi, double kappa);

/// Sigma_ij = sigma2 rho(d_ij) off the diagonal; sigma2 (+ tau2 when
/// include_nugget) on it.
CovMatrix build_covariance_matrix(std::span<const Site> sites,
                                  const CovarianceModel& model,
                                  bool include_nugget);

/// Draws L z with L the lower factor of the nugget-free covariance.
Vector unconditional_field_draw(std::span<const Site> sites,
                                const CovarianceModel& model, std::uint64_t seed);
Vector unconditional_field_draw(std::span<const Site> sites,
                                const CovarianceModel& model, Rng& rng);

struct ConditionalMoments {
  Vector mean;
  Matrix covariance;
};

/// Moments of U(targets) given W = U(obs) + Z(obs).
ConditionalMoments conditional_field_moments(std::span<const Site> obs_sites,
                                             const Vector& obs_values,
                                             std::span<const Site> target_sites,
                                             const CovarianceModel& model);

struct ConditionalDraw {
  Vector mean;
  Vector draw;
};

ConditionalDraw conditional_field_draw(std::span<const Site> obs_sites,
                                       const Vector& obs_values,
                                       std::span<const Site> target_sites,
                                       const CovarianceModel& model,
                                       std::uint64_t seed);
ConditionalDraw conditional_field_draw(std::span<const Site> obs_sites,
                                       const Vector& obs_values,
                                       std::span<const Site> target_sites,
                                       const CovarianceModel& model, Rng& rng);

/// mean + S z where S S^T = covariance. Handles semidefinite covariance
/// (zero-variance directions) through a pivoted LDL^T factorization.
Vector draw_gaussian(const Vector& mean, const Matrix& covariance, Rng& rng);

}  // namespace bglgm
