#pragma once

#include <span>

#include "bglgm/common.hpp"
#include "bglgm/covariance.hpp"

namespace bglgm {

/// Priors: beta ~ N(mu, Omega); sigma ~ Exponential(sigma_rate);
/// tau ~ Exponential(tau_rate); phi ~ Gamma(phi_shape, scale = phi_scale km).
struct PriorSpec {
  Vector mu;
  Matrix omega;
  double sigma_rate = 0.5;
  double tau_rate = 0.5;
  double phi_shape = 3.0;
  double phi_scale = 35.0;

  /// mu = 0, Omega = 25 I.
  static PriorSpec defaults(Eigen::Index p = 4);

  void validate() const;

  /// Joint log density of (sigma, phi, tau), each on its natural scale.
  double log_density_theta(double sigma, double phi, double tau) const;
};

/// Continuity-corrected per-site mode of the binomial likelihood on the
/// logit scale and the curvature -d^2/dt^2 log f(y_i | t_i) there.
struct ProfileCenter {
  Vector t_hat;
  Vector lambda;
};

/// t_hat_i = logit((y_i + 0.5) / (n_i + 1)); lambda_i = n_i p_i (1 - p_i).
ProfileCenter profile_center(std::span<const int> y, std::span<const int> n);

/// Everything the whitening maps need for one value of theta.
///
///   sigma_tilde = (Sigma^-1 + Lambda)^-1
///   omega_tilde = (Omega^-1 + X^T (Sigma^-1 - Sigma^-1 sigma_tilde Sigma^-1) X)^-1
///
/// The t-centre is t_offset + t_gain beta, where t_offset = sigma_tilde Lambda t_hat
/// and t_gain = sigma_tilde Sigma^-1 X. The beta centre is
/// omega_tilde (X^T Sigma^-1 sigma_tilde Lambda t_hat + Omega^-1 mu).
/// Square roots are lower Cholesky factors.
struct ConditioningMatrices {
  Matrix sigma_tilde;
  Matrix sigma_tilde_chol;
  Matrix omega_tilde;
  Matrix omega_tilde_chol;
  double log_det_half_sigma_tilde = 0.0;
  double log_det_half_omega_tilde = 0.0;

  Vector t_offset;
  Matrix t_gain;
  Vector beta_center;

  Vector t_center(const Vector& beta) const { return t_offset + t_gain * beta; }
};

/// `sigma` must include the nugget on its diagonal. Throws SingularMatrixError
/// when any of the factorizations fails.
ConditioningMatrices conditioning_matrices(const CovMatrix& sigma, const Matrix& X,
                                           const ProfileCenter& center,
                                           const PriorSpec& prior);

/// theta_tilde = (log sigma, log(sigma^2 / phi^(2 kappa)), log tau^2).
Eigen::Vector3d theta_to_tilde(const CovarianceModel& theta);
CovarianceModel tilde_to_theta(const Eigen::Vector3d& theta_tilde, double kappa);

/// log |d(sigma, phi, tau) / d(theta_tilde)|.
double theta_log_jacobian(const CovarianceModel& theta);

struct ModelState {
  Vector t;
  Vector beta;
  CovarianceModel theta;
};

struct TransformedState {
  Vector t_tilde;
  Vector beta_tilde;
  Eigen::Vector3d theta_tilde = Eigen::Vector3d::Zero();
};

/// `cm` must have been built for `state.theta`.
TransformedState whiten(const ModelState& state, const ConditioningMatrices& cm);
ModelState unwhiten(const TransformedState& state, const ConditioningMatrices& cm,
                    double kappa);

}  // namespace bglgm
