#include "bglgm/reparam.hpp"

#include <cmath>

namespace bglgm {

PriorSpec PriorSpec::defaults(Eigen::Index p) {
  PriorSpec prior;
  prior.mu = Vector::Zero(p);
  prior.omega = 25.0 * Matrix::Identity(p, p);
  return prior;
}

void PriorSpec::validate() const {
  if (mu.size() != omega.rows() || omega.rows() != omega.cols())
    throw ValidationError("prior: mu and Omega dimensions disagree");
  if (!(sigma_rate > 0.0) || !(tau_rate > 0.0) || !(phi_shape > 0.0) ||
      !(phi_scale > 0.0))
    throw ValidationError("prior: rates, shape and scale must be positive");
  if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + omega.norm()))
    throw ValidationError("prior: Omega is not symmetric");
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success)
    throw ValidationError("prior: Omega is not positive definite");
}

double PriorSpec::log_density_theta(double sigma, double phi, double tau) const {
  const double log_sigma = std::log(sigma_rate) - sigma_rate * sigma;
  const double log_tau = std::log(tau_rate) - tau_rate * tau;
  const double log_phi = -std::lgamma(phi_shape) - phi_shape * std::log(phi_scale) +
                         (phi_shape - 1.0) * std::log(phi) - phi / phi_scale;
  return log_sigma + log_tau + log_phi;
}

ProfileCenter profile_center(std::span<const int> y, std::span<const int> n) {
  if (y.size() != n.size()) throw ValidationError("profile_center: length mismatch");
  ProfileCenter c;
  const auto m = static_cast<Eigen::Index>(y.size());
  c.t_hat.resize(m);
  c.lambda.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (n[i] < 1 || y[i] < 0 || y[i] > n[i])
      throw ValidationError("profile_center: need 0 <= y <= n and n >= 1");
    const double p = (y[i] + 0.5) / (n[i] + 1.0);
    c.t_hat(i) = logit(p);
    c.lambda(i) = n[i] * p * (1.0 - p);
  }
  return c;
}

ConditioningMatrices conditioning_matrices(const CovMatrix& sigma, const Matrix& X,
                                           const ProfileCenter& center,
                                           const PriorSpec& prior) {
  const Eigen::Index n = sigma.size();
  if (X.rows() != n || center.t_hat.size() != n || prior.mu.size() != X.cols())
    throw ValidationError("conditioning_matrices: dimension mismatch");
  const Matrix& s = sigma.values();
  const Vector d = center.lambda.cwiseSqrt();

  // B = I + D Sigma D has eigenvalues >= 1, so its factor is well conditioned.
  Matrix b = d.asDiagonal() * s * d.asDiagonal();
  b.diagonal().array() += 1.0;
  const Matrix lb = cholesky_lower(b);
  const auto lb_view = lb.triangularView<Eigen::Lower>();

  // sigma_tilde = Sigma - Sigma D B^-1 D Sigma = Sigma - V^T V.
  const Matrix v = lb_view.solve(d.asDiagonal() * s);
  // (Sigma + Lambda^-1)^-1 = D B^-1 D, so X^T(...)X = W^T W.
  const Matrix w = lb_view.solve(d.asDiagonal() * X);

  ConditioningMatrices cm;
  cm.sigma_tilde = s;
  cm.sigma_tilde.noalias() -= v.transpose() * v;
  cm.sigma_tilde = 0.5 * (cm.sigma_tilde + cm.sigma_tilde.transpose());
  cm.sigma_tilde_chol = cholesky_lower(cm.sigma_tilde);

  const Eigen::LLT<Matrix> omega_llt(prior.omega);
  const Eigen::Index p = X.cols();
  Matrix omega_tilde_inv = omega_llt.solve(Matrix::Identity(p, p));
  omega_tilde_inv.noalias() += w.transpose() * w;
  omega_tilde_inv = 0.5 * (omega_tilde_inv + omega_tilde_inv.transpose());
  const Matrix l_inv = cholesky_lower(omega_tilde_inv);
  const Matrix l_inv_inv =
      l_inv.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  cm.omega_tilde = l_inv_inv.transpose() * l_inv_inv;
  cm.omega_tilde_chol = cholesky_lower(cm.omega_tilde);

  cm.log_det_half_sigma_tilde = cm.sigma_tilde_chol.diagonal().array().log().sum();
  cm.log_det_half_omega_tilde = cm.omega_tilde_chol.diagonal().array().log().sum();

  const Vector lambda_t = center.lambda.cwiseProduct(center.t_hat);
  cm.t_offset = cm.sigma_tilde * lambda_t;
  cm.t_gain = X;
  cm.t_gain.noalias() -= v.transpose() * w;
  cm.beta_center = cm.omega_tilde *
                   (cm.t_gain.transpose() * lambda_t + omega_llt.solve(prior.mu));
  return cm;
}

Eigen::Vector3d theta_to_tilde(const CovarianceModel& theta) {
  if (!(theta.sigma2 > 0.0) || !(theta.tau2 > 0.0) || !(theta.phi > 0.0))
    throw ValidationError("theta transform needs sigma2, tau2, phi > 0");
  return {0.5 * std::log(theta.sigma2),
          std::log(theta.sigma2) - 2.0 * theta.kappa * std::log(theta.phi),
          std::log(theta.tau2)};
}

CovarianceModel tilde_to_theta(const Eigen::Vector3d& tt, double kappa) {
  CovarianceModel theta;
  theta.kappa = kappa;
  theta.sigma2 = std::exp(2.0 * tt(0));
  theta.phi = std::exp((2.0 * tt(0) - tt(1)) / (2.0 * kappa));
  theta.tau2 = std::exp(tt(2));
  return theta;
}

double theta_log_jacobian(const CovarianceModel& theta) {
  // sigma = e^a, phi = exp((2a - b) / 2kappa), tau = e^(c/2); triangular map.
  const double log_sigma = 0.5 * std::log(theta.sigma2);
  const double log_tau = 0.5 * std::log(theta.tau2);
  return log_sigma + std::log(theta.phi) - std::log(2.0 * theta.kappa) + log_tau -
         std::log(2.0);
}

TransformedState whiten(const ModelState& state, const ConditioningMatrices& cm) {
  if (state.t.size() != cm.t_offset.size() || state.beta.size() != cm.beta_center.size())
    throw ValidationError("whiten: dimension mismatch");
  TransformedState out;
  out.theta_tilde = theta_to_tilde(state.theta);
  out.beta_tilde = cm.omega_tilde_chol.triangularView<Eigen::Lower>().solve(
      state.beta - cm.beta_center);
  out.t_tilde = cm.sigma_tilde_chol.triangularView<Eigen::Lower>().solve(
      state.t - cm.t_center(state.beta));
  return out;
}

ModelState unwhiten(const TransformedState& state, const ConditioningMatrices& cm,
                    double kappa) {
  if (state.t_tilde.size() != cm.t_offset.size() ||
      state.beta_tilde.size() != cm.beta_center.size())
    throw ValidationError("unwhiten: dimension mismatch");
  ModelState out;
  out.theta = tilde_to_theta(state.theta_tilde, kappa);
  out.beta = cm.beta_center +
             cm.omega_tilde_chol.triangularView<Eigen::Lower>() * state.beta_tilde;
  out.t = cm.t_center(out.beta) +
          cm.sigma_tilde_chol.triangularView<Eigen::Lower>() * state.t_tilde;
  return out;
}

}  // namespace bglgm
