#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bglgm/common.hpp"
#include "bglgm/covariance.hpp"
#include "bglgm/data.hpp"
#include "bglgm/reparam.hpp"

namespace bglgm {

// ---------------------------------------------------------------------------
// Generic Metropolis kernels
// ---------------------------------------------------------------------------

/// s_i = s_{i-1} + c1 i^{-c2} (alpha_i - target), floored at 1e-8.
double adaptive_step_update(double s_prev, long i, double alpha, double c1, double c2,
                            double target = 0.45);

/// Recommended Langevin step for an n-dimensional whitened block: 1.65^2 / n^(1/3).
double default_mala_step(Eigen::Index n);

using LogDensity = std::function<double(const Vector&)>;
/// Returns log density and writes the gradient into `grad`.
using LogDensityWithGradient = std::function<double(const Vector&, Vector& grad)>;

/// Random-walk Metropolis with an explicit perturbation and log-uniform.
/// `x` and `log_p` are updated in place on acceptance.
bool rwmh_accept(Vector& x, double& log_p, const Vector& perturbation, double log_u,
                 const LogDensity& log_density);

/// Gaussian random-walk step with proposal sd * I; when `coordinate` is set
/// only that component moves.
bool rwmh_step(Vector& x, double& log_p, const LogDensity& log_density, double sd,
               Rng& rng, std::optional<Eigen::Index> coordinate = std::nullopt);

/// Metropolis-adjusted Langevin step:
///   x' = x + 0.5 h grad(x) + sqrt(h) z,
/// accepted with the Hastings ratio including both proposal densities.
/// `x`, `log_p` and `grad` are updated in place on acceptance.
bool mala_accept(Vector& x, double& log_p, Vector& grad, const Vector& z, double log_u,
                 double h, const LogDensityWithGradient& log_density);
bool mala_step(Vector& x, double& log_p, Vector& grad, double h,
               const LogDensityWithGradient& log_density, Rng& rng);

// ---------------------------------------------------------------------------
// Spatial binomial posterior in whitened coordinates
// ---------------------------------------------------------------------------

/// Per-theta quantities shared by every evaluation at that theta.
struct ThetaContext {
  CovarianceModel theta;
  CovMatrix sigma;  // nugget-inclusive, factor computed
  double log_det_sigma = 0.0;
  ConditioningMatrices cm;
};

/// Joint posterior of (beta, theta, t) for binomial counts with a logit
/// link, Matern field plus nugget, expressed in (theta_tilde, beta_tilde,
/// t_tilde). The log target includes the Jacobian of the whitening maps and
/// of the theta reparameterization.
class SpatialPosterior {
 public:
  SpatialPosterior(std::vector<Site> sites, Matrix X, std::vector<int> y,
                   std::vector<int> n, PriorSpec prior, double kappa = 1.5);

  Eigen::Index sites_count() const { return X_.rows(); }
  Eigen::Index coefficients() const { return X_.cols(); }
  double kappa() const { return kappa_; }
  const ProfileCenter& center() const { return center_; }
  const Matrix& design() const { return X_; }
  const PriorSpec& prior() const { return prior_; }

  /// Throws SingularMatrixError if Sigma(theta) or a derived matrix is singular.
  ThetaContext context_for(const CovarianceModel& theta) const;

  double log_likelihood(const Vector& t) const;
  const std::vector<int>& counts() const { return y_; }
  const std::vector<int>& totals() const { return n_; }

  /// Unnormalized log posterior at (beta, theta, t) in original coordinates
  /// (no Jacobian terms).
  double log_posterior(const ModelState& state, const ThetaContext& ctx) const;

  /// log_posterior(unwhiten(state)) + log|sigma_tilde^1/2| + log|omega_tilde^1/2|
  /// + log|d theta / d theta_tilde|.
  double log_target(const TransformedState& state, const ThetaContext& ctx) const;

  /// sigma_tilde_chol^T [ y - n expit(t) - Sigma^-1 (t - X beta) ].
  Vector grad_log_target_t_tilde(const TransformedState& state,
                                 const ThetaContext& ctx) const;

  /// log_target and its t_tilde gradient from one unwhitening pass.
  double log_target_with_gradient(const TransformedState& state,
                                  const ThetaContext& ctx, Vector& grad) const;

  TransformedState whiten(const ModelState& state, const ThetaContext& ctx) const;
  ModelState unwhiten(const TransformedState& state, const ThetaContext& ctx) const;

 private:
  double log_posterior_parts(const Vector& t, const Vector& beta,
                             const ThetaContext& ctx, Vector* residual_solve) const;

  Matrix distances_;
  Matrix X_;
  std::vector<int> y_;
  std::vector<int> n_;
  Vector yv_;
  Vector nv_;
  double log_choose_sum_ = 0.0;
  PriorSpec prior_;
  Eigen::LLT<Matrix> omega_llt_;
  double omega_log_det_ = 0.0;
  double kappa_;
  ProfileCenter center_;
};

// ---------------------------------------------------------------------------
// Sampler
// ---------------------------------------------------------------------------

struct McmcConfig {
  long iterations = 100000;
  long burn_in = 50000;
  long thin = 10;
  double mala_h = 0.0;     // 0 selects default_mala_step(n)
  double adapt_c1 = 1.0;
  double adapt_c2 = 0.6;
  double target_accept_theta = 0.45;
  double beta_step = 0.0;  // 0 selects 2.4 / sqrt(p)
  double initial_theta_step = 1.0;
  double kappa = 1.5;
  std::uint64_t seed = 1;

  void validate() const;
  static McmcConfig paper_scale();
};

struct ChainDraw {
  Vector beta;
  double sigma = 0.0;
  double tau = 0.0;
  double phi = 0.0;
  Vector t;

};

struct ChainOutput {
  std::vector<ChainDraw> draws;
  std::array<double, 3> accept_theta{};
  double accept_beta = 0.0;
  double accept_t = 0.0;
  long failed_theta_proposals = 0;
  /// Adaptive theta_tilde proposal sds, sampled every `thin` iterations.
  std::vector<long> step_iterations;
  std::vector<std::array<double, 3>> step_trace;
  double mala_h = 0.0;
  double beta_step = 0.0;

};

/// Starting point for a chain: beta from IRLS (0 if it fails), t = t_hat,
/// sigma and tau at their prior means, phi at its prior mean.
ModelState initial_state(const SpatialPosterior& posterior);

/// Adaptive RWMH on each theta_tilde coordinate, block RWMH on beta_tilde and
/// MALA on t_tilde; records unwhitened draws at iterations burn_in + k thin.
ChainOutput run_chain(const SpatialDataset& train, const Matrix& X,
                      const PriorSpec& prior, const McmcConfig& config);

/// Runs `chains` independent chains with seeds derived from config.seed.
std::vector<ChainOutput> run_chains(const SpatialDataset& train, const Matrix& X,
                                    const PriorSpec& prior, const McmcConfig& config,
                                    int chains);

void write_chain(std::ostream& out, const ChainOutput& chain);
ChainOutput read_chain(std::istream& in);
void write_chain_diagnostics(std::ostream& out, const ChainOutput& chain);

}  // namespace bglgm
