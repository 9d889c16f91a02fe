#include "bglgm/glm.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace bglgm {

namespace {

constexpr int kMaxIterations = 100;
constexpr int kMaxHalvings = 10;
constexpr double kScoreTol = 1e-8;
constexpr double kRelLikTol = 1e-10;

double saturated_log_likelihood(std::span<const int> y, std::span<const int> n) {
  double ll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (n[i] == 0) continue;
    const double p = static_cast<double>(y[i]) / n[i];
    if (y[i] > 0) ll += y[i] * std::log(p);
    if (y[i] < n[i]) ll += (n[i] - y[i]) * std::log1p(-p);
  }
  return ll;
}

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double binomial_log_likelihood(const Matrix& X, const Vector& beta,
                               std::span<const int> y, std::span<const int> n) {
  const Vector t = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    ll += log_choose(n[i], y[i]) + y[i] * t(i) - n[i] * softplus(t(i));
  }
  return ll;
}

GlmFit irls_fit(const Matrix& X, std::span<const int> y, std::span<const int> n) {
  if (X.rows() != static_cast<Eigen::Index>(y.size()) || y.size() != n.size())
    throw ValidationError("irls_fit: dimension mismatch");
  const Eigen::Index p = X.cols();
  double const_terms = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) const_terms += log_choose(n[i], y[i]);
  const double saturated = saturated_log_likelihood(y, n) + const_terms;

  GlmFit fit;
  fit.beta_hat = Vector::Zero(p);
  double ll = binomial_log_likelihood(X, fit.beta_hat, y, n);
  fit.deviance_trace.push_back(2.0 * (saturated - ll));

  Vector yv(X.rows());
  Vector nv(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    yv(i) = y[i];
    nv(i) = n[i];
  }

  Matrix info = Matrix::Identity(p, p);
  for (int it = 1; it <= kMaxIterations; ++it) {
    fit.iterations = it;
    const Vector t = X * fit.beta_hat;
    const Vector mu = t.unaryExpr([](double v) { return inv_logit(v); });
    const Vector w = nv.cwiseProduct(mu.cwiseProduct((1.0 - mu.array()).matrix()));
    const Vector score = X.transpose() * (yv - nv.cwiseProduct(mu));
    info = X.transpose() * w.asDiagonal() * X;

    if (score.cwiseAbs().maxCoeff() < kScoreTol) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.isNegative()) {
      fit.diagnostics = "singular information matrix";
      break;
    }
    Vector step = ldlt.solve(score);
    if (!step.allFinite()) {
      fit.diagnostics = "non-finite Newton step";
      break;
    }

    Vector candidate = fit.beta_hat + step;
    double cand_ll = binomial_log_likelihood(X, candidate, y, n);
    int halvings = 0;
    while (!(cand_ll >= ll) && halvings < kMaxHalvings) {
      step *= 0.5;
      candidate = fit.beta_hat + step;
      cand_ll = binomial_log_likelihood(X, candidate, y, n);
      ++halvings;
    }
    if (!(cand_ll >= ll)) {
      fit.diagnostics = "step halving failed to increase the likelihood";
      break;
    }
    const double rel_change = std::abs(cand_ll - ll) / (std::abs(ll) + 1e-300);
    fit.beta_hat = candidate;
    ll = cand_ll;
    fit.deviance_trace.push_back(2.0 * (saturated - ll));
    if (rel_change < kRelLikTol) {
      fit.converged = true;
      break;
    }
  }

  if (!fit.converged && fit.diagnostics.empty()) {
    std::ostringstream msg;
    msg << "no convergence after " << kMaxIterations
        << " iterations; max |beta| = " << fit.beta_hat.cwiseAbs().maxCoeff()
        << " (possible separation)";
    fit.diagnostics = msg.str();
  }
  const Vector t = X * fit.beta_hat;
  if (fit.diagnostics.empty() && t.size() > 0 && t.cwiseAbs().maxCoeff() > 15.0) {
    fit.diagnostics = "fitted probabilities numerically 0 or 1 (quasi-separation)";
    spdlog::warn("irls_fit: {}", fit.diagnostics);
  }
  if (!fit.converged) spdlog::warn("irls_fit: {}", fit.diagnostics);

  // Information at the final iterate.
  Vector w(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double m = inv_logit(t(i));
    w(i) = nv(i) * m * (1.0 - m);
  }
  info = X.transpose() * w.asDiagonal() * X;
  Eigen::LDLT<Matrix> ldlt(info);
  fit.cov_hat = ldlt.solve(Matrix::Identity(p, p));
  fit.cov_hat = 0.5 * (fit.cov_hat + fit.cov_hat.transpose());
  fit.log_likelihood = ll;
  fit.deviance = 2.0 * (saturated - ll);
  return fit;
}

Vector glm_predict_probs(const GlmFit& fit, const Matrix& X_new) {
  const Vector t = X_new * fit.beta_hat;
  return t.unaryExpr([](double v) { return inv_logit(v); });
}

std::vector<long> glm_parametric_total_counts(const Vector& p_hat,
                                              std::span<const int> n, int draws,
                                              std::uint64_t seed) {
  if (p_hat.size() != static_cast<Eigen::Index>(n.size()))
    throw ValidationError("glm_parametric_total_counts: length mismatch");
  Rng rng(seed);
  std::vector<long> totals(static_cast<std::size_t>(std::max(draws, 0)), 0);
  for (auto& total : totals) {
    for (Eigen::Index j = 0; j < p_hat.size(); ++j) {
      std::binomial_distribution<int> binom(n[j], p_hat(j));
      total += binom(rng);
    }
  }
  return totals;
}

}  // namespace bglgm
