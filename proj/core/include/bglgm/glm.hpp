#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bglgm/common.hpp"

namespace bglgm {

/// Binomial-logit regression fit (no spatial term).
struct GlmFit {
  Vector beta_hat;
  Matrix cov_hat;  // inverse Fisher information at beta_hat
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> deviance_trace;  // one entry per accepted iterate, starting at beta = 0
  std::string diagnostics;
};

/// sum_i log C(n_i, y_i) + y_i t_i - n_i log(1 + e^{t_i}), t = X beta.
double binomial_log_likelihood(const Matrix& X, const Vector& beta,
                               std::span<const int> y, std::span<const int> n);

/// Iteratively reweighted least squares from beta = 0 with step halving.
/// Never throws on separated data; reports converged = false instead.
GlmFit irls_fit(const Matrix& X, std::span<const int> y, std::span<const int> n);

Vector glm_predict_probs(const GlmFit& fit, const Matrix& X_new);

/// Each entry is sum_j Binomial(n_j, p_hat_j).
std::vector<long> glm_parametric_total_counts(const Vector& p_hat,
                                              std::span<const int> n, int draws,
                                              std::uint64_t seed);

}  // namespace bglgm
