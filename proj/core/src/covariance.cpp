#include "bglgm/covariance.hpp"

#include <cmath>

namespace bglgm {

void CovarianceModel::validate() const {
  if (!(sigma2 >= 0.0) || !(tau2 >= 0.0) || !(phi > 0.0) || !(kappa > 0.0) ||
      !std::isfinite(sigma2) || !std::isfinite(tau2) || !std::isfinite(phi) ||
      !std::isfinite(kappa)) {
    throw ValidationError("invalid covariance model: need sigma2>=0, tau2>=0, "
                          "phi>0, kappa>0");
  }
}

double matern_correlation(double h, double phi, double kappa) {
  if (!std::isfinite(h) || !std::isfinite(phi) || !std::isfinite(kappa))
    throw ValidationError("matern_correlation: non-finite input");
  if (h < 0.0 || phi <= 0.0 || kappa <= 0.0)
    throw ValidationError("matern_correlation: need h>=0, phi>0, kappa>0");
  const double u = h / phi;
  if (u < 1e-12) return 1.0;
  if (kappa == 0.5) return std::exp(-u);
  if (kappa == 1.5) return (1.0 + u) * std::exp(-u);
  if (kappa == 2.5) return (1.0 + u + u * u / 3.0) * std::exp(-u);
  // K_kappa underflows well before the correlation matters.
  if (u > 700.0) return 0.0;
  const double log_norm = (1.0 - kappa) * std::log(2.0) - std::lgamma(kappa);
  const double k = std::cyl_bessel_k(kappa, u);
  if (k == 0.0) return 0.0;
  const double rho = std::exp(log_norm + kappa * std::log(u) + std::log(k));
  return std::min(rho, 1.0);
}

Matrix cholesky_lower(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) {
    Matrix l = llt.matrixL();
    bool finite = l.allFinite();
    for (Eigen::Index i = 0; finite && i < l.rows(); ++i) finite = l(i, i) > 0.0;
    if (finite) return l;
  }
  // Locate the first failing leading minor with an unblocked pass.
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) throw SingularMatrixError(j + 1);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

const Matrix& CovMatrix::lower_factor() const {
  if (!lower_) lower_ = cholesky_lower(values_);
  return *lower_;
}

double CovMatrix::log_determinant() const {
  return 2.0 * lower_factor().diagonal().array().log().sum();
}

Vector CovMatrix::solve(const Vector& b) const {
  const auto& l = lower_factor();
  Vector z = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix correlation_matrix(std::span<const Site> sites, double phi, double kappa) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Matrix r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = matern_correlation(distance(sites[i], sites[j]), phi, kappa);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

Matrix cross_correlation(std::span<const Site> rows, std::span<const Site> cols,
                         double phi, double kappa) {
  Matrix r(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          matern_correlation(distance(rows[i], cols[j]), phi, kappa);
    }
  }
  return r;
}

CovMatrix build_covariance_matrix(std::span<const Site> sites,
                                  const CovarianceModel& model,
                                  bool include_nugget) {
  model.validate();
  if (sites.empty()) throw ValidationError("covariance matrix needs at least one site");
  Matrix sigma = model.sigma2 * correlation_matrix(sites, model.phi, model.kappa);
  if (include_nugget) sigma.diagonal().array() += model.tau2;
  return CovMatrix(std::move(sigma));
}

Vector unconditional_field_draw(std::span<const Site> sites,
                                const CovarianceModel& model, Rng& rng) {
  model.validate();
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (model.sigma2 == 0.0) return Vector::Zero(n);
  const auto cov = build_covariance_matrix(sites, model, false);
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return cov.lower_factor().triangularView<Eigen::Lower>() * z;
}

Vector unconditional_field_draw(std::span<const Site> sites,
                                const CovarianceModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return unconditional_field_draw(sites, model, rng);
}

ConditionalMoments conditional_field_moments(std::span<const Site> obs_sites,
                                             const Vector& obs_values,
                                             std::span<const Site> target_sites,
                                             const CovarianceModel& model) {
  model.validate();
  if (obs_values.size() != static_cast<Eigen::Index>(obs_sites.size()))
    throw ValidationError("conditional draw: observation vector length mismatch");
  const auto m = static_cast<Eigen::Index>(target_sites.size());
  if (model.sigma2 == 0.0) return {Vector::Zero(m), Matrix::Zero(m, m)};

  const auto obs_cov = build_covariance_matrix(obs_sites, model, true);
  const Matrix& l = obs_cov.lower_factor();
  const Matrix cross =
      model.sigma2 * cross_correlation(obs_sites, target_sites, model.phi, model.kappa);
  const Matrix a = l.triangularView<Eigen::Lower>().solve(cross);
  const Vector w = l.triangularView<Eigen::Lower>().solve(obs_values);

  ConditionalMoments out;
  out.mean = a.transpose() * w;
  Matrix cov = model.sigma2 * correlation_matrix(target_sites, model.phi, model.kappa);
  cov.noalias() -= a.transpose() * a;
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

Vector draw_gaussian(const Vector& mean, const Matrix& covariance, Rng& rng) {
  const Eigen::Index n = mean.size();
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  if (n == 0) return mean;
  Eigen::LDLT<Matrix> ldlt(covariance);
  Vector scaled = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
  Vector y = ldlt.matrixL() * scaled;
  return mean + (ldlt.transpositionsP().transpose() * y);
}

ConditionalDraw conditional_field_draw(std::span<const Site> obs_sites,
                                       const Vector& obs_values,
                                       std::span<const Site> target_sites,
                                       const CovarianceModel& model, Rng& rng) {
  auto moments = conditional_field_moments(obs_sites, obs_values, target_sites, model);
  Vector draw = draw_gaussian(moments.mean, moments.covariance, rng);
  return {std::move(moments.mean), std::move(draw)};
}

ConditionalDraw conditional_field_draw(std::span<const Site> obs_sites,
                                       const Vector& obs_values,
                                       std::span<const Site> target_sites,
                                       const CovarianceModel& model,
                                       std::uint64_t seed) {
  Rng rng(seed);
  return conditional_field_draw(obs_sites, obs_values, target_sites, model, rng);
}

}  // namespace bglgm
