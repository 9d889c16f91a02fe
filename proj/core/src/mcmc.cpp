#include "bglgm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "bglgm/glm.hpp"

namespace bglgm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return std::log(u);
}

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace

double adaptive_step_update(double s_prev, long i, double alpha, double c1, double c2,
                            double target) {
  const double s = s_prev + c1 * std::pow(static_cast<double>(i), -c2) * (alpha - target);
  return std::max(s, 1e-8);
}

double default_mala_step(Eigen::Index n) {
  return 1.65 * 1.65 / std::cbrt(static_cast<double>(n));
}

bool rwmh_accept(Vector& x, double& log_p, const Vector& perturbation, double log_u,
                 const LogDensity& log_density) {
  Vector proposal = x + perturbation;
  const double lp = log_density(proposal);
  if (!std::isfinite(lp)) return false;
  if (log_u < lp - log_p) {
    x = std::move(proposal);
    log_p = lp;
    return true;
  }
  return false;
}

bool rwmh_step(Vector& x, double& log_p, const LogDensity& log_density, double sd,
               Rng& rng, std::optional<Eigen::Index> coordinate) {
  Vector perturbation = Vector::Zero(x.size());
  if (coordinate) {
    std::normal_distribution<double> normal;
    perturbation(*coordinate) = sd * normal(rng);
  } else {
    perturbation = sd * standard_normal(x.size(), rng);
  }
  return rwmh_accept(x, log_p, perturbation, log_uniform(rng), log_density);
}

bool mala_accept(Vector& x, double& log_p, Vector& grad, const Vector& z, double log_u,
                 double h, const LogDensityWithGradient& log_density) {
  const Vector forward_mean = x + 0.5 * h * grad;
  Vector proposal = forward_mean + std::sqrt(h) * z;
  Vector proposal_grad(x.size());
  const double lp = log_density(proposal, proposal_grad);
  if (!std::isfinite(lp) || !proposal_grad.allFinite()) return false;
  const Vector reverse_mean = proposal + 0.5 * h * proposal_grad;
  const double log_q_forward = -0.5 * (proposal - forward_mean).squaredNorm() / h;
  const double log_q_reverse = -0.5 * (x - reverse_mean).squaredNorm() / h;
  const double log_ratio = lp - log_p + log_q_reverse - log_q_forward;
  if (log_u < log_ratio) {
    x = std::move(proposal);
    grad = std::move(proposal_grad);
    log_p = lp;
    return true;
  }
  return false;
}

bool mala_step(Vector& x, double& log_p, Vector& grad, double h,
               const LogDensityWithGradient& log_density, Rng& rng) {
  const Vector z = standard_normal(x.size(), rng);
  return mala_accept(x, log_p, grad, z, log_uniform(rng), h, log_density);
}

// ---------------------------------------------------------------------------

SpatialPosterior::SpatialPosterior(std::vector<Site> sites, Matrix X, std::vector<int> y,
                                   std::vector<int> n, PriorSpec prior, double kappa)
    : X_(std::move(X)),
      y_(std::move(y)),
      n_(std::move(n)),
      prior_(std::move(prior)),
      kappa_(kappa) {
  const auto m = static_cast<Eigen::Index>(sites.size());
  if (X_.rows() != m || static_cast<Eigen::Index>(y_.size()) != m ||
      static_cast<Eigen::Index>(n_.size()) != m)
    throw ValidationError("SpatialPosterior: dimension mismatch");
  if (m < 2) throw ValidationError("SpatialPosterior: need at least two sites");
  prior_.validate();
  if (prior_.mu.size() != X_.cols())
    throw ValidationError("SpatialPosterior: prior dimension differs from design");
  center_ = profile_center(y_, n_);

  distances_.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) distances_(i, j) = distance(sites[i], sites[j]);
  }
  yv_.resize(m);
  nv_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    yv_(i) = y_[i];
    nv_(i) = n_[i];
    log_choose_sum_ += std::lgamma(n_[i] + 1.0) - std::lgamma(y_[i] + 1.0) -
                       std::lgamma(n_[i] - y_[i] + 1.0);
  }
  omega_llt_.compute(prior_.omega);
  omega_log_det_ = 2.0 * Matrix(omega_llt_.matrixL()).diagonal().array().log().sum();
}

ThetaContext SpatialPosterior::context_for(const CovarianceModel& theta) const {
  theta.validate();
  const Eigen::Index m = distances_.rows();
  Matrix sigma(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    sigma(j, j) = theta.sigma2 + theta.tau2;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double v = theta.sigma2 * matern_correlation(distances_(i, j), theta.phi, theta.kappa);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  ThetaContext ctx{.theta = theta, .sigma = CovMatrix(std::move(sigma)),
                   .log_det_sigma = 0.0, .cm = {}};
  ctx.log_det_sigma = ctx.sigma.log_determinant();
  ctx.cm = conditioning_matrices(ctx.sigma, X_, center_, prior_);
  return ctx;
}

double SpatialPosterior::log_likelihood(const Vector& t) const {
  double ll = log_choose_sum_;
  for (Eigen::Index i = 0; i < t.size(); ++i) ll += yv_(i) * t(i) - nv_(i) * softplus(t(i));
  return ll;
}

double SpatialPosterior::log_posterior_parts(const Vector& t, const Vector& beta,
                                             const ThetaContext& ctx,
                                             Vector* residual_solve) const {
  const auto& theta = ctx.theta;
  const double sigma = std::sqrt(theta.sigma2);
  const double tau = std::sqrt(theta.tau2);
  double lp = prior_.log_density_theta(sigma, theta.phi, tau);

  const Vector db = beta - prior_.mu;
  const auto p = static_cast<double>(beta.size());
  lp += -0.5 * db.dot(omega_llt_.solve(db)) - 0.5 * omega_log_det_ - 0.5 * p * kLog2Pi;

  const Vector r = t - X_ * beta;
  Vector sr = ctx.sigma.solve(r);
  const auto m = static_cast<double>(t.size());
  lp += -0.5 * r.dot(sr) - 0.5 * ctx.log_det_sigma - 0.5 * m * kLog2Pi;
  lp += log_likelihood(t);
  if (residual_solve) *residual_solve = std::move(sr);
  return lp;
}

double SpatialPosterior::log_posterior(const ModelState& state,
                                       const ThetaContext& ctx) const {
  return log_posterior_parts(state.t, state.beta, ctx, nullptr);
}

double SpatialPosterior::log_target(const TransformedState& state,
                                    const ThetaContext& ctx) const {
  const ModelState s = unwhiten(state, ctx);
  return log_posterior_parts(s.t, s.beta, ctx, nullptr) + ctx.cm.log_det_half_sigma_tilde +
         ctx.cm.log_det_half_omega_tilde + theta_log_jacobian(ctx.theta);
}

double SpatialPosterior::log_target_with_gradient(const TransformedState& state,
                                                  const ThetaContext& ctx,
                                                  Vector& grad) const {
  const ModelState s = unwhiten(state, ctx);
  Vector sr;
  const double lp = log_posterior_parts(s.t, s.beta, ctx, &sr);
  Vector g(s.t.size());
  for (Eigen::Index i = 0; i < s.t.size(); ++i)
    g(i) = yv_(i) - nv_(i) * inv_logit(s.t(i)) - sr(i);
  grad = ctx.cm.sigma_tilde_chol.transpose() * g;
  return lp + ctx.cm.log_det_half_sigma_tilde + ctx.cm.log_det_half_omega_tilde +
         theta_log_jacobian(ctx.theta);
}

Vector SpatialPosterior::grad_log_target_t_tilde(const TransformedState& state,
                                                 const ThetaContext& ctx) const {
  Vector grad;
  log_target_with_gradient(state, ctx, grad);
  return grad;
}

TransformedState SpatialPosterior::whiten(const ModelState& state,
                                          const ThetaContext& ctx) const {
  return bglgm::whiten(state, ctx.cm);
}

ModelState SpatialPosterior::unwhiten(const TransformedState& state,
                                      const ThetaContext& ctx) const {
  return bglgm::unwhiten(state, ctx.cm, kappa_);
}

// ---------------------------------------------------------------------------

void McmcConfig::validate() const {
  if (iterations < 1) throw ValidationError("mcmc: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw ValidationError("mcmc: need 0 <= burn_in < iterations");
  if (thin < 1) throw ValidationError("mcmc: thin must be >= 1");
  if (mala_h < 0.0) throw ValidationError("mcmc: mala_h must be > 0 (0 = default)");
  if (!(adapt_c1 > 0.0)) throw ValidationError("mcmc: adapt_c1 must be > 0");
  if (!(adapt_c2 > 0.0) || adapt_c2 > 1.0)
    throw ValidationError("mcmc: adapt_c2 must lie in (0, 1]");
  if (beta_step < 0.0) throw ValidationError("mcmc: beta_step must be >= 0");
  if (!(initial_theta_step > 0.0))
    throw ValidationError("mcmc: initial_theta_step must be > 0");
  if (!(kappa > 0.0)) throw ValidationError("mcmc: kappa must be > 0");
}

McmcConfig McmcConfig::paper_scale() {
  McmcConfig c;
  c.iterations = 2000000;
  c.burn_in = 1000000;
  c.thin = 100;
  return c;
}

ModelState initial_state(const SpatialPosterior& posterior) {
  ModelState s;
  const GlmFit fit = irls_fit(posterior.design(), posterior.counts(), posterior.totals());
  s.beta = fit.converged && fit.beta_hat.allFinite()
               ? fit.beta_hat
               : Vector::Zero(posterior.coefficients());
  s.t = posterior.center().t_hat;
  const auto& prior = posterior.prior();
  const double sigma = 1.0 / prior.sigma_rate;
  const double tau = 1.0 / prior.tau_rate;
  s.theta = {.sigma2 = sigma * sigma,
             .tau2 = tau * tau,
             .phi = prior.phi_shape * prior.phi_scale,
             .kappa = posterior.kappa()};
  return s;
}

ChainOutput run_chain(const SpatialDataset& train, const Matrix& X,
                      const PriorSpec& prior, const McmcConfig& config) {
  config.validate();
  const SpatialPosterior posterior(train.sites(), X, train.counts(), train.totals(),
                                   prior, config.kappa);
  const Eigen::Index n = posterior.sites_count();
  const Eigen::Index p = posterior.coefficients();

  ChainOutput out;
  out.mala_h = config.mala_h > 0.0 ? config.mala_h : default_mala_step(n);
  out.beta_step = config.beta_step > 0.0 ? config.beta_step
                                         : 2.4 / std::sqrt(static_cast<double>(p));

  ThetaContext ctx = posterior.context_for(initial_state(posterior).theta);
  TransformedState state = posterior.whiten(initial_state(posterior), ctx);
  double log_p = posterior.log_target(state, ctx);

  Rng rng(config.seed);
  std::normal_distribution<double> normal;
  std::array<double, 3> step;
  step.fill(config.initial_theta_step);
  std::array<long, 3> theta_accepts{};
  long beta_accepts = 0;
  long t_accepts = 0;

  const long kept = (config.iterations - config.burn_in) / config.thin;
  out.draws.reserve(static_cast<std::size_t>(kept));

  auto beta_density = [&](const Vector& beta_tilde) {
    TransformedState s = state;
    s.beta_tilde = beta_tilde;
    return posterior.log_target(s, ctx);
  };
  auto t_density = [&](const Vector& t_tilde, Vector& grad) {
    TransformedState s = state;
    s.t_tilde = t_tilde;
    return posterior.log_target_with_gradient(s, ctx, grad);
  };

  const long report_every = std::max(1L, config.iterations / 10);
  for (long it = 1; it <= config.iterations; ++it) {
    if (it % report_every == 0)
      spdlog::info("chain {}: iteration {}/{}", config.seed, it, config.iterations);
    for (int j = 0; j < 3; ++j) {
      TransformedState proposal = state;
      proposal.theta_tilde(j) += step[j] * normal(rng);
      const double log_u = log_uniform(rng);
      bool accepted = false;
      try {
        ThetaContext next =
            posterior.context_for(tilde_to_theta(proposal.theta_tilde, config.kappa));
        const double lp = posterior.log_target(proposal, next);
        if (std::isfinite(lp) && log_u < lp - log_p) {
          state = std::move(proposal);
          ctx = std::move(next);
          log_p = lp;
          accepted = true;
        }
      } catch (const Error&) {
        ++out.failed_theta_proposals;
      }
      theta_accepts[j] += accepted ? 1 : 0;
      const double alpha = static_cast<double>(theta_accepts[j]) / static_cast<double>(it);
      step[j] = adaptive_step_update(step[j], it, alpha, config.adapt_c1, config.adapt_c2,
                                     config.target_accept_theta);
    }

    if (rwmh_step(state.beta_tilde, log_p, beta_density, out.beta_step, rng)) ++beta_accepts;

    Vector grad;
    log_p = posterior.log_target_with_gradient(state, ctx, grad);
    if (mala_step(state.t_tilde, log_p, grad, out.mala_h, t_density, rng)) ++t_accepts;

    if (it % config.thin == 0) {
      out.step_iterations.push_back(it);
      out.step_trace.push_back(step);
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      const ModelState s = posterior.unwhiten(state, ctx);
      out.draws.push_back({.beta = s.beta,
                           .sigma = std::sqrt(s.theta.sigma2),
                           .tau = std::sqrt(s.theta.tau2),
                           .phi = s.theta.phi,
                           .t = s.t});
    }
  }

  const auto total = static_cast<double>(config.iterations);
  for (int j = 0; j < 3; ++j) out.accept_theta[j] = theta_accepts[j] / total;
  out.accept_beta = beta_accepts / total;
  out.accept_t = t_accepts / total;
  if (out.failed_theta_proposals > 0)
    spdlog::warn("run_chain: {} theta proposals rejected after factorization failure",
                 out.failed_theta_proposals);
  return out;
}

std::vector<ChainOutput> run_chains(const SpatialDataset& train, const Matrix& X,
                                    const PriorSpec& prior, const McmcConfig& config,
                                    int chains) {
  if (chains < 1) throw ValidationError("run_chains: need at least one chain");
  std::vector<ChainOutput> out(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(out.size());
  std::vector<std::jthread> workers;
  for (int k = 0; k < chains; ++k) {
    workers.emplace_back([&, k] {
      try {
        McmcConfig c = config;
        if (k > 0) c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
        out[static_cast<std::size_t>(k)] = run_chain(train, X, prior, c);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  workers.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_chain(std::ostream& out, const ChainOutput& chain) {
  const Eigen::Index p = chain.draws.empty() ? 4 : chain.draws.front().beta.size();
  const Eigen::Index n = chain.draws.empty() ? 0 : chain.draws.front().t.size();
  out << "draw";
  for (Eigen::Index k = 0; k < p; ++k) out << ",beta" << k;
  out << ",sigma,tau,phi";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",t_" << i;
  out << '\n';
  for (std::size_t d = 0; d < chain.draws.size(); ++d) {
    const auto& draw = chain.draws[d];
    out << (d + 1);
    for (Eigen::Index k = 0; k < p; ++k) out << ',' << format_double(draw.beta(k));
    out << ',' << format_double(draw.sigma) << ',' << format_double(draw.tau) << ','
        << format_double(draw.phi);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(draw.t(i));
    out << '\n';
  }
}

ChainOutput read_chain(std::istream& in) {
  ChainOutput chain;
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty chain file", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.empty() || header[0] != "draw") throw ParseError("chain header must start with 'draw'", line_no);
  Eigen::Index p = 0;
  while (static_cast<std::size_t>(p + 1) < header.size() &&
         header[static_cast<std::size_t>(p + 1)] == "beta" + std::to_string(p))
    ++p;
  const std::size_t theta_at = static_cast<std::size_t>(p + 1);
  if (header.size() < theta_at + 3 || header[theta_at] != "sigma" ||
      header[theta_at + 1] != "tau" || header[theta_at + 2] != "phi")
    throw ParseError("chain header missing sigma,tau,phi", line_no);
  const auto n = static_cast<Eigen::Index>(header.size() - theta_at - 3);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad number '" + field + "'", line_no);
      }
    }
    if (values.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", line_no);
    ChainDraw d;
    d.beta = Eigen::Map<const Vector>(values.data() + 1, p);
    d.sigma = values[theta_at];
    d.tau = values[theta_at + 1];
    d.phi = values[theta_at + 2];
    d.t = Eigen::Map<const Vector>(values.data() + theta_at + 3, n);
    chain.draws.push_back(std::move(d));
  }
  return chain;
}

void write_chain_diagnostics(std::ostream& out, const ChainOutput& chain) {
  out << "key,value\n"
      << "accept_theta1," << format_double(chain.accept_theta[0]) << '\n'
      << "accept_theta2," << format_double(chain.accept_theta[1]) << '\n'
      << "accept_theta3," << format_double(chain.accept_theta[2]) << '\n'
      << "accept_beta," << format_double(chain.accept_beta) << '\n'
      << "accept_t," << format_double(chain.accept_t) << '\n'
      << "failed_theta_proposals," << chain.failed_theta_proposals << '\n'
      << "mala_h," << format_double(chain.mala_h) << '\n'
      << "beta_step," << format_double(chain.beta_step) << '\n'
      << "draws," << chain.draws.size() << '\n'
      << '\n'
      << "iteration,step_theta1,step_theta2,step_theta3\n";
  for (std::size_t k = 0; k < chain.step_trace.size(); ++k) {
    const auto& s = chain.step_trace[k];
    out << chain.step_iterations[k] << ',' << format_double(s[0]) << ','
        << format_double(s[1]) << ',' << format_double(s[2]) << '\n';
  }
}

}  // namespace bglgm
