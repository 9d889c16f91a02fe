#include <doctest.h>

#include <numeric>

#include "support.hpp"

using namespace bglgm;

namespace {

struct Instance {
  Matrix X;
  std::vector<int> y;
  std::vector<int> n;
};

Instance random_instance(int sites, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Instance ins;
  ins.X = Matrix::Ones(sites, cols);
  std::normal_distribution<double> z;
  for (int i = 0; i < sites; ++i)
    for (int j = 1; j < cols; ++j) ins.X(i, j) = z(rng);
  const Vector beta = testing::random_vector(cols, rng, 0.7);
  for (int i = 0; i < sites; ++i) {
    const int n = std::uniform_int_distribution<int>(5, 30)(rng);
    ins.n.push_back(n);
    ins.y.push_back(std::binomial_distribution<int>(n, inv_logit(ins.X.row(i).dot(beta)))(rng));
  }
  return ins;
}

}  // namespace

TEST_CASE("irls: symmetric counts give a zero intercept") {
  const Matrix X = Matrix::Ones(6, 1);
  const std::vector<int> n{10, 4, 8, 20, 2, 6};
  std::vector<int> y;
  for (int v : n) y.push_back(v / 2);
  const auto fit = irls_fit(X, y, n);
  CHECK(fit.converged);
  CHECK(std::abs(fit.beta_hat(0)) < 1e-8);
}

TEST_CASE("irls: intercept-only fit is the logit of the pooled proportion") {
  const Matrix X = Matrix::Ones(4, 1);
  const std::vector<int> n{10, 10, 20, 40};
  const std::vector<int> y{1, 4, 5, 10};  // 20 / 80
  const auto fit = irls_fit(X, y, n);
  CHECK(fit.beta_hat(0) == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-9));
  CHECK(fit.beta_hat(0) == doctest::Approx(-1.09861).epsilon(1e-5));
}

TEST_CASE("irls: beats a 200 x 200 grid around the estimate") {
  const auto ins = random_instance(20, 3, 21);
  const auto fit = irls_fit(ins.X, ins.y, ins.n);
  REQUIRE(fit.converged);
  const double best = binomial_log_likelihood(ins.X, fit.beta_hat, ins.y, ins.n);
  CHECK(best == doctest::Approx(fit.log_likelihood));
  int violations = 0;
  for (int a = 0; a < 200; ++a) {
    for (int b = 0; b < 200; ++b) {
      Vector beta = fit.beta_hat;
      beta(1) += -0.5 + a / 199.0;
      beta(2) += -0.5 + b / 199.0;
      if (binomial_log_likelihood(ins.X, beta, ins.y, ins.n) > best + 1e-12) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("property: irls agrees with gradient ascent and deviance never rises") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ins = random_instance(25, 4, seed);
    const auto fit = irls_fit(ins.X, ins.y, ins.n);
    REQUIRE(fit.converged);
    const Vector ref = testing::brute_force_logistic(ins.X, ins.y, ins.n);
    CHECK((fit.beta_hat - ref).cwiseAbs().maxCoeff() < 1e-4);
    for (std::size_t k = 1; k < fit.deviance_trace.size(); ++k)
      CHECK(fit.deviance_trace[k] <= fit.deviance_trace[k - 1] + 1e-9);
  }
}

TEST_CASE("irls: separated data is reported, not thrown") {
  Matrix X(4, 2);
  X << 1, -2, 1, -1, 1, 1, 1, 2;
  const std::vector<int> n{5, 5, 5, 5};
  const std::vector<int> y{0, 0, 5, 5};
  GlmFit fit;
  CHECK_NOTHROW(fit = irls_fit(X, y, n));
  CHECK_FALSE(fit.diagnostics.empty());
}

TEST_CASE("glm_predict_probs") {
  GlmFit fit;
  fit.beta_hat = Vector::Zero(4);
  const Matrix X = Matrix::Random(5, 4);
  CHECK((glm_predict_probs(fit, X).array() == 0.5).all());

  fit.beta_hat << -3.47, 0, 0, 0;
  Matrix x0(1, 4);
  x0 << 1, 0, 0, 0;
  CHECK(glm_predict_probs(fit, x0)(0) == doctest::Approx(0.0302).epsilon(1e-3));

  fit.beta_hat << 0.1, 0.2, -0.3, 0.8;
  Matrix xs(2, 4);
  xs << 1, 0.5, 0, 0.2, 1, 0.5, 0, 0.9;
  const Vector p = glm_predict_probs(fit, xs);
  CHECK(p(1) > p(0));
}

TEST_CASE("glm_parametric_total_counts") {
  const std::vector<int> n{10, 7, 3};
  SUBCASE("p = 0") {
    for (long t : glm_parametric_total_counts(Vector::Zero(3), n, 100, 1)) CHECK(t == 0);
  }
  SUBCASE("p = 1") {
    for (long t : glm_parametric_total_counts(Vector::Ones(3), n, 100, 1)) CHECK(t == 20);
  }
  SUBCASE("binomial moments") {
    const std::vector<int> n2{10, 10};
    const auto draws = glm_parametric_total_counts(Vector::Constant(2, 0.5), n2, 100000, 4);
    const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
    double var = 0.0;
    for (long d : draws) var += (d - mean) * (d - mean);
    var /= static_cast<double>(draws.size() - 1);
    CHECK(std::abs(mean - 10.0) < 0.1);
    CHECK(std::abs(var / 5.0 - 1.0) < 0.05);
  }
  SUBCASE("seeded") {
    CHECK(glm_parametric_total_counts(Vector::Constant(3, 0.3), n, 50, 9) ==
          glm_parametric_total_counts(Vector::Constant(3, 0.3), n, 50, 9));
  }
}
