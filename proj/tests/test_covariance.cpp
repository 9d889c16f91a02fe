#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace bglgm;

TEST_CASE("matern: documented values") {
  CHECK(matern_correlation(0.0, 3.0, 1.5) == 1.0);
  CHECK(matern_correlation(2.0, 2.0, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(matern_correlation(2.0, 2.0, 1.5) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(matern_correlation(2.0, 2.0, 1.5) == doctest::Approx(0.735759).epsilon(1e-6));
}

TEST_CASE("matern: closed forms to 1e-10") {
  for (int k = 0; k < 100; ++k) {
    const double u = std::pow(10.0, -3.0 + 5.0 * k / 99.0);
    CHECK(std::abs(matern_correlation(u, 1.0, 0.5) - std::exp(-u)) < 1e-10);
    CHECK(std::abs(matern_correlation(u, 1.0, 1.5) - (1 + u) * std::exp(-u)) < 1e-10);
    CHECK(std::abs(matern_correlation(u, 1.0, 2.5) - (1 + u + u * u / 3) * std::exp(-u)) < 1e-10);
  }
}

TEST_CASE("matern: general kappa agrees with the closed form path") {
  // Bessel route at kappa = 1.5 +- tiny must be continuous with the closed form.
  for (double u : {0.01, 0.3, 1.0, 4.0}) {
    CHECK(matern_correlation(u, 1.0, 1.5 + 1e-9) ==
          doctest::Approx(matern_correlation(u, 1.0, 1.5)).epsilon(1e-6));
  }
}

TEST_CASE("property: matern is decreasing and within (0, 1]") {
  for (double kappa : {0.3, 0.5, 1.0, 1.5, 2.5, 3.7}) {
    for (double phi : {0.5, 2.0, 30.0}) {
      double prev = 1.0;
      for (int k = 1; k <= 200; ++k) {
        const double h = phi * 0.05 * k;
        const double r = matern_correlation(h, phi, kappa);
        CHECK(r > 0.0);
        CHECK(r <= prev + 1e-15);
        prev = r;
      }
    }
  }
}

TEST_CASE("covariance: documented matrices") {
  const std::vector<Site> one{{0, 0}};
  const auto c1 = build_covariance_matrix(one, {.sigma2 = 1, .tau2 = 0.5, .phi = 1}, true);
  CHECK(c1.values()(0, 0) == doctest::Approx(1.5));

  const std::vector<Site> two{{0, 0}, {3, 4}};
  const auto c2 = build_covariance_matrix(two, {.sigma2 = 1, .tau2 = 0, .phi = 5, .kappa = 1.5}, true);
  CHECK(c2.values()(0, 1) == doctest::Approx(0.735759).epsilon(1e-6));

  const std::vector<Site> same{{1, 1}, {1, 1 + 1e-9}};
  const auto c3 = build_covariance_matrix(same, {.sigma2 = 1, .tau2 = 0, .phi = 5}, false);
  CHECK(c3.values()(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("property: cholesky reconstructs nugget covariances") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto sites = testing::random_sites(25, rng, 20.0);
    const CovarianceModel m{.sigma2 = 0.5 + rep * 0.1, .tau2 = 0.05, .phi = 1.0 + rep, .kappa = 1.5};
    const auto c = build_covariance_matrix(sites, m, true);
    const Matrix& L = c.lower_factor();
    const double rel = (L * L.transpose() - c.values()).norm() / c.values().norm();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("cholesky failure names the leading minor") {
  Matrix a(3, 3);
  a << 1, 0, 0, 0, 1, 0, 0, 0, -1;
  try {
    cholesky_lower(a);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.minor() == 3);
  }
}

TEST_CASE("unconditional draws") {
  Rng rng(5);
  const auto sites = testing::random_sites(3, rng);
  SUBCASE("zero variance gives zeros") {
    const Vector u = unconditional_field_draw(sites, {.sigma2 = 0, .tau2 = 0, .phi = 1}, 9);
    CHECK(u.isZero());
  }
  SUBCASE("fixed seed repeats") {
    const CovarianceModel m{.sigma2 = 1, .tau2 = 0, .phi = 2};
    CHECK(unconditional_field_draw(sites, m, 9) == unconditional_field_draw(sites, m, 9));
  }
  SUBCASE("sample covariance matches") {
    const CovarianceModel m{.sigma2 = 2, .tau2 = 0, .phi = 4};
    const Matrix sigma = build_covariance_matrix(sites, m, false).values();
    Rng draws(17);
    Matrix acc = Matrix::Zero(3, 3);
    const int N = 10000;
    for (int k = 0; k < N; ++k) {
      const Vector u = unconditional_field_draw(sites, m, draws);
      acc += u * u.transpose();
    }
    acc /= N;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(acc(i, j) - sigma(i, j)) < 0.05 * sigma(i, j) + 0.02);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(acc(i, i) / sigma(i, i) - 1.0) < 0.05);
  }
}

TEST_CASE("conditional: exact interpolation without nugget") {
  const std::vector<Site> obs{{0, 0}, {1, 0}, {0, 2}};
  const Vector w = (Vector(3) << 0.4, -0.2, 1.1).finished();
  const std::vector<Site> target{{1, 0}};
  const CovarianceModel m{.sigma2 = 1.3, .tau2 = 0, .phi = 1.5};
  const auto d = conditional_field_draw(obs, w, target, m, 3);
  CHECK(d.mean(0) == doctest::Approx(-0.2).epsilon(1e-8));
  CHECK(d.draw(0) == doctest::Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("conditional: far target reverts to the prior") {
  const std::vector<Site> obs{{0, 0}, {1, 0}};
  const Vector w = (Vector(2) << 2.0, 1.5).finished();
  const std::vector<Site> target{{1e5, 1e5}};
  const CovarianceModel m{.sigma2 = 0.7, .tau2 = 0.1, .phi = 1.0};
  const auto mom = conditional_field_moments(obs, w, target, m);
  CHECK(std::abs(mom.mean(0)) < 1e-12);
  CHECK(mom.covariance(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("conditional: partitioned normal oracle with 3 observed and 2 targets") {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto obs = testing::random_sites(3, rng, 5.0);
    const auto tgt = testing::random_sites(2, rng, 5.0);
    const CovarianceModel m{.sigma2 = 1.2, .tau2 = 0.3, .phi = 2.0, .kappa = 2.5};
    const Vector w = testing::random_vector(3, rng);

    std::vector<Site> all(obs);
    all.insert(all.end(), tgt.begin(), tgt.end());
    Matrix joint(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        joint(i, j) = m.sigma2 * matern_correlation(distance(all[i], all[j]), m.phi, m.kappa);
    const Matrix s11 = joint.topLeftCorner(3, 3) + m.tau2 * Matrix::Identity(3, 3);
    const Matrix s21 = joint.bottomLeftCorner(2, 3);
    const Matrix s22 = joint.bottomRightCorner(2, 2);
    const Matrix inv = s11.fullPivLu().inverse();
    const Vector mean = s21 * inv * w;
    const Matrix cov = s22 - s21 * inv * s21.transpose();

    const auto mom = conditional_field_moments(obs, w, tgt, m);
    CHECK((mom.mean - mean).norm() < 1e-10);
    CHECK((mom.covariance - cov).norm() < 1e-10);
    for (int j = 0; j < 2; ++j) CHECK(mom.covariance(j, j) <= m.sigma2 + 1e-12);
  }
}

TEST_CASE("draw_gaussian handles a singular covariance") {
  Matrix cov(2, 2);
  cov << 1, 1, 1, 1;
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Vector d = draw_gaussian(Vector::Zero(2), cov, rng);
    CHECK(d(0) == doctest::Approx(d(1)).epsilon(1e-10));
  }
}
