#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bglgm/common.hpp"
#include "bglgm/covariance.hpp"
#include "bglgm/data.hpp"
#include "bglgm/raster.hpp"

namespace bglgm {

/// Partition of sites into strata, keyed by plot id.
struct Strata {
  std::map<std::string, int> assignment;
  std::vector<std::array<double, 3>> centroids;  // standardized (x, y, elevation)
  double within_sum = 0.0;

  int count() const { return static_cast<int>(centroids.size()); }
};

/// Within-cluster sum of squares of `labels` over the standardized
/// (x, y, elevation) features of `data`.
double within_cluster_sum(const SpatialDataset& data, const std::vector<int>& labels, int k);

/// k-means on (x, y, elevation), each scaled to unit variance, best of 10
/// seeded k-means++ restarts.
Strata make_strata(const SpatialDataset& data, int k, std::uint64_t seed);

/// Largest-remainder apportionment of m over the given stratum sizes.
std::vector<int> proportional_quotas(const std::vector<int>& sizes, int m);

/// Proportional allocation across strata, then systematic sampling along
/// each stratum sorted by vegetation index, starting at the first element.
/// Returns ids in dataset order.
std::vector<std::string> stratified_subsample(const SpatialDataset& data,
                                              const Strata& strata, int m);

/// Uniform sample without replacement; ids in dataset order.
std::vector<std::string> random_subsample(const SpatialDataset& data, int m,
                                          std::uint64_t seed);

struct SyntheticConfig {
  int n_sites = 60;
  double xmin = 0.0;
  double xmax = 100.0;
  double ymin = 0.0;
  double ymax = 100.0;
  std::vector<double> beta{-1.0, 0.3, 0.4, 0.3};
  CovarianceModel field{.sigma2 = 0.25, .tau2 = 1.0, .phi = 30.0, .kappa = 1.5};
  int n_min = 5;   // tree totals drawn uniformly from [n_min, n_max]
  int n_max = 40;
  double covariate_length = 25.0;  // km, correlation length of covariate fields
  int covariate_features = 200;    // random Fourier components per field
  double elevation_mean = 320.0;
  double elevation_sd = 50.0;
  double vegetation_mean = 0.3;
  double vegetation_sd = 0.08;
  int grid_nx = 20;
  int grid_ny = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TruthRecord {
  std::vector<double> beta;
  CovarianceModel field;
  std::vector<std::string> ids;
  Vector u;
  Vector z;
  Vector t;

  Vector probabilities() const;
};

struct SyntheticDataset {
  SpatialDataset data;
  Raster elevation;
  Raster vegetation;
  TruthRecord truth;
};

/// Sites uniform in the box; covariates from smooth stationary Gaussian
/// fields; U by Cholesky of the Matern covariance; Z iid N(0, tau2);
/// t = X beta + U + Z; y ~ Binomial(n, expit(t)).
SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config,
                                            const CovariateConstants& constants = {});

void write_truth(std::ostream& out, const TruthRecord& truth);
TruthRecord read_truth(std::istream& in);

}  // namespace bglgm
