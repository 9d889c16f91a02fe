#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bglgm/common.hpp"
#include "bglgm/data.hpp"
#include "bglgm/mcmc.hpp"
#include "bglgm/raster.hpp"

namespace bglgm {

using CountMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Posterior predictive probabilities, one row per retained chain draw.
struct PredictionDraws {
  Matrix probs;                        // draws x sites, each in (0, 1)
  std::vector<std::string> site_ids;   // empty for grid predictions
  std::vector<std::size_t> draw_index; // chain draw behind each row
  std::vector<std::size_t> skipped;    // chain draws dropped as singular
};

/// For each chain draw: W = t - X_train beta, U(targets) | W by conditional
/// simulation, independent nugget Z ~ N(0, tau^2) at each target, and
/// p = expit(X_targets beta + U + Z). Draw m uses seed derive_seed(seed, m).
PredictionDraws predict_sites(std::span<const ChainDraw> chain,
                              const SpatialDataset& train, const Matrix& X_train,
                              const SpatialDataset& targets, const Matrix& X_targets,
                              double kappa, std::uint64_t seed);

/// Same as predict_sites on bare target locations.
PredictionDraws predict_locations(std::span<const ChainDraw> chain,
                                  std::span<const Site> train_sites,
                                  const Matrix& X_train,
                                  std::span<const Site> target_sites,
                                  const Matrix& X_targets, double kappa,
                                  std::uint64_t seed,
                                  std::span<const std::size_t> draw_subset = {});

/// `count` indices spread evenly over [0, total): floor(j total / count).
std::vector<std::size_t> strided_subsample(std::size_t total, std::size_t count);

struct GridPrediction {
  PredictionDraws draws;        // columns follow the valid cells
  std::vector<std::size_t> cells;  // raster index of each column
  Raster mean;
  std::vector<Raster> samples;  // first `raster_samples` draws
};

/// Conditional simulation over every cell whose covariates are present.
/// `draw_subsample` chain draws are used, evenly strided.
GridPrediction predict_grid(std::span<const ChainDraw> chain, const SpatialDataset& train,
                            const Matrix& X_train, const Raster& elevation,
                            const Raster& vegetation, const CovariateConstants& constants,
                            std::size_t draw_subsample, std::size_t raster_samples,
                            double kappa, std::uint64_t seed);

/// counts(m, j) ~ Binomial(n_j, probs(m, j)).
CountMatrix draw_counts(const PredictionDraws& preds, std::span<const int> n_targets,
                        std::uint64_t seed);

/// Column means of the probability draws.
Vector posterior_mean_probs(const PredictionDraws& preds);

/// CSV with header `draw,<site ids...>` (or cell_<k> without ids).
void write_prediction_probs(std::ostream& out, const PredictionDraws& preds);
void write_count_draws(std::ostream& out, const CountMatrix& counts,
                       std::span<const std::string> site_ids);
CountMatrix read_count_draws(std::istream& in, std::vector<std::string>* site_ids = nullptr);
PredictionDraws read_prediction_probs(std::istream& in);

}  // namespace bglgm
