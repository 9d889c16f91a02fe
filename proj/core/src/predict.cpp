#include "bglgm/predict.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace bglgm {

namespace {

double open_unit(double p) {
  static const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, std::numeric_limits<double>::min(), hi);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

}  // namespace

std::vector<std::size_t> strided_subsample(std::size_t total, std::size_t count) {
  std::vector<std::size_t> idx;
  if (count == 0 || total == 0) return idx;
  if (count >= total) {
    idx.resize(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(count);
  for (std::size_t j = 0; j < count; ++j) idx.push_back(j * total / count);
  return idx;
}

PredictionDraws predict_locations(std::span<const ChainDraw> chain,
                                  std::span<const Site> train_sites,
                                  const Matrix& X_train,
                                  std::span<const Site> target_sites,
                                  const Matrix& X_targets, double kappa,
                                  std::uint64_t seed,
                                  std::span<const std::size_t> draw_subset) {
  if (chain.empty()) throw ValidationError("prediction needs a non-empty chain");
  if (X_train.rows() != static_cast<Eigen::Index>(train_sites.size()) ||
      X_targets.rows() != static_cast<Eigen::Index>(target_sites.size()))
    throw ValidationError("prediction: design rows do not match sites");

  std::vector<std::size_t> order;
  if (draw_subset.empty()) {
    order.resize(chain.size());
    for (std::size_t m = 0; m < chain.size(); ++m) order[m] = m;
  } else {
    order.assign(draw_subset.begin(), draw_subset.end());
  }

  const auto targets = static_cast<Eigen::Index>(target_sites.size());
  PredictionDraws out;
  std::vector<Vector> rows;
  rows.reserve(order.size());
  for (const std::size_t m : order) {
    const ChainDraw& d = chain[m];
    if (d.t.size() != X_train.rows() || d.beta.size() != X_train.cols())
      throw ValidationError("prediction: chain draw dimensions do not match training data");
    const CovarianceModel theta{.sigma2 = d.sigma * d.sigma,
                                .tau2 = d.tau * d.tau,
                                .phi = d.phi,
                                .kappa = kappa};
    Rng rng(derive_seed(seed, m));
    const Vector w = d.t - X_train * d.beta;
    ConditionalDraw field;
    try {
      field = conditional_field_draw(train_sites, w, target_sites, theta, rng);
    } catch (const SingularMatrixError& e) {
      spdlog::warn("prediction: skipping chain draw {}: {}", m + 1, e.what());
      out.skipped.push_back(m);
      continue;
    }
    std::normal_distribution<double> normal;
    Vector eta = X_targets * d.beta + field.draw;
    for (Eigen::Index j = 0; j < targets; ++j) eta(j) += d.tau * normal(rng);
    rows.push_back(eta.unaryExpr([](double v) { return open_unit(inv_logit(v)); }));
    out.draw_index.push_back(m);
  }

  out.probs.resize(static_cast<Eigen::Index>(rows.size()), targets);
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.probs.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

PredictionDraws predict_sites(std::span<const ChainDraw> chain,
                              const SpatialDataset& train, const Matrix& X_train,
                              const SpatialDataset& targets, const Matrix& X_targets,
                              double kappa, std::uint64_t seed) {
  std::unordered_set<std::string> train_ids;
  for (const auto& r : train.records) train_ids.insert(r.id);
  for (const auto& r : targets.records) {
    if (train_ids.contains(r.id))
      throw ValidationError("prediction target '" + r.id + "' is also a training site");
  }
  const auto train_sites = train.sites();
  const auto target_sites = targets.sites();
  PredictionDraws out = predict_locations(chain, train_sites, X_train, target_sites,
                                          X_targets, kappa, seed);
  out.site_ids = targets.ids();
  return out;
}

GridPrediction predict_grid(std::span<const ChainDraw> chain, const SpatialDataset& train,
                            const Matrix& X_train, const Raster& elevation,
                            const Raster& vegetation, const CovariateConstants& constants,
                            std::size_t draw_subsample, std::size_t raster_samples,
                            double kappa, std::uint64_t seed) {
  if (!(elevation.grid == vegetation.grid))
    throw ValidationError("covariate rasters must share one grid");
  elevation.grid.validate();
  const GridSpec& grid = elevation.grid;

  GridPrediction out;
  std::vector<Site> targets;
  std::vector<Eigen::RowVector4d> design;
  for (int r = 0; r < grid.ny; ++r) {
    for (int c = 0; c < grid.nx; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * grid.nx + c;
      if (elevation.is_nodata(k) || vegetation.is_nodata(k)) continue;
      out.cells.push_back(k);
      targets.push_back(grid.center(r, c));
      design.push_back(design_row(elevation.values[k], vegetation.values[k], constants));
    }
  }
  Matrix X_targets(static_cast<Eigen::Index>(design.size()), kDesignColumns);
  for (std::size_t i = 0; i < design.size(); ++i)
    X_targets.row(static_cast<Eigen::Index>(i)) = design[i];

  const auto subset = strided_subsample(chain.size(), std::max<std::size_t>(draw_subsample, 1));
  const auto train_sites = train.sites();
  out.draws = predict_locations(chain, train_sites, X_train, targets, X_targets, kappa,
                                seed, subset);

  out.mean.grid = grid;
  out.mean.values.assign(grid.cells(), Raster::kNoData);
  if (out.draws.probs.rows() > 0) {
    const Vector mean = out.draws.probs.colwise().mean().transpose();
    for (std::size_t j = 0; j < out.cells.size(); ++j)
      out.mean.values[out.cells[j]] = mean(static_cast<Eigen::Index>(j));
  }
  const auto keep = std::min<std::size_t>(raster_samples,
                                          static_cast<std::size_t>(out.draws.probs.rows()));
  for (std::size_t s = 0; s < keep; ++s) {
    Raster r{.grid = grid, .values = std::vector<double>(grid.cells(), Raster::kNoData)};
    for (std::size_t j = 0; j < out.cells.size(); ++j)
      r.values[out.cells[j]] = out.draws.probs(static_cast<Eigen::Index>(s),
                                               static_cast<Eigen::Index>(j));
    out.samples.push_back(std::move(r));
  }
  return out;
}

CountMatrix draw_counts(const PredictionDraws& preds, std::span<const int> n_targets,
                        std::uint64_t seed) {
  if (static_cast<Eigen::Index>(n_targets.size()) != preds.probs.cols())
    throw ValidationError("draw_counts: totals length differs from site count");
  Rng rng(seed);
  CountMatrix counts(preds.probs.rows(), preds.probs.cols());
  for (Eigen::Index m = 0; m < preds.probs.rows(); ++m) {
    for (Eigen::Index j = 0; j < preds.probs.cols(); ++j) {
      std::binomial_distribution<int> binom(n_targets[static_cast<std::size_t>(j)],
                                            preds.probs(m, j));
      counts(m, j) = binom(rng);
    }
  }
  return counts;
}

Vector posterior_mean_probs(const PredictionDraws& preds) {
  if (preds.probs.rows() == 0) return Vector::Zero(preds.probs.cols());
  return preds.probs.colwise().mean().transpose();
}

void write_prediction_probs(std::ostream& out, const PredictionDraws& preds) {
  out << "draw";
  for (Eigen::Index j = 0; j < preds.probs.cols(); ++j) {
    out << ',';
    if (preds.site_ids.empty()) out << "cell_" << (j + 1);
    else out << preds.site_ids[static_cast<std::size_t>(j)];
  }
  out << '\n';
  for (Eigen::Index m = 0; m < preds.probs.rows(); ++m) {
    out << (preds.draw_index.empty() ? m + 1
                                     : static_cast<Eigen::Index>(preds.draw_index[static_cast<std::size_t>(m)]) + 1);
    for (Eigen::Index j = 0; j < preds.probs.cols(); ++j)
      out << ',' << format_double(preds.probs(m, j));
    out << '\n';
  }
}

PredictionDraws read_prediction_probs(std::istream& in) {
  PredictionDraws preds;
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty prediction file", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.empty() || header[0] != "draw") throw ParseError("expected 'draw' column", line_no);
  preds.site_ids.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ParseError("field count mismatch", line_no);
    std::vector<double> row;
    try {
      preds.draw_index.push_back(static_cast<std::size_t>(std::stol(f[0]) - 1));
      for (std::size_t j = 1; j < f.size(); ++j) row.push_back(std::stod(f[j]));
    } catch (const std::exception&) {
      throw ParseError("bad number", line_no);
    }
    rows.push_back(std::move(row));
  }
  preds.probs.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(preds.site_ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < rows[r].size(); ++j)
      preds.probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  return preds;
}

void write_count_draws(std::ostream& out, const CountMatrix& counts,
                       std::span<const std::string> site_ids) {
  out << "draw";
  for (Eigen::Index j = 0; j < counts.cols(); ++j) {
    out << ',';
    if (site_ids.empty()) out << "site_" << (j + 1);
    else out << site_ids[static_cast<std::size_t>(j)];
  }
  out << '\n';
  for (Eigen::Index m = 0; m < counts.rows(); ++m) {
    out << (m + 1);
    for (Eigen::Index j = 0; j < counts.cols(); ++j) out << ',' << counts(m, j);
    out << '\n';
  }
}

CountMatrix read_count_draws(std::istream& in, std::vector<std::string>* site_ids) {
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty count file", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.empty() || header[0] != "draw") throw ParseError("expected 'draw' column", line_no);
  if (site_ids) site_ids->assign(header.begin() + 1, header.end());
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ParseError("field count mismatch", line_no);
    std::vector<int> row;
    try {
      for (std::size_t j = 1; j < f.size(); ++j) row.push_back(std::stoi(f[j]));
    } catch (const std::exception&) {
      throw ParseError("bad count", line_no);
    }
    rows.push_back(std::move(row));
  }
  CountMatrix counts(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < rows[r].size(); ++j)
      counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  return counts;
}

}  // namespace bglgm
