#include "bglgm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace bglgm {

namespace {

using Feature = std::array<double, 3>;

std::vector<Feature> standardized_features(const SpatialDataset& data) {
  const std::size_t n = data.size();
  std::vector<Feature> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = data.records[i];
    f[i] = {r.x, r.y, r.elevation};
  }
  bool any_spread = false;
  for (int d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (const auto& v : f) mean += v[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& v : f) var += (v[d] - mean) * (v[d] - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    const bool spread = sd > 1e-12 * (1.0 + std::abs(mean));
    any_spread = any_spread || spread;
    for (auto& v : f) v[d] = spread ? (v[d] - mean) / sd : 0.0;
  }
  if (!any_spread) throw ValidationError("make_strata: all sites are identical");
  return f;
}

double sq_dist(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Feature> centroids;
  double sse = std::numeric_limits<double>::infinity();
};

KMeansResult lloyd(const std::vector<Feature>& f, int k, Rng& rng) {
  const std::size_t n = f.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Feature> c;
  c.reserve(static_cast<std::size_t>(k));
  // k-means++ seeding.
  c.push_back(f[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(c.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& cc : c) best = std::min(best, sq_dist(f[i], cc));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = unif(rng) * total;
      std::size_t last_positive = 0;
      for (pick = 0; pick < n; ++pick) {
        if (d2[pick] <= 0.0) continue;
        last_positive = pick;
        if (u < d2[pick]) break;
        u -= d2[pick];
      }
      if (pick == n) pick = last_positive;
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    c.push_back(f[pick]);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(f[i], c[0]);
      for (int j = 1; j < k; ++j) {
        const double d = sq_dist(f[i], c[static_cast<std::size_t>(j)]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<Feature> sums(static_cast<std::size_t>(k), Feature{0, 0, 0});
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(labels[i]);
      for (int d = 0; d < 3; ++d) sums[j][d] += f[i][d];
      ++sizes[j];
    }
    for (int j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (sizes[ju] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(f[i], c[static_cast<std::size_t>(labels[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        c[ju] = f[far];
        labels[far] = j;
        changed = true;
        continue;
      }
      for (int d = 0; d < 3; ++d) c[ju][d] = sums[ju][d] / sizes[ju];
    }
    if (!changed) break;
  }

  KMeansResult out;
  out.labels = std::move(labels);
  out.centroids = std::move(c);
  out.sse = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out.sse += sq_dist(f[i], out.centroids[static_cast<std::size_t>(out.labels[i])]);
  return out;
}

/// Isotropic squared-exponential field via random Fourier features.
class SmoothField {
 public:
  SmoothField(double length, int features, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0 / length);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < features; ++k) {
      wx_.push_back(normal(rng));
      wy_.push_back(normal(rng));
      b_.push_back(phase(rng));
    }
    scale_ = std::sqrt(2.0 / features);
  }

  double operator()(const Site& s) const {
    double v = 0.0;
    for (std::size_t k = 0; k < b_.size(); ++k) v += std::cos(wx_[k] * s.x + wy_[k] * s.y + b_[k]);
    return scale_ * v;
  }

 private:
  std::vector<double> wx_, wy_, b_;
  double scale_ = 1.0;
};

}  // namespace

double within_cluster_sum(const SpatialDataset& data, const std::vector<int>& labels, int k) {
  const auto f = standardized_features(data);
  std::vector<Feature> sums(static_cast<std::size_t>(k), Feature{0, 0, 0});
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    for (int d = 0; d < 3; ++d) sums[j][d] += f[i][d];
    ++sizes[j];
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    Feature c{};
    for (int d = 0; d < 3; ++d) c[d] = sums[j][d] / sizes[j];
    sse += sq_dist(f[i], c);
  }
  return sse;
}

Strata make_strata(const SpatialDataset& data, int k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("make_strata: k must be >= 1");
  if (data.size() < static_cast<std::size_t>(k))
    throw ValidationError("make_strata: fewer sites than strata");
  const auto f = standardized_features(data);
  Rng rng(seed);
  KMeansResult best;
  for (int restart = 0; restart < 10; ++restart) {
    auto r = lloyd(f, k, rng);
    if (r.sse < best.sse) best = std::move(r);
  }
  // Relabel by first appearance so labels do not depend on seeding order.
  std::vector<int> relabel(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int l : best.labels) {
    if (relabel[static_cast<std::size_t>(l)] < 0) relabel[static_cast<std::size_t>(l)] = next++;
  }
  Strata s;
  s.centroids.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int to = relabel[static_cast<std::size_t>(j)];
    if (to < 0) throw ValidationError("make_strata: a stratum ended up empty");
    s.centroids[static_cast<std::size_t>(to)] = best.centroids[static_cast<std::size_t>(j)];
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    s.assignment[data.records[i].id] = relabel[static_cast<std::size_t>(best.labels[i])];
  s.within_sum = best.sse;
  return s;
}

std::vector<int> proportional_quotas(const std::vector<int>& sizes, int m) {
  const long total = std::accumulate(sizes.begin(), sizes.end(), 0L);
  std::vector<int> quotas(sizes.size(), 0);
  if (total == 0 || m <= 0) return quotas;
  std::vector<long> remainder(sizes.size());
  long assigned = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const long scaled = static_cast<long>(m) * sizes[s];
    quotas[s] = static_cast<int>(scaled / total);
    remainder[s] = scaled % total;
    assigned += quotas[s];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < m && k < order.size(); ++k, ++assigned) ++quotas[order[k]];
  return quotas;
}

std::vector<std::string> stratified_subsample(const SpatialDataset& data,
                                              const Strata& strata, int m) {
  if (m < 0 || static_cast<std::size_t>(m) > data.size())
    throw ValidationError("stratified_subsample: need 0 <= m <= dataset size");
  const int k = strata.count();
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto it = strata.assignment.find(data.records[i].id);
    if (it == strata.assignment.end())
      throw ValidationError("stratified_subsample: site '" + data.records[i].id +
                            "' has no stratum");
    members[static_cast<std::size_t>(it->second)].push_back(i);
  }
  std::vector<int> sizes;
  int nonempty = 0;
  for (const auto& g : members) {
    sizes.push_back(static_cast<int>(g.size()));
    nonempty += g.empty() ? 0 : 1;
  }
  if (m > 0 && m < nonempty)
    spdlog::warn("stratified_subsample: m={} is below the {} strata; smallest "
                 "remainders are dropped", m, nonempty);
  const auto quotas = proportional_quotas(sizes, m);

  std::vector<std::size_t> chosen;
  for (std::size_t s = 0; s < members.size(); ++s) {
    auto g = members[s];
    const int q = quotas[s];
    if (q == 0) continue;
    std::stable_sort(g.begin(), g.end(), [&](std::size_t a, std::size_t b) {
      return data.records[a].vegetation < data.records[b].vegetation;
    });
    const double stride = static_cast<double>(g.size()) / q;
    for (int j = 0; j < q; ++j) {
      auto idx = static_cast<std::size_t>(std::floor(j * stride + 1e-9));
      chosen.push_back(g[std::min(idx, g.size() - 1)]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> ids;
  for (auto i : chosen) ids.push_back(data.records[i].id);
  return ids;
}

std::vector<std::string> random_subsample(const SpatialDataset& data, int m,
                                          std::uint64_t seed) {
  if (m < 0 || static_cast<std::size_t>(m) > data.size())
    throw ValidationError("random_subsample: need 0 <= m <= dataset size");
  Rng rng(seed);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> ids;
  for (auto i : idx) ids.push_back(data.records[i].id);
  return ids;
}

void SyntheticConfig::validate() const {
  if (n_sites < 1) throw ValidationError("synthetic: n_sites must be >= 1");
  if (!(xmax > xmin) || !(ymax > ymin)) throw ValidationError("synthetic: empty domain");
  if (beta.size() != static_cast<std::size_t>(kDesignColumns))
    throw ValidationError("synthetic: beta needs 4 coefficients");
  field.validate();
  if (n_min < 1 || n_max < n_min) throw ValidationError("synthetic: need 1 <= n_min <= n_max");
  if (!(covariate_length > 0.0) || covariate_features < 1)
    throw ValidationError("synthetic: bad covariate field parameters");
  if (grid_nx < 1 || grid_ny < 1) throw ValidationError("synthetic: grid needs >= 1 cell");
}

Vector TruthRecord::probabilities() const {
  return t.unaryExpr([](double v) { return inv_logit(v); });
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config,
                                            const CovariateConstants& constants) {
  config.validate();
  Rng site_rng(derive_seed(config.seed, 1));
  Rng cov_rng(derive_seed(config.seed, 2));
  Rng field_rng(derive_seed(config.seed, 3));
  Rng nugget_rng(derive_seed(config.seed, 4));
  Rng count_rng(derive_seed(config.seed, 5));

  const SmoothField elevation_field(config.covariate_length, config.covariate_features, cov_rng);
  const SmoothField vegetation_field(config.covariate_length, config.covariate_features, cov_rng);
  auto elevation_at = [&](const Site& s) {
    return config.elevation_mean + config.elevation_sd * elevation_field(s);
  };
  auto vegetation_at = [&](const Site& s) {
    return std::clamp(config.vegetation_mean + config.vegetation_sd * vegetation_field(s), 0.0, 1.0);
  };

  SyntheticDataset out;
  out.data.crs_note = "synthetic planar km";
  std::uniform_real_distribution<double> ux(config.xmin, config.xmax);
  std::uniform_real_distribution<double> uy(config.ymin, config.ymax);
  std::uniform_int_distribution<int> totals(config.n_min, config.n_max);
  const int width = std::max(3, static_cast<int>(std::to_string(config.n_sites).size()));
  for (int i = 0; i < config.n_sites; ++i) {
    PlotRecord r;
    std::ostringstream id;
    id << 's' << std::setw(width) << std::setfill('0') << (i + 1);
    r.id = id.str();
    r.x = ux(site_rng);
    r.y = uy(site_rng);
    r.n_total = totals(count_rng);
    r.elevation = elevation_at({r.x, r.y});
    r.vegetation = vegetation_at({r.x, r.y});
    out.data.records.push_back(std::move(r));
  }
  jitter_duplicate_sites(out.data);

  const auto sites = out.data.sites();
  const Matrix X = build_design_matrix(out.data, constants);
  const Vector beta = Eigen::Map<const Vector>(config.beta.data(), kDesignColumns);
  Vector u = unconditional_field_draw(sites, config.field, field_rng);
  std::normal_distribution<double> normal;
  const double tau = std::sqrt(config.field.tau2);
  Vector z(static_cast<Eigen::Index>(sites.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = tau * normal(nugget_rng);
  Vector t = X * beta + u + z;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    auto& r = out.data.records[i];
    std::binomial_distribution<int> binom(r.n_total, inv_logit(t(static_cast<Eigen::Index>(i))));
    r.y_hardwood = binom(count_rng);
  }

  GridSpec grid{.nx = config.grid_nx,
                .ny = config.grid_ny,
                .xll = config.xmin,
                .yll = config.ymin,
                .cellsize = std::max((config.xmax - config.xmin) / config.grid_nx,
                                     (config.ymax - config.ymin) / config.grid_ny)};
  out.elevation.grid = grid;
  out.vegetation.grid = grid;
  for (const auto& c : grid.centers()) {
    out.elevation.values.push_back(elevation_at(c));
    out.vegetation.values.push_back(vegetation_at(c));
  }

  out.truth.beta = config.beta;
  out.truth.field = config.field;
  out.truth.ids = out.data.ids();
  out.truth.u = std::move(u);
  out.truth.z = std::move(z);
  out.truth.t = std::move(t);
  return out;
}

void write_truth(std::ostream& out, const TruthRecord& truth) {
  out << "key,value\n";
  for (std::size_t k = 0; k < truth.beta.size(); ++k)
    out << "beta" << k << ',' << format_double(truth.beta[k]) << '\n';
  out << "sigma2," << format_double(truth.field.sigma2) << '\n'
      << "tau2," << format_double(truth.field.tau2) << '\n'
      << "phi," << format_double(truth.field.phi) << '\n'
      << "kappa," << format_double(truth.field.kappa) << '\n'
      << '\n'
      << "id,u,z,t,p\n";
  for (std::size_t i = 0; i < truth.ids.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << truth.ids[i] << ',' << format_double(truth.u(k)) << ',' << format_double(truth.z(k))
        << ',' << format_double(truth.t(k)) << ',' << format_double(inv_logit(truth.t(k)))
        << '\n';
  }
}

TruthRecord read_truth(std::istream& in) {
  TruthRecord truth;
  std::string line;
  long line_no = 0;
  bool in_sites = false;
  std::vector<double> u, z, t;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "key,value") continue;
    if (line == "id,u,z,t,p") {
      in_sites = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    try {
      if (!in_sites) {
        if (f.size() != 2) throw ParseError("expected key,value", line_no);
        const double v = std::stod(f[1]);
        if (f[0].starts_with("beta")) truth.beta.push_back(v);
        else if (f[0] == "sigma2") truth.field.sigma2 = v;
        else if (f[0] == "tau2") truth.field.tau2 = v;
        else if (f[0] == "phi") truth.field.phi = v;
        else if (f[0] == "kappa") truth.field.kappa = v;
        else throw ParseError("unknown truth key '" + f[0] + "'", line_no);
      } else {
        if (f.size() != 5) throw ParseError("expected id,u,z,t,p", line_no);
        truth.ids.push_back(f[0]);
        u.push_back(std::stod(f[1]));
        z.push_back(std::stod(f[2]));
        t.push_back(std::stod(f[3]));
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("bad number", line_no);
    }
  }
  truth.u = Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
  truth.z = Eigen::Map<Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
  truth.t = Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
  return truth;
}

}  // namespace bglgm
