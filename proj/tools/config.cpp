#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <vector>

namespace bglgm::cli {

namespace {

struct BadValue {
  std::string expected;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <class T>
T as_number(std::string_view v, const char* expected) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) throw BadValue{expected};
  return out;
}

double as_double(std::string_view v) { return as_number<double>(v, "a number"); }
long as_long(std::string_view v) { return as_number<long>(v, "an integer"); }
int as_int(std::string_view v) { return as_number<int>(v, "an integer"); }

bool as_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw BadValue{"a boolean"};
}

std::vector<double> as_list(std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto pos = v.find(',');
    out.push_back(as_number<double>(trim(v.substr(0, pos)), "a comma-separated list of numbers"));
    if (pos == std::string_view::npos) break;
    v.remove_prefix(pos + 1);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](RunConfig& c, auto v) { c.seed = as_number<std::uint64_t>(v, "a non-negative integer"); }},
      {"replications", [](RunConfig& c, auto v) { c.replications = as_int(v); }},

      {"synthetic.n_sites", [](RunConfig& c, auto v) { c.synthetic.n_sites = as_int(v); }},
      {"synthetic.xmin", [](RunConfig& c, auto v) { c.synthetic.xmin = as_double(v); }},
      {"synthetic.xmax", [](RunConfig& c, auto v) { c.synthetic.xmax = as_double(v); }},
      {"synthetic.ymin", [](RunConfig& c, auto v) { c.synthetic.ymin = as_double(v); }},
      {"synthetic.ymax", [](RunConfig& c, auto v) { c.synthetic.ymax = as_double(v); }},
      {"synthetic.beta", [](RunConfig& c, auto v) { c.synthetic.beta = as_list(v); }},
      {"synthetic.sigma2", [](RunConfig& c, auto v) { c.synthetic.field.sigma2 = as_double(v); }},
      {"synthetic.tau2", [](RunConfig& c, auto v) { c.synthetic.field.tau2 = as_double(v); }},
      {"synthetic.phi", [](RunConfig& c, auto v) { c.synthetic.field.phi = as_double(v); }},
      {"synthetic.kappa", [](RunConfig& c, auto v) { c.synthetic.field.kappa = as_double(v); }},
      {"synthetic.n_min", [](RunConfig& c, auto v) { c.synthetic.n_min = as_int(v); }},
      {"synthetic.n_max", [](RunConfig& c, auto v) { c.synthetic.n_max = as_int(v); }},
      {"synthetic.covariate_length", [](RunConfig& c, auto v) { c.synthetic.covariate_length = as_double(v); }},
      {"synthetic.covariate_features", [](RunConfig& c, auto v) { c.synthetic.covariate_features = as_int(v); }},
      {"synthetic.elevation_mean", [](RunConfig& c, auto v) { c.synthetic.elevation_mean = as_double(v); }},
      {"synthetic.elevation_sd", [](RunConfig& c, auto v) { c.synthetic.elevation_sd = as_double(v); }},
      {"synthetic.vegetation_mean", [](RunConfig& c, auto v) { c.synthetic.vegetation_mean = as_double(v); }},
      {"synthetic.vegetation_sd", [](RunConfig& c, auto v) { c.synthetic.vegetation_sd = as_double(v); }},
      {"synthetic.grid_nx", [](RunConfig& c, auto v) { c.synthetic.grid_nx = as_int(v); }},
      {"synthetic.grid_ny", [](RunConfig& c, auto v) { c.synthetic.grid_ny = as_int(v); }},

      {"covariates.elevation_center", [](RunConfig& c, auto v) { c.covariates.elevation_center = as_double(v); }},
      {"covariates.elevation_scale", [](RunConfig& c, auto v) { c.covariates.elevation_scale = as_double(v); }},
      {"covariates.vegetation_change_point", [](RunConfig& c, auto v) { c.covariates.vegetation_change_point = as_double(v); }},
      {"covariates.vegetation_scale", [](RunConfig& c, auto v) { c.covariates.vegetation_scale = as_double(v); }},

      {"prior.mu", [](RunConfig& c, auto v) {
         const auto mu = as_list(v);
         c.prior.mu = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
       }},
      {"prior.omega_diag", [](RunConfig& c, auto v) {
         const auto d = as_list(v);
         const Eigen::Index p = c.prior.omega.rows();
         if (d.size() == 1) {
           c.prior.omega = d[0] * Matrix::Identity(p, p);
         } else if (static_cast<Eigen::Index>(d.size()) == p) {
           c.prior.omega = Eigen::Map<const Vector>(d.data(), p).asDiagonal();
         } else {
           throw BadValue{"one value or one per coefficient"};
         }
       }},
      {"prior.sigma_rate", [](RunConfig& c, auto v) { c.prior.sigma_rate = as_double(v); }},
      {"prior.tau_rate", [](RunConfig& c, auto v) { c.prior.tau_rate = as_double(v); }},
      {"prior.phi_shape", [](RunConfig& c, auto v) { c.prior.phi_shape = as_double(v); }},
      {"prior.phi_scale", [](RunConfig& c, auto v) { c.prior.phi_scale = as_double(v); }},

      {"mcmc.iterations", [](RunConfig& c, auto v) { c.mcmc.iterations = as_long(v); }},
      {"mcmc.burn_in", [](RunConfig& c, auto v) { c.mcmc.burn_in = as_long(v); }},
      {"mcmc.thin", [](RunConfig& c, auto v) { c.mcmc.thin = as_long(v); }},
      {"mcmc.mala_h", [](RunConfig& c, auto v) { c.mcmc.mala_h = as_double(v); }},
      {"mcmc.adapt_c1", [](RunConfig& c, auto v) { c.mcmc.adapt_c1 = as_double(v); }},
      {"mcmc.adapt_c2", [](RunConfig& c, auto v) { c.mcmc.adapt_c2 = as_double(v); }},
      {"mcmc.beta_step", [](RunConfig& c, auto v) { c.mcmc.beta_step = as_double(v); }},
      {"mcmc.initial_theta_step", [](RunConfig& c, auto v) { c.mcmc.initial_theta_step = as_double(v); }},
      {"mcmc.kappa", [](RunConfig& c, auto v) { c.mcmc.kappa = as_double(v); }},
      {"mcmc.chains", [](RunConfig& c, auto v) { c.chains = as_int(v); }},

      {"split.n_train", [](RunConfig& c, auto v) { c.n_train = as_int(v); }},
      {"subsample.size", [](RunConfig& c, auto v) { c.subsample_size = as_int(v); }},
      {"subsample.method", [](RunConfig& c, auto v) {
         if (v != "random" && v != "stratified") throw BadValue{"'random' or 'stratified'"};
         c.subsample_method = std::string(v);
       }},
      {"subsample.strata", [](RunConfig& c, auto v) { c.strata = as_int(v); }},

      {"predict.grid", [](RunConfig& c, auto v) { c.predict_grid = as_bool(v); }},
      {"predict.grid_draws", [](RunConfig& c, auto v) { c.grid_draws = as_int(v); }},
      {"predict.grid_samples", [](RunConfig& c, auto v) { c.grid_samples = as_int(v); }},

      {"assess.level", [](RunConfig& c, auto v) { c.level = as_double(v); }},
      {"glm.draws", [](RunConfig& c, auto v) { c.glm_draws = as_int(v); }},
  };
  return table;
}

void apply_preset(RunConfig& c, std::string_view name) {
  if (name == "desk") {
    c.mcmc.iterations = 100000;
    c.mcmc.burn_in = 50000;
    c.mcmc.thin = 10;
  } else if (name == "paper_scale") {
    const auto paper = McmcConfig::paper_scale();
    c.mcmc.iterations = paper.iterations;
    c.mcmc.burn_in = paper.burn_in;
    c.mcmc.thin = paper.thin;
  } else {
    throw BadValue{"'desk' or 'paper_scale'"};
  }
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid configuration: " + m); };
  if (replications < 1) fail("replications must be >= 1");
  if (chains < 1) fail("mcmc.chains must be >= 1");
  if (n_train < 2) fail("split.n_train must be >= 2");
  if (n_train > synthetic.n_sites) fail("split.n_train exceeds synthetic.n_sites");
  if (subsample_size < 0 || subsample_size > n_train)
    fail("subsample.size must lie in [0, split.n_train]");
  if (subsample_size == 1) fail("subsample.size must be 0 or >= 2");
  if (strata < 1) fail("subsample.strata must be >= 1");
  if (grid_draws < 1 || grid_samples < 0) fail("predict.grid_draws >= 1, grid_samples >= 0");
  if (!(level > 0.0) || !(level < 1.0)) fail("assess.level must lie in (0, 1)");
  if (glm_draws < 1) fail("glm.draws must be >= 1");
  if (!(covariates.elevation_scale != 0.0) || !(covariates.vegetation_scale != 0.0))
    fail("covariate scales must be nonzero");
  try {
    synthetic.validate();
    prior.validate();
    mcmc.validate();
  } catch (const ValidationError& e) {
    fail(e.what());
  }
  if (prior.mu.size() != kDesignColumns) fail("prior.mu needs 4 values");
}

RunConfig parse_config(std::istream& in) {
  struct Entry {
    long line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    entries.push_back({line_no, std::string(trim(line.substr(0, eq))),
                       std::string(trim(line.substr(eq + 1)))});
  }

  RunConfig config;
  for (const auto& e : entries) {
    if (e.key != "preset") continue;
    try {
      apply_preset(config, e.value);
    } catch (const BadValue& bad) {
      throw ConfigError("line " + std::to_string(e.line) + ": key 'preset' expects " +
                        bad.expected + ", got '" + e.value + "'");
    }
  }
  const auto& table = setters();
  for (const auto& e : entries) {
    if (e.key == "preset") continue;
    const auto it = table.find(e.key);
    if (it == table.end())
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    try {
      it->second(config, e.value);
    } catch (const BadValue& bad) {
      throw ConfigError("line " + std::to_string(e.line) + ": key '" + e.key + "' expects " +
                        bad.expected + ", got '" + e.value + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in);
}

}  // namespace bglgm::cli
