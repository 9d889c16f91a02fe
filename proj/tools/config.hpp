#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "bglgm/bglgm.hpp"

namespace bglgm::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Everything a run needs. Defaults are the desk-scale settings.
struct RunConfig {
  std::uint64_t seed = 1;
  int replications = 1;

  SyntheticConfig synthetic;
  CovariateConstants covariates;
  PriorSpec prior = PriorSpec::defaults(kDesignColumns);
  McmcConfig mcmc;
  int chains = 1;

  int n_train = 40;             // remaining sites form the validation set
  int subsample_size = 0;       // 0 keeps every training site
  std::string subsample_method = "random";  // random | stratified
  int strata = 3;

  bool predict_grid = true;
  int grid_draws = 1000;
  int grid_samples = 3;

  double level = 0.95;
  int glm_draws = 10000;

  void validate() const;
};

/// key=value lines, '#' comments, dotted keys. A `preset` key (desk or
/// paper_scale) is applied before every other key regardless of position.
/// Unknown keys and malformed values raise ConfigError naming the line.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace bglgm::cli
