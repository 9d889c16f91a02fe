#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace bglgm::cli {

namespace fs = std::filesystem;

namespace {

/// Writes files through a `.partial` name and records them for the manifest.
/// A failed write leaves the `.partial` file in place.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path final_path = dir_ / name;
    const fs::path partial = dir_ / (name + ".partial");
    {
      std::ofstream out(partial, std::ios::binary);
      if (!out) throw Error("cannot open " + partial.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw Error("write failed for " + partial.string());
    }
    fs::rename(partial, final_path);
    written_.push_back(name);
    spdlog::info("wrote {}", final_path.string());
  }

  /// Merges this stage's files into manifest.txt (path,rows; rows counts
  /// newline-terminated lines).
  void commit() const {
    const fs::path manifest = dir_ / "manifest.txt";
    std::map<std::string, long> rows;
    if (std::ifstream in(manifest); in) {
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) continue;
        rows[line.substr(0, comma)] = std::stol(line.substr(comma + 1));
      }
    }
    for (const auto& name : written_) {
      std::ifstream in(dir_ / name, std::ios::binary);
      rows[name] = static_cast<long>(std::count(std::istreambuf_iterator<char>(in),
                                                std::istreambuf_iterator<char>(), '\n'));
    }
    const fs::path partial = dir_ / "manifest.txt.partial";
    {
      std::ofstream out(partial, std::ios::binary);
      out << "path,rows\n";
      for (const auto& [path, count] : rows) out << path << ',' << count << '\n';
      if (!out) throw Error("write failed for " + partial.string());
    }
    fs::rename(partial, manifest);
  }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path))
    throw Error("missing input: " + what + " (" + path.string() + ")");
}

SpatialDataset load_checked_dataset(const fs::path& path) {
  require_file(path, "dataset");
  SpatialDataset data = load_dataset(path);
  validate_dataset(data);
  jitter_duplicate_sites(data);
  return data;
}

std::pair<SpatialDataset, SpatialDataset> load_partition(const StagePaths& p) {
  const SpatialDataset data = load_checked_dataset(p.data);
  require_file(p.split, "split");
  return split_train_validation(data, load_split(p.split));
}

template <class T>
T with_file(const fs::path& path, const std::string& what, T (*reader)(std::istream&)) {
  require_file(path, what);
  std::ifstream in(path);
  return reader(in);
}

Vector select_truth_probs(const TruthRecord& truth, const std::vector<std::string>& ids) {
  std::map<std::string, Eigen::Index> where;
  for (std::size_t i = 0; i < truth.ids.size(); ++i)
    where[truth.ids[i]] = static_cast<Eigen::Index>(i);
  const Vector all = truth.probabilities();
  Vector out(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto it = where.find(ids[j]);
    if (it == where.end()) throw ValidationError("truth file has no site '" + ids[j] + "'");
    out(static_cast<Eigen::Index>(j)) = all(it->second);
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double parse_number(const std::string& s, const fs::path& path, long line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(path.string() + ": bad number '" + s + "'", line);
}

struct GlmPredictions {
  std::vector<std::string> ids;
  Vector probs;
  std::vector<long> totals;
};

GlmPredictions read_glm_outputs(const fs::path& dir) {
  GlmPredictions out;
  const fs::path probs_path = dir / "glm_probs.csv";
  const fs::path totals_path = dir / "glm_totals.csv";
  require_file(probs_path, "GLM probabilities");
  require_file(totals_path, "GLM total-count draws");
  std::ifstream probs(probs_path);
  std::string line;
  std::getline(probs, line);
  std::vector<double> p;
  for (long ln = 2; std::getline(probs, line); ++ln) {
    const auto f = split_fields(line);
    if (f.size() != 2) throw ParseError(probs_path.string() + ": expected id,p_hat", ln);
    out.ids.push_back(f[0]);
    p.push_back(parse_number(f[1], probs_path, ln));
  }
  out.probs = Eigen::Map<Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  std::ifstream totals(totals_path);
  std::getline(totals, line);
  for (long ln = 2; std::getline(totals, line); ++ln) {
    const auto f = split_fields(line);
    if (f.size() != 2) throw ParseError(totals_path.string() + ": expected draw,total", ln);
    out.totals.push_back(static_cast<long>(parse_number(f[1], totals_path, ln)));
  }
  return out;
}

std::vector<ModelAssessment> assess_outputs(const RunConfig& config, const StagePaths& p) {
  const auto [train, val] = load_partition(p);
  if (val.empty()) throw ValidationError("assess: split has no validation sites");
  const auto truths = val.counts();
  const auto totals = val.totals();
  const auto ids = val.ids();
  const Vector observed = observed_proportions(truths, totals);
  std::optional<Vector> latent;
  if (fs::exists(p.truth)) {
    std::ifstream in(p.truth);
    latent = select_truth_probs(read_truth(in), ids);
  }

  std::vector<ModelAssessment> models;
  std::vector<std::pair<std::string, double>> extra;

  const fs::path counts_path = p.pred / "pred_counts.csv";
  const fs::path probs_path = p.pred / "pred_probs.csv";
  require_file(counts_path, "predicted count draws");
  require_file(probs_path, "predicted probability draws");
  std::vector<std::string> count_ids;
  CountMatrix counts;
  {
    std::ifstream in(counts_path);
    counts = read_count_draws(in, &count_ids);
  }
  if (count_ids != ids)
    throw ValidationError("assess: prediction sites differ from the validation split");
  PredictionDraws preds;
  {
    std::ifstream in(probs_path);
    preds = read_prediction_probs(in);
  }
  const Vector p_bglgm = posterior_mean_probs(preds);
  ModelAssessment bglgm{.label = "bglgm",
                        .coverage = empirical_coverage(counts, truths, config.level),
                        .rmse = rmse_probs(p_bglgm, observed),
                        .totals = total_count_summary(counts, truths, config.level)};
  models.push_back(std::move(bglgm));
  if (latent) extra.emplace_back("bglgm", rmse_probs(p_bglgm, *latent));

  if (fs::exists(p.glm / "glm_probs.csv")) {
    GlmPredictions g = read_glm_outputs(p.glm);
    if (g.ids != ids)
      throw ValidationError("assess: GLM prediction sites differ from the validation split");
    ModelAssessment glm{.label = "glm",
                        .coverage = {},
                        .rmse = rmse_probs(g.probs, observed),
                        .totals = total_count_summary(std::move(g.totals), truths, config.level)};
    models.push_back(std::move(glm));
    if (latent) extra.emplace_back("glm", rmse_probs(g.probs, *latent));
  } else {
    spdlog::warn("assess: no GLM outputs in {}, reporting BGLGM only", p.glm.string());
  }

  OutputSet out(p.out);
  out.write("assessment.csv", [&](std::ostream& o) {
    write_assessment(o, ids, truths, config.level, models);
    for (const auto& [label, value] : extra)
      o << label << ",rmse_latent," << format_double(value) << '\n';
  });
  out.commit();
  return models;
}

}  // namespace

StagePaths StagePaths::resolved() const {
  StagePaths r = *this;
  if (r.out.empty()) r.out = ".";
  if (r.data.empty()) r.data = r.out / "dataset.csv";
  if (r.split.empty()) r.split = r.out / "split.txt";
  if (r.chain.empty()) r.chain = r.out / "chain.csv";
  if (r.pred.empty()) r.pred = r.out;
  if (r.glm.empty()) r.glm = r.out;
  if (r.truth.empty()) r.truth = r.out / "truth.csv";
  if (r.elevation.empty()) r.elevation = r.out / "elevation.asc";
  if (r.vegetation.empty()) r.vegetation = r.out / "vegetation.asc";
  return r;
}

std::uint64_t stage_seed(std::uint64_t seed, Stream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

std::uint64_t replication_seed(std::uint64_t seed, int replication) {
  return derive_seed(seed, 1000 + static_cast<std::uint64_t>(replication));
}

void run_simulate(const RunConfig& config, const StagePaths& paths) {
  const StagePaths p = paths.resolved();
  SyntheticConfig syn = config.synthetic;
  syn.seed = stage_seed(config.seed, Stream::simulate);
  const SyntheticDataset s = generate_synthetic_dataset(syn, config.covariates);
  OutputSet out(p.out);
  out.write("dataset.csv", [&](std::ostream& o) { write_dataset(o, s.data); });
  out.write("truth.csv", [&](std::ostream& o) { write_truth(o, s.truth); });
  out.write("elevation.asc", [&](std::ostream& o) { write_ascii_grid(o, s.elevation); });
  out.write("vegetation.asc", [&](std::ostream& o) { write_ascii_grid(o, s.vegetation); });
  out.commit();
}

void run_subsample(const RunConfig& config, const StagePaths& paths) {
  const StagePaths p = paths.resolved();
  const SpatialDataset data = load_checked_dataset(p.data);
  if (static_cast<std::size_t>(config.n_train) > data.size())
    throw ValidationError("split.n_train=" + std::to_string(config.n_train) +
                          " exceeds the " + std::to_string(data.size()) + " dataset sites");

  const auto pool_ids =
      random_subsample(data, config.n_train, stage_seed(config.seed, Stream::split));
  const std::set<std::string> pool_set(pool_ids.begin(), pool_ids.end());
  SplitSpec spec;
  for (const auto& r : data.records)
    if (!pool_set.contains(r.id)) spec.validation_ids.push_back(r.id);
  spec.train_ids = pool_ids;

  OutputSet out(p.out);
  if (config.subsample_size > 0 && config.subsample_size < config.n_train) {
    const SpatialDataset pool = select_records(data, pool_ids);
    const std::uint64_t seed = stage_seed(config.seed, Stream::subsample);
    if (config.subsample_method == "stratified") {
      const Strata strata = make_strata(pool, config.strata, seed);
      spec.train_ids = stratified_subsample(pool, strata, config.subsample_size);
      out.write("strata.csv", [&](std::ostream& o) {
        o << "id,stratum\n";
        for (const auto& r : pool.records) o << r.id << ',' << strata.assignment.at(r.id) << '\n';
      });
    } else {
      spec.train_ids = random_subsample(pool, config.subsample_size, seed);
    }
  }
  spdlog::info("split: {} training, {} validation sites", spec.train_ids.size(),
               spec.validation_ids.size());
  out.write("split.txt", [&](std::ostream& o) { write_split(o, spec); });
  out.commit();
}

void run_fit(const RunConfig& config, const StagePaths& paths) {
  const StagePaths p = paths.resolved();
  const auto [train, val] = load_partition(p);
  const Matrix X = build_design_matrix(train, config.covariates);
  McmcConfig mcmc = config.mcmc;
  mcmc.seed = stage_seed(config.seed, Stream::fit);
  spdlog::info("fit: {} sites, {} iterations, {} chain(s)", train.size(), mcmc.iterations,
               config.chains);
  const std::vector<ChainOutput> chains = run_chains(train, X, config.prior, mcmc, config.chains);

  ChainOutput pooled = chains.front();
  for (std::size_t c = 1; c < chains.size(); ++c)
    pooled.draws.insert(pooled.draws.end(), chains[c].draws.begin(), chains[c].draws.end());

  OutputSet out(p.out);
  out.write("chain.csv", [&](std::ostream& o) { write_chain(o, pooled); });
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string name =
        c == 0 ? "chain_diagnostics.csv" : "chain_diagnostics_" + std::to_string(c) + ".csv";
    out.write(name, [&](std::ostream& o) { write_chain_diagnostics(o, chains[c]); });
  }
  out.commit();
}

void run_glm(const RunConfig& config, const StagePaths& paths) {
  const StagePaths p = paths.resolved();
  const auto [train, val] = load_partition(p);
  const Matrix X = build_design_matrix(train, config.covariates);
  const GlmFit fit = irls_fit(X, train.counts(), train.totals());
  const Vector p_val = glm_predict_probs(fit, build_design_matrix(val, config.covariates));
  const auto totals = glm_parametric_total_counts(p_val, val.totals(), config.glm_draws,
                                                  stage_seed(config.seed, Stream::glm));

  OutputSet out(p.out);
  out.write("glm_fit.csv", [&](std::ostream& o) {
    o << "term,estimate,std_error\n";
    for (Eigen::Index k = 0; k < fit.beta_hat.size(); ++k)
      o << "beta" << k << ',' << format_double(fit.beta_hat(k)) << ','
        << format_double(std::sqrt(fit.cov_hat(k, k))) << '\n';
    o << "\nkey,value\n"
      << "converged," << (fit.converged ? 1 : 0) << '\n'
      << "iterations," << fit.iterations << '\n'
      << "deviance," << format_double(fit.deviance) << '\n'
      << "log_likelihood," << format_double(fit.log_likelihood) << '\n';
  });
  out.write("glm_probs.csv", [&](std::ostream& o) {
    o << "id,p_hat\n";
    for (std::size_t j = 0; j < val.size(); ++j)
      o << val.records[j].id << ',' << format_double(p_val(static_cast<Eigen::Index>(j)))
        << '\n';
  });
  out.write("glm_totals.csv", [&](std::ostream& o) {
    o << "draw,total\n";
    for (std::size_t m = 0; m < totals.size(); ++m) o << m + 1 << ',' << totals[m] << '\n';
  });
  out.commit();
}

void run_predict(const RunConfig& config, const StagePaths& paths) {
  const StagePaths p = paths.resolved();
  const auto [train, val] = load_partition(p);
  const ChainOutput chain = with_file(p.chain, "chain", &read_chain);
  if (chain.draws.empty()) throw ValidationError("predict: chain has no draws");
  const Matrix X_train = build_design_matrix(train, config.covariates);
  const double kappa = config.mcmc.kappa;

  OutputSet out(p.out);
  if (!val.empty()) {
    const PredictionDraws preds =
        predict_sites(chain.draws, train, X_train, val, build_design_matrix(val, config.covariates),
                      kappa, stage_seed(config.seed, Stream::predict));
    const CountMatrix counts =
        draw_counts(preds, val.totals(), stage_seed(config.seed, Stream::counts));
    out.write("pred_probs.csv", [&](std::ostream& o) { write_prediction_probs(o, preds); });
    out.write("pred_counts.csv", [&](std::ostream& o) { write_count_draws(o, counts, val.ids()); });
  } else {
    spdlog::warn("predict: split has no validation sites");
  }

  if (config.predict_grid) {
    if (!fs::exists(p.elevation) || !fs::exists(p.vegetation)) {
      spdlog::warn("predict: covariate rasters not found, skipping grid prediction");
    } else {
      const Raster elevation = load_ascii_grid(p.elevation);
      const Raster vegetation = load_ascii_grid(p.vegetation);
      const GridPrediction grid = predict_grid(
          chain.draws, train, X_train, elevation, vegetation, config.covariates,
          static_cast<std::size_t>(config.grid_draws),
          static_cast<std::size_t>(config.grid_samples), kappa,
          stage_seed(config.seed, Stream::grid));
      out.write("grid_mean.asc", [&](std::ostream& o) { write_ascii_grid(o, grid.mean); });
      for (std::size_t k = 0; k < grid.samples.size(); ++k)
        out.write("grid_sample_" + std::to_string(k + 1) + ".asc",
                  [&](std::ostream& o) { write_ascii_grid(o, grid.samples[k]); });
    }
  }
  out.commit();
}

void run_assess(const RunConfig& config, const StagePaths& paths) {
  assess_outputs(config, paths.resolved());
}

void run_pipeline(const RunConfig& config, const StagePaths& paths) {
  const StagePaths base = paths.resolved();
  const bool external_data = !paths.data.empty();
  auto one = [&](const RunConfig& rc, StagePaths p) {
    if (!external_data) run_simulate(rc, p);
    run_subsample(rc, p);
    run_fit(rc, p);
    run_glm(rc, p);
    run_predict(rc, p);
    return assess_outputs(rc, p.resolved());
  };

  if (config.replications == 1) {
    StagePaths p = paths;
    p.out = base.out;
    one(config, p);
    return;
  }

  std::vector<std::pair<int, std::vector<ModelAssessment>>> results;
  for (int r = 1; r <= config.replications; ++r) {
    RunConfig rc = config;
    rc.seed = replication_seed(config.seed, r);
    StagePaths p = paths;
    p.out = base.out / ("rep_" + std::to_string(r));
    spdlog::info("replication {}/{}", r, config.replications);
    results.emplace_back(r, one(rc, p));
  }
  OutputSet out(base.out);
  out.write("summary.csv", [&](std::ostream& o) {
    o << "replication,model,rmse,coverage,total_lo,total_hi,total_truth,total_covered\n";
    for (const auto& [r, models] : results)
      for (const auto& m : models)
        o << r << ',' << m.label << ',' << format_double(m.rmse) << ','
          << (m.coverage.intervals.empty() ? std::string("NA")
                                           : format_double(m.coverage.coverage))
          << ',' << format_double(m.totals.interval.lo) << ','
          << format_double(m.totals.interval.hi) << ',' << m.totals.truth << ','
          << (m.totals.covered ? 1 : 0) << '\n';
  });
  out.commit();
}

namespace {

/// Routes the default logger to <out>/run.log (the only place timestamps
/// appear) plus warnings on stderr, restoring the previous logger on exit.
class LogScope {
 public:
  explicit LogScope(const fs::path& dir) : previous_(spdlog::default_logger()) {
    fs::create_directories(dir);
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((dir / "run.log").string());
    file->set_level(spdlog::level::info);
    auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    console->set_level(spdlog::level::warn);
    console->set_pattern("%l: %v");
    auto logger = std::make_shared<spdlog::logger>(
        "bglgm", spdlog::sinks_init_list{file, console});
    logger->set_level(spdlog::level::info);
    logger->flush_on(spdlog::level::info);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() {
    spdlog::default_logger()->flush();
    spdlog::set_default_logger(previous_);
  }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_command(const std::vector<std::string>& argv) {
  CLI::App app{"Bayesian generalized linear geostatistical model for binomial counts", "bglgm"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  StagePaths paths;
  std::string out_dir = ".";

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Generate a synthetic dataset, its truth file and covariate rasters"},
      {"subsample", "Split sites into training and validation sets"},
      {"fit", "Run the MCMC sampler on the training sites"},
      {"glm", "Fit the logistic-regression baseline"},
      {"predict", "Posterior predictive draws at validation sites and over the grid"},
      {"assess", "Coverage, RMSE and total-count intervals for each model"},
      {"pipeline", "All stages in sequence for each replication"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--seed", seed, "Overrides the configured seed");
    sub->add_option("--out", out_dir, "Output directory");
    auto path_opt = [&](const char* flag, fs::path& target, const char* what) {
      sub->add_option(flag, target, what);
    };
    path_opt("--data", paths.data, "Dataset CSV (default <out>/dataset.csv)");
    path_opt("--split", paths.split, "Split file (default <out>/split.txt)");
    path_opt("--chain", paths.chain, "Chain CSV (default <out>/chain.csv)");
    path_opt("--pred", paths.pred, "Directory holding pred_*.csv (default <out>)");
    path_opt("--glm", paths.glm, "Directory holding glm_*.csv (default <out>)");
    path_opt("--truth", paths.truth, "Truth file (default <out>/truth.csv)");
    path_opt("--elevation", paths.elevation, "Elevation raster (default <out>/elevation.asc)");
    path_opt("--vegetation", paths.vegetation, "Vegetation raster (default <out>/vegetation.asc)");
  }

  std::vector<const char*> args;
  args.reserve(argv.size());
  for (const auto& a : argv) args.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cout, std::cerr);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  paths.out = out_dir;

  try {
    LogScope log(paths.out);
    try {
      RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (seed) config.seed = *seed;
      spdlog::info("bglgm {} seed={} config={}", command, config.seed,
                   config_path.empty() ? "<defaults>" : config_path);
      if (command == "simulate") run_simulate(config, paths);
      else if (command == "subsample") run_subsample(config, paths);
      else if (command == "fit") run_fit(config, paths);
      else if (command == "glm") run_glm(config, paths);
      else if (command == "predict") run_predict(config, paths);
      else if (command == "assess") run_assess(config, paths);
      else run_pipeline(config, paths);
      spdlog::info("bglgm {} done", command);
    } catch (const std::exception& e) {
      spdlog::error("{} failed: {}", command, e.what());
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace bglgm::cli
