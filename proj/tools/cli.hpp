#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace bglgm::cli {

/// Input and output locations for one stage. Empty inputs default to the
/// conventional file names inside `out`.
struct StagePaths {
  std::filesystem::path out;
  std::filesystem::path data;
  std::filesystem::path split;
  std::filesystem::path chain;
  std::filesystem::path pred;
  std::filesystem::path glm;
  std::filesystem::path truth;
  std::filesystem::path elevation;
  std::filesystem::path vegetation;

  StagePaths resolved() const;
};

// Stage seeds are derived from the run seed so every stage draws from its
// own stream regardless of which stages run.
enum class Stream : std::uint64_t {
  simulate = 101,
  split = 102,
  subsample = 103,
  fit = 104,
  predict = 105,
  counts = 106,
  glm = 107,
  grid = 108,
};

std::uint64_t stage_seed(std::uint64_t seed, Stream stream);
std::uint64_t replication_seed(std::uint64_t seed, int replication);

void run_simulate(const RunConfig& config, const StagePaths& paths);
void run_subsample(const RunConfig& config, const StagePaths& paths);
void run_fit(const RunConfig& config, const StagePaths& paths);
void run_glm(const RunConfig& config, const StagePaths& paths);
void run_predict(const RunConfig& config, const StagePaths& paths);
void run_assess(const RunConfig& config, const StagePaths& paths);
/// All stages for each replication; with replications > 1 each one gets its
/// own rep_<r> directory and seed.
void run_pipeline(const RunConfig& config, const StagePaths& paths);

/// Full command line entry point. Returns the process exit status.
int run_command(const std::vector<std::string>& argv);

}  // namespace bglgm::cli
