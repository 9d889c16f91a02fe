#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bglgm/common.hpp"

namespace bglgm {

/// One forest plot. Coordinates are projected planar kilometres.
struct PlotRecord {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int n_total = 0;
  int y_hardwood = 0;
  double elevation = 0.0;
  double vegetation = 0.0;

  friend bool operator==(const PlotRecord&, const PlotRecord&) = default;
};

struct SpatialDataset {
  std::vector<PlotRecord> records;
  std::string crs_note;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::vector<Site> sites() const;
  std::vector<int> totals() const;
  std::vector<int> counts() const;
  std::vector<std::string> ids() const;

  friend bool operator==(const SpatialDataset&, const SpatialDataset&) = default;
};

/// Centering and scaling constants for the covariate construction.
/// Defaults are the forest-inventory values: elevation centred at 320 m with
/// divisor 50, vegetation change point 0.3 with divisor 0.05.
struct CovariateConstants {
  double elevation_center = 320.0;
  double elevation_scale = 50.0;
  double vegetation_change_point = 0.3;
  double vegetation_scale = 0.05;
};

inline constexpr int kDesignColumns = 4;

/// Row (1, (A-c)/s, min(V-v0,0)/w, max(V-v0,0)/w).
Eigen::RowVector4d design_row(double elevation, double vegetation,
                              const CovariateConstants& constants = {});

Matrix build_design_matrix(const SpatialDataset& data,
                           const CovariateConstants& constants = {});

/// Checks ids unique, counts within totals and finite coordinates.
/// Throws ValidationError.
void validate_dataset(const SpatialDataset& data);

/// Moves later records that share coordinates with an earlier one by a
/// deterministic 1e-6 km step keyed on the record index. Returns the number
/// of records moved.
std::size_t jitter_duplicate_sites(SpatialDataset& data);

SpatialDataset read_dataset(std::istream& in);
SpatialDataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const SpatialDataset& data);
void save_dataset(const std::filesystem::path& path, const SpatialDataset& data);

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

SplitSpec read_split(std::istream& in);
SplitSpec load_split(const std::filesystem::path& path);
void write_split(std::ostream& out, const SplitSpec& spec);

/// Partitions `data` into (train, validation), each in dataset record order.
/// Throws ValidationError on unknown or overlapping ids.
std::pair<SpatialDataset, SpatialDataset> split_train_validation(
    const SpatialDataset& data, const SplitSpec& spec);

/// Records whose ids appear in `ids`, in dataset order.
SpatialDataset select_records(const SpatialDataset& data,
                              std::span<const std::string> ids);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace bglgm
