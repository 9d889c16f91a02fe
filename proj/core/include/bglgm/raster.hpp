#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "bglgm/common.hpp"

namespace bglgm {

/// Regular grid of square cells. Row 0 is the northern edge, as in the
/// ASCII grid format.
struct GridSpec {
  int nx = 1;
  int ny = 1;
  double xll = 0.0;  // km
  double yll = 0.0;  // km
  double cellsize = 1.0;  // km

  std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  /// Centre of the cell at (row, col).
  Site center(int row, int col) const;
  /// Cell centres in row-major order.
  std::vector<Site> centers() const;
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct Raster {
  static constexpr double kNoData = -9999.0;

  GridSpec grid;
  std::vector<double> values;  // row-major, nx * ny

  bool is_nodata(std::size_t k) const { return values[k] == kNoData; }
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Plain ASCII grid: ncols, nrows, xllcorner, yllcorner, cellsize,
/// NODATA_value -9999, then rows of values from north to south.
Raster read_ascii_grid(std::istream& in);
Raster load_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(std::ostream& out, const Raster& raster);
void save_ascii_grid(const std::filesystem::path& path, const Raster& raster);

}  // namespace bglgm
