#include "bglgm/raster.hpp"

#include <fstream>
#include <sstream>

#include "bglgm/data.hpp"

namespace bglgm {

Site GridSpec::center(int row, int col) const {
  return {xll + (col + 0.5) * cellsize, yll + (ny - row - 0.5) * cellsize};
}

std::vector<Site> GridSpec::centers() const {
  std::vector<Site> out;
  out.reserve(cells());
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c) out.push_back(center(r, c));
  return out;
}

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) throw ValidationError("grid needs nx, ny >= 1");
  if (!(cellsize > 0.0) || !std::isfinite(xll) || !std::isfinite(yll))
    throw ValidationError("grid needs finite corner and positive cellsize");
}

Raster read_ascii_grid(std::istream& in) {
  Raster raster;
  double nodata = Raster::kNoData;
  const char* keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
                        "NODATA_value"};
  long line_no = 0;
  for (const char* key : keys) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(std::string("missing ") + key, line_no + 1);
    ++line_no;
    std::istringstream ss(line);
    std::string name;
    double value = 0.0;
    if (!(ss >> name >> value) || name != key)
      throw ParseError(std::string("expected '") + key + " <value>'", line_no);
    if (name == "ncols") raster.grid.nx = static_cast<int>(value);
    else if (name == "nrows") raster.grid.ny = static_cast<int>(value);
    else if (name == "xllcorner") raster.grid.xll = value;
    else if (name == "yllcorner") raster.grid.yll = value;
    else if (name == "cellsize") raster.grid.cellsize = value;
    else nodata = value;
  }
  raster.grid.validate();
  raster.values.reserve(raster.grid.cells());
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      raster.values.push_back(v == nodata ? Raster::kNoData : v);
    } catch (const std::exception&) {
      throw ParseError("bad raster value '" + token + "'", line_no);
    }
  }
  if (raster.values.size() != raster.grid.cells())
    throw ParseError("raster has " + std::to_string(raster.values.size()) +
                         " values, expected " + std::to_string(raster.grid.cells()),
                     line_no);
  return raster;
}

Raster load_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open raster " + path.string());
  return read_ascii_grid(in);
}

void write_ascii_grid(std::ostream& out, const Raster& raster) {
  const auto& g = raster.grid;
  out << "ncols " << g.nx << '\n'
      << "nrows " << g.ny << '\n'
      << "xllcorner " << format_double(g.xll) << '\n'
      << "yllcorner " << format_double(g.yll) << '\n'
      << "cellsize " << format_double(g.cellsize) << '\n'
      << "NODATA_value -9999\n";
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      if (c) out << ' ';
      const double v = raster.values[static_cast<std::size_t>(r) * g.nx + c];
      out << (v == Raster::kNoData ? std::string("-9999") : format_double(v));
    }
    out << '\n';
  }
}

void save_ascii_grid(const std::filesystem::path& path, const Raster& raster) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_ascii_grid(out, raster);
}

}  // namespace bglgm
