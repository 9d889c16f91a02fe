#include "bglgm/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace bglgm {

namespace {

constexpr const char* kHeader = "id,x,y,n_total,y_hardwood,elevation,vegetation";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view field, const char* name, long line) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw ParseError("cannot parse " + std::string(name) + " from '" +
                         std::string(field) + "'",
                     line);
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<Site> SpatialDataset::sites() const {
  std::vector<Site> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.x, r.y});
  return out;
}

std::vector<int> SpatialDataset::totals() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.n_total);
  return out;
}

std::vector<int> SpatialDataset::counts() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.y_hardwood);
  return out;
}

std::vector<std::string> SpatialDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

Eigen::RowVector4d design_row(double elevation, double vegetation,
                              const CovariateConstants& c) {
  const double dv = vegetation - c.vegetation_change_point;
  return {1.0, (elevation - c.elevation_center) / c.elevation_scale,
          std::min(dv, 0.0) / c.vegetation_scale,
          std::max(dv, 0.0) / c.vegetation_scale};
}

Matrix build_design_matrix(const SpatialDataset& data,
                           const CovariateConstants& constants) {
  Matrix X(static_cast<Eigen::Index>(data.size()), kDesignColumns);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    X.row(static_cast<Eigen::Index>(i)) = design_row(r.elevation, r.vegetation, constants);
  }
  return X;
}

void validate_dataset(const SpatialDataset& data) {
  std::unordered_set<std::string> seen;
  for (const auto& r : data.records) {
    if (!seen.insert(r.id).second)
      throw ValidationError("duplicate plot id '" + r.id + "'");
    if (r.n_total < 0 || r.y_hardwood < 0)
      throw ValidationError("plot '" + r.id + "': negative count");
    if (r.y_hardwood > r.n_total)
      throw ValidationError("plot '" + r.id + "': y_hardwood " +
                            std::to_string(r.y_hardwood) + " exceeds n_total " +
                            std::to_string(r.n_total));
    if (!std::isfinite(r.x) || !std::isfinite(r.y))
      throw ValidationError("plot '" + r.id + "': non-finite coordinates");
    if (!std::isfinite(r.vegetation) || !std::isfinite(r.elevation))
      throw ValidationError("plot '" + r.id + "': non-finite covariate");
  }
}

std::size_t jitter_duplicate_sites(SpatialDataset& data) {
  constexpr double kStep = 1e-6;
  std::set<std::pair<double, double>> taken;
  std::size_t moved = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    auto& r = data.records[i];
    if (taken.contains({r.x, r.y})) {
      const double x0 = r.x;
      const double y0 = r.y;
      double k = 1.0;
      while (taken.contains({r.x, r.y})) {
        r.x = x0 + kStep * k * static_cast<double>(i + 1);
        k += 1.0;
      }
      spdlog::warn("plot '{}' shares coordinates ({}, {}) with an earlier plot; "
                   "moved to x={}", r.id, x0, y0, r.x);
      ++moved;
    }
    taken.insert({r.x, r.y});
  }
  return moved;
}

SpatialDataset read_dataset(std::istream& in) {
  SpatialDataset data;
  double coord_scale = 1.0;
  bool header_seen = false;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.starts_with("units=")) {
        const auto unit = trim(body.substr(6));
        if (unit == "m") coord_scale = 1e-3;
        else if (unit == "km") coord_scale = 1.0;
        else throw ParseError("unknown units '" + std::string(unit) + "'", line_no);
      } else if (body.starts_with("crs=")) {
        data.crs_note = std::string(body.substr(4));
      }
      continue;
    }
    if (!header_seen) {
      if (line != kHeader)
        throw ParseError(std::string("expected header '") + kHeader + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 7)
      throw ParseError("expected 7 fields, found " + std::to_string(f.size()), line_no);
    PlotRecord r;
    r.id = std::string(f[0]);
    if (r.id.empty()) throw ParseError("empty id", line_no);
    r.x = parse_number<double>(f[1], "x", line_no) * coord_scale;
    r.y = parse_number<double>(f[2], "y", line_no) * coord_scale;
    r.n_total = parse_number<int>(f[3], "n_total", line_no);
    r.y_hardwood = parse_number<int>(f[4], "y_hardwood", line_no);
    r.elevation = parse_number<double>(f[5], "elevation", line_no);
    r.vegetation = parse_number<double>(f[6], "vegetation", line_no);
    data.records.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("missing header", line_no);
  if (data.empty()) throw ValidationError("dataset has no records");
  validate_dataset(data);
  jitter_duplicate_sites(data);
  return data;
}

SpatialDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const SpatialDataset& data) {
  if (!data.crs_note.empty()) out << "# crs=" << data.crs_note << '\n';
  out << "# units=km\n" << kHeader << '\n';
  for (const auto& r : data.records) {
    out << r.id << ',' << format_double(r.x) << ',' << format_double(r.y) << ','
        << r.n_total << ',' << r.y_hardwood << ',' << format_double(r.elevation)
        << ',' << format_double(r.vegetation) << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const SpatialDataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(out, data);
}

SplitSpec read_split(std::istream& in) {
  SplitSpec spec;
  bool have_train = false;
  bool have_valid = false;
  std::string raw;
  long line_no = 0;
  auto parse_ids = [](std::string_view list) {
    std::vector<std::string> ids;
    if (trim(list).empty()) return ids;
    for (auto f : split_fields(list)) {
      if (!f.empty()) ids.emplace_back(f);
    }
    return ids;
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("train=")) {
      spec.train_ids = parse_ids(line.substr(6));
      have_train = true;
    } else if (line.starts_with("validation=")) {
      spec.validation_ids = parse_ids(line.substr(11));
      have_valid = true;
    } else {
      throw ParseError("expected 'train=' or 'validation='", line_no);
    }
  }
  if (!have_train || !have_valid)
    throw ParseError("split file needs both train= and validation= lines", line_no);
  return spec;
}

SplitSpec load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open split file " + path.string());
  return read_split(in);
}

void write_split(std::ostream& out, const SplitSpec& spec) {
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ',';
      s += ids[i];
    }
    return s;
  };
  out << "train=" << join(spec.train_ids) << '\n'
      << "validation=" << join(spec.validation_ids) << '\n';
}

std::pair<SpatialDataset, SpatialDataset> split_train_validation(
    const SpatialDataset& data, const SplitSpec& spec) {
  std::map<std::string, int> role;  // 1 train, 2 validation
  std::unordered_set<std::string> known;
  for (const auto& r : data.records) known.insert(r.id);
  for (const auto& id : spec.train_ids) {
    if (!known.contains(id)) throw ValidationError("unknown train id '" + id + "'");
    role[id] = 1;
  }
  for (const auto& id : spec.validation_ids) {
    if (!known.contains(id))
      throw ValidationError("unknown validation id '" + id + "'");
    auto [it, inserted] = role.emplace(id, 2);
    if (!inserted && it->second == 1)
      throw ValidationError("id '" + id + "' is in both train and validation");
  }
  SpatialDataset train{.records = {}, .crs_note = data.crs_note};
  SpatialDataset valid{.records = {}, .crs_note = data.crs_note};
  for (const auto& r : data.records) {
    const auto it = role.find(r.id);
    if (it == role.end()) continue;
    (it->second == 1 ? train : valid).records.push_back(r);
  }
  return {std::move(train), std::move(valid)};
}

SpatialDataset select_records(const SpatialDataset& data,
                              std::span<const std::string> ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  SpatialDataset out{.records = {}, .crs_note = data.crs_note};
  for (const auto& r : data.records) {
    if (wanted.contains(r.id)) out.records.push_back(r);
  }
  if (out.size() != wanted.size())
    throw ValidationError("selection references ids missing from the dataset");
  return out;
}

}  // namespace bglgm
