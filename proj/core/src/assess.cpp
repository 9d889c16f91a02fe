#include "bglgm/assess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace bglgm {

namespace {

std::size_t window_size(std::size_t n, double level) {
  if (n == 0) throw ValidationError("credible interval of an empty sample");
  if (!(level > 0.0) || !(level < 1.0))
    throw ValidationError("credible level must lie in (0, 1)");
  // Guard against level * n landing a hair above an integer.
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace

Interval narrowest_credible_interval(std::vector<double> samples, double level) {
  const std::size_t k = window_size(samples.size(), level);
  std::sort(samples.begin(), samples.end());
  std::size_t best = 0;
  double best_width = samples[k - 1] - samples[0];
  for (std::size_t i = 1; i + k <= samples.size(); ++i) {
    const double w = samples[i + k - 1] - samples[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + k - 1]};
}

Interval equal_tailed_interval(std::vector<double> samples, double level) {
  const std::size_t k = window_size(samples.size(), level);
  std::sort(samples.begin(), samples.end());
  const std::size_t lo = (samples.size() - k) / 2;
  return {samples[lo], samples[lo + k - 1]};
}

CoverageResult empirical_coverage(const CountMatrix& count_draws,
                                  std::span<const int> truths, double level) {
  if (count_draws.cols() != static_cast<Eigen::Index>(truths.size()))
    throw ValidationError("empirical_coverage: column count differs from truths");
  CoverageResult out;
  const auto sites = truths.size();
  if (sites == 0) return out;
  std::size_t hits = 0;
  double width = 0.0;
  for (std::size_t j = 0; j < sites; ++j) {
    std::vector<double> col(static_cast<std::size_t>(count_draws.rows()));
    for (Eigen::Index m = 0; m < count_draws.rows(); ++m)
      col[static_cast<std::size_t>(m)] = count_draws(m, static_cast<Eigen::Index>(j));
    const Interval iv = narrowest_credible_interval(std::move(col), level);
    const bool hit = iv.contains(truths[j]);
    out.intervals.push_back(iv);
    out.hits.push_back(hit);
    hits += hit ? 1 : 0;
    width += iv.width();
  }
  out.coverage = static_cast<double>(hits) / static_cast<double>(sites);
  out.mean_width = width / static_cast<double>(sites);
  return out;
}

double rmse_probs(const Vector& p_hat, const Vector& p_true) {
  if (p_hat.size() != p_true.size()) throw ValidationError("rmse_probs: length mismatch");
  if (p_hat.size() == 0) return 0.0;
  return std::sqrt((p_hat - p_true).squaredNorm() / static_cast<double>(p_hat.size()));
}

TotalCountSummary total_count_summary(std::vector<long> totals,
                                      std::span<const int> truths, double level) {
  TotalCountSummary out;
  out.truth = std::accumulate(truths.begin(), truths.end(), 0L);
  out.interval = narrowest_credible_interval(
      std::vector<double>(totals.begin(), totals.end()), level);
  out.covered = out.interval.contains(static_cast<double>(out.truth));
  out.totals = std::move(totals);
  return out;
}

TotalCountSummary total_count_summary(const CountMatrix& count_draws,
                                      std::span<const int> truths, double level) {
  if (count_draws.cols() != static_cast<Eigen::Index>(truths.size()))
    throw ValidationError("total_count_summary: column count differs from truths");
  std::vector<long> totals(static_cast<std::size_t>(count_draws.rows()));
  for (Eigen::Index m = 0; m < count_draws.rows(); ++m)
    totals[static_cast<std::size_t>(m)] = count_draws.row(m).cast<long>().sum();
  return total_count_summary(std::move(totals), truths, level);
}

Vector observed_proportions(std::span<const int> y, std::span<const int> n) {
  Vector p(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    p(static_cast<Eigen::Index>(i)) = n[i] > 0 ? static_cast<double>(y[i]) / n[i] : 0.0;
  return p;
}

void write_assessment(std::ostream& out, std::span<const std::string> site_ids,
                      std::span<const int> truths, double level,
                      std::span<const ModelAssessment> models) {
  out << "site,truth";
  for (const auto& m : models) {
    if (m.coverage.intervals.empty()) continue;
    out << ',' << m.label << "_lo," << m.label << "_hi," << m.label << "_hit";
  }
  out << '\n';
  for (std::size_t j = 0; j < site_ids.size(); ++j) {
    out << site_ids[j] << ',' << truths[j];
    for (const auto& m : models) {
      if (m.coverage.intervals.empty()) continue;
      const auto& iv = m.coverage.intervals[j];
      out << ',' << format_double(iv.lo) << ',' << format_double(iv.hi) << ','
          << (m.coverage.hits[j] ? 1 : 0);
    }
    out << '\n';
  }
  out << '\n' << "model,metric,value\n";
  for (const auto& m : models) {
    out << m.label << ",level," << format_double(level) << '\n';
    if (!m.coverage.intervals.empty()) {
      out << m.label << ",coverage," << format_double(m.coverage.coverage) << '\n'
          << m.label << ",mean_interval_width," << format_double(m.coverage.mean_width)
          << '\n';
    }
    out << m.label << ",rmse," << format_double(m.rmse) << '\n'
        << m.label << ",total_lo," << format_double(m.totals.interval.lo) << '\n'
        << m.label << ",total_hi," << format_double(m.totals.interval.hi) << '\n'
        << m.label << ",total_truth," << m.totals.truth << '\n'
        << m.label << ",total_covered," << (m.totals.covered ? 1 : 0) << '\n';
  }
}

}  // namespace bglgm
