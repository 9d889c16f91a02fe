#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bglgm/common.hpp"
#include "bglgm/predict.hpp"

namespace bglgm {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  /// Endpoints inclusive.
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Shortest window of the sorted samples holding ceil(level N) of them;
/// ties go to the smallest lower end.
Interval narrowest_credible_interval(std::vector<double> samples, double level);

/// Central interval between the (1-level)/2 and (1+level)/2 order statistics,
/// over the same ceil(level N)-sample window size.
Interval equal_tailed_interval(std::vector<double> samples, double level);

struct CoverageResult {
  double coverage = 0.0;
  double mean_width = 0.0;
  std::vector<Interval> intervals;
  std::vector<bool> hits;
};

/// Fraction of sites whose true count lies inside its narrowest interval.
CoverageResult empirical_coverage(const CountMatrix& count_draws,
                                  std::span<const int> truths, double level);

double rmse_probs(const Vector& p_hat, const Vector& p_true);

struct TotalCountSummary {
  std::vector<long> totals;  // per-draw row sums
  Interval interval;
  long truth = 0;
  bool covered = false;
};

TotalCountSummary total_count_summary(const CountMatrix& count_draws,
                                      std::span<const int> truths, double level = 0.95);
TotalCountSummary total_count_summary(std::vector<long> totals,
                                      std::span<const int> truths, double level = 0.95);

/// Observed proportions y / n.
Vector observed_proportions(std::span<const int> y, std::span<const int> n);

struct ModelAssessment {
  std::string label;
  CoverageResult coverage;  // may be empty for models without count draws
  double rmse = 0.0;
  TotalCountSummary totals;
};

/// Per-site block (id, truth, interval, hit) followed by an aggregate block.
void write_assessment(std::ostream& out, std::span<const std::string> site_ids,
                      std::span<const int> truths, double level,
                      std::span<const ModelAssessment> models);

}  // namespace bglgm
