#pragma once

#include <span>
#include <string>
#include <vector>

#include "evimpact/types.hpp"

namespace evimpact::eval {

struct ClipEval {
  std::string clip_id;
  std::string scenario_id;
  double t_est_ms = 0.0;
  double t_gt_ms = 0.0;

  double abs_err_ms() const;
};

struct Thresholds {
  double sigma_ms = 0.513;  // human annotator noise level
  std::vector<double> multiples{1.0, 2.0};

  void validate() const;
};

// Per-clip mean of the annotation times.
double gt_from_annotations(std::span<const double> times_ms);

// Per-clip sample (n-1) standard deviation, averaged across clips.
double annotator_sigma(const std::vector<std::vector<double>> &annotations_ms);

double mae(std::span<const ClipEval> evals);

// Percent of clips with abs_err strictly below the threshold.
double success_rate(std::span<const ClipEval> evals, double threshold_ms);

struct ReportRow {
  std::string scenario;  // "avg" for the pooled row
  double mae_ms = 0.0;
  double sr_1sigma_pct = 0.0;
  double sr_2sigma_pct = 0.0;
  int n_clips = 0;
};

struct Report {
  std::vector<ReportRow> rows;  // scenarios ascending, then pooled "avg"

  std::string to_csv() const;
  std::string to_json() const;
};

Report report(std::span<const ClipEval> evals, const Thresholds &thresholds);

}  // namespace evimpact::eval
