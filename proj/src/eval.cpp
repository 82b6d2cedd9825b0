#include "evimpact/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace evimpact::eval {

double ClipEval::abs_err_ms() const { return std::abs(t_est_ms - t_gt_ms); }

void Thresholds::validate() const {
  if (sigma_ms <= 0.0) throw DomainError("Thresholds: sigma must be positive");
  if (multiples.empty()) throw DomainError("Thresholds: no multiples");
  for (double m : multiples)
    if (m <= 0.0) throw DomainError("Thresholds: multiples must be positive");
}

double gt_from_annotations(std::span<const double> times_ms) {
  if (times_ms.size() < 2)
    throw DomainError("gt_from_annotations: need at least 2 annotations");
  double sum = 0.0;
  for (double t : times_ms) sum += t;
  return sum / double(times_ms.size());
}

double annotator_sigma(const std::vector<std::vector<double>> &annotations_ms) {
  if (annotations_ms.empty())
    throw DomainError("annotator_sigma: no clips");
  double total = 0.0;
  for (const auto &clip : annotations_ms) {
    if (clip.size() < 2)
      throw DomainError("annotator_sigma: clip with fewer than 2 annotations");
    const double mean = gt_from_annotations(clip);
    double sq = 0.0;
    for (double t : clip) sq += (t - mean) * (t - mean);
    total += std::sqrt(sq / double(clip.size() - 1));
  }
  return total / double(annotations_ms.size());
}

double mae(std::span<const ClipEval> evals) {
  if (evals.empty()) throw DomainError("mae: empty input");
  double sum = 0.0;
  for (const ClipEval &e : evals) sum += e.abs_err_ms();
  return sum / double(evals.size());
}

double success_rate(std::span<const ClipEval> evals, double threshold_ms) {
  if (evals.empty()) throw DomainError("success_rate: empty input");
  int hits = 0;
  for (const ClipEval &e : evals)
    if (e.abs_err_ms() < threshold_ms) ++hits;
  return 100.0 * double(hits) / double(evals.size());
}

Report report(std::span<const ClipEval> evals, const Thresholds &thresholds) {
  thresholds.validate();
  if (thresholds.multiples.size() < 2)
    throw DomainError("report: expected 1-sigma and 2-sigma multiples");
  const double t1 = thresholds.multiples[0] * thresholds.sigma_ms;
  const double t2 = thresholds.multiples[1] * thresholds.sigma_ms;

  std::map<std::string, std::vector<ClipEval>> groups;
  for (const ClipEval &e : evals) groups[e.scenario_id].push_back(e);

  Report rep;
  for (const auto &[scenario, group] : groups) {
    ReportRow row;
    row.scenario = scenario;
    row.mae_ms = mae(group);
    row.sr_1sigma_pct = success_rate(group, t1);
    row.sr_2sigma_pct = success_rate(group, t2);
    row.n_clips = int(group.size());
    rep.rows.push_back(row);
  }
  // Pooled row: clip-weighted over all evals.
  ReportRow avg;
  avg.scenario = "avg";
  avg.mae_ms = mae(evals);
  avg.sr_1sigma_pct = success_rate(evals, t1);
  avg.sr_2sigma_pct = success_rate(evals, t2);
  avg.n_clips = int(evals.size());
  rep.rows.push_back(avg);
  return rep;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "scenario,mae_ms,sr_1sigma_pct,sr_2sigma_pct,n_clips\n";
  os.precision(6);
  os << std::fixed;
  for (const ReportRow &row : rows)
    os << row.scenario << ',' << row.mae_ms << ',' << row.sr_1sigma_pct << ','
       << row.sr_2sigma_pct << ',' << row.n_clips << '\n';
  return os.str();
}

std::string Report::to_json() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "{\"rows\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ReportRow &row = rows[i];
    if (i) os << ',';
    os << "{\"scenario\":\"" << row.scenario << "\",\"mae_ms\":" << row.mae_ms
       << ",\"sr_1sigma_pct\":" << row.sr_1sigma_pct
       << ",\"sr_2sigma_pct\":" << row.sr_2sigma_pct
       << ",\"n_clips\":" << row.n_clips << '}';
  }
  os << "]}";
  return os.str();
}

}  // namespace evimpact::eval
