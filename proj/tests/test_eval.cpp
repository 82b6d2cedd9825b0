#include <doctest.h>

#include <cmath>
#include <random>

#include "evimpact/eval.hpp"

using namespace evimpact;
using namespace evimpact::eval;

namespace {

ClipEval clip(const char *id, const char *scenario, double est, double gt) {
  ClipEval e;
  e.clip_id = id;
  e.scenario_id = scenario;
  e.t_est_ms = est;
  e.t_gt_ms = gt;
  return e;
}

}  // namespace

TEST_CASE("annotation aggregation") {
  const std::vector<double> times{0.0, 1.0, 2.0};
  CHECK(gt_from_annotations(times) == doctest::Approx(1.0));

  // Sample std of {0,1,2} is 1; of {4,4,4} is 0; average is 0.5.
  const std::vector<std::vector<double>> anns{{0.0, 1.0, 2.0}, {4.0, 4.0, 4.0}};
  CHECK(annotator_sigma(anns) == doctest::Approx(0.5));

  CHECK_THROWS_AS(gt_from_annotations(std::span<const double>{}), DomainError);
  CHECK_THROWS_AS(annotator_sigma({{1.0}}), DomainError);  // needs n >= 2
}

TEST_CASE("mae and success rate on a hand-computed set") {
  const std::vector<ClipEval> evals{
      clip("c0", "s1", 10.1, 10.0),  // err 0.1
      clip("c1", "s1", 10.5, 10.0),  // err 0.5
      clip("c2", "s1", 12.0, 10.0),  // err 2.0
  };
  CHECK(evals[0].abs_err_ms() == doctest::Approx(0.1));
  CHECK(mae(evals) == doctest::Approx((0.1 + 0.5 + 2.0) / 3.0));
  CHECK(success_rate(evals, 0.513) == doctest::Approx(100.0 * 2.0 / 3.0));
  CHECK(success_rate(evals, 1.026) == doctest::Approx(100.0 * 2.0 / 3.0));
  CHECK(success_rate(evals, 2.5) == doctest::Approx(100.0));
}

TEST_CASE("success rate threshold is strict") {
  // Exactly representable error of 0.5: equality must not count as a hit.
  const std::vector<ClipEval> evals{clip("c0", "s1", 10.5, 10.0)};
  CHECK(success_rate(evals, 0.5) == doctest::Approx(0.0));
  CHECK(success_rate(evals, 0.5001) == doctest::Approx(100.0));
}

TEST_CASE("success rate is monotone in the threshold") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<ClipEval> evals;
  for (int i = 0; i < 40; ++i)
    evals.push_back(clip("c", "s", 10.0 + u(rng), 10.0));
  double last = -1.0;
  for (double thr = 0.1; thr < 3.0; thr += 0.1) {
    const double sr = success_rate(evals, thr);
    CHECK(sr >= last);
    last = sr;
  }
  CHECK(last == doctest::Approx(100.0));
}

TEST_CASE("empty evaluation sets are rejected") {
  CHECK_THROWS_AS(mae(std::span<const ClipEval>{}), DomainError);
  CHECK_THROWS_AS(success_rate(std::span<const ClipEval>{}, 1.0), DomainError);
  CHECK_THROWS_AS(report(std::span<const ClipEval>{}, Thresholds{}), DomainError);
}

TEST_CASE("report groups by scenario with a pooled avg row") {
  const std::vector<ClipEval> evals{
      clip("c0", "swing_a", 10.1, 10.0),   // err 0.1
      clip("c1", "swing_a", 10.4, 10.0),   // err 0.4
      clip("c2", "swing_b", 11.0, 10.0),   // err 1.0
      clip("c3", "swing_b", 10.0, 10.75),  // err 0.75
  };
  const Report r = report(evals, Thresholds{});
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].scenario == "swing_a");
  CHECK(r.rows[0].mae_ms == doctest::Approx(0.25));
  CHECK(r.rows[0].sr_1sigma_pct == doctest::Approx(100.0));
  CHECK(r.rows[0].sr_2sigma_pct == doctest::Approx(100.0));
  CHECK(r.rows[0].n_clips == 2);
  CHECK(r.rows[1].scenario == "swing_b");
  CHECK(r.rows[1].mae_ms == doctest::Approx(0.875));
  CHECK(r.rows[1].sr_1sigma_pct == doctest::Approx(0.0));
  CHECK(r.rows[1].sr_2sigma_pct == doctest::Approx(100.0));
  CHECK(r.rows[2].scenario == "avg");
  CHECK(r.rows[2].n_clips == 4);
  // The pooled row is clip-pooled, not a mean of scenario means.
  CHECK(r.rows[2].mae_ms == doctest::Approx((0.1 + 0.4 + 1.0 + 0.75) / 4.0));
  CHECK(r.rows[2].sr_1sigma_pct == doctest::Approx(50.0));
}

TEST_CASE("pooled mae equals the clip-weighted mean of scenario maes") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<int> pick(0, 2);
  const char *names[3] = {"a", "b", "c"};
  std::vector<ClipEval> evals;
  for (int i = 0; i < 60; ++i)
    evals.push_back(clip("c", names[pick(rng)], 5.0 + u(rng), 5.0));
  const Report r = report(evals, Thresholds{});
  double weighted = 0.0;
  int total = 0;
  for (const ReportRow &row : r.rows) {
    if (row.scenario == "avg") continue;
    weighted += row.mae_ms * row.n_clips;
    total += row.n_clips;
  }
  CHECK(total == 60);
  CHECK(r.rows.back().mae_ms == doctest::Approx(weighted / total).epsilon(1e-9));
}

TEST_CASE("csv layout") {
  const std::vector<ClipEval> evals{
      clip("c0", "swing_a", 10.1, 10.0),
      clip("c1", "swing_b", 12.5, 10.0),
  };
  const Report r = report(evals, Thresholds{});
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("scenario,mae_ms,sr_1sigma_pct,sr_2sigma_pct,n_clips\n", 0) == 0);
  CHECK(csv.find("swing_a,") != std::string::npos);
  CHECK(csv.find("\navg,") != std::string::npos);
  // Three data rows after the header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const std::string json = r.to_json();
  CHECK(json.find("\"scenario\"") != std::string::npos);
  CHECK(json.find("\"avg\"") != std::string::npos);
}

TEST_CASE("threshold validation") {
  Thresholds t;
  t.sigma_ms = 0.0;
  CHECK_THROWS_AS(t.validate(), DomainError);
  t = Thresholds{};
  t.multiples = {};
  CHECK_THROWS_AS(t.validate(), DomainError);
  t = Thresholds{};
  t.multiples = {1.0, -2.0};
  CHECK_THROWS_AS(t.validate(), DomainError);
}
