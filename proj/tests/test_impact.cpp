#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "evimpact/impact.hpp"

using namespace evimpact;
using namespace evimpact::impact;

namespace {

std::filesystem::path temp_file(const char *name) {
  return std::filesystem::temp_directory_path() / name;
}

// Complete the background channel so the stack sits on the simplex.
void fix_background(PlaneStack &s) {
  for (int k = 0; k < s.k_count; ++k) {
    auto bg = s.channel(k, kClassBackground);
    auto bat = s.channel(k, kClassBat);
    auto ball = s.channel(k, kClassBall);
    for (std::size_t i = 0; i < bg.size(); ++i)
      bg[i] = 1.0f - bat[i] - ball[i];
  }
}

}  // namespace

TEST_CASE("weighted centroid basics") {
  SUBCASE("single pixel lands on its center") {
    std::vector<double> chan(5 * 7, 0.0);
    chan[2 * 7 + 4] = 1.5;  // row 2, column 4
    const auto c = weighted_centroid(chan, 5, 7);
    REQUIRE(c.has_value());
    CHECK(c->x == doctest::Approx(4.0));
    CHECK(c->y == doctest::Approx(2.0));
  }

  SUBCASE("uniform mass gives the geometric center") {
    std::vector<double> chan(6 * 4, 0.25);
    const auto c = weighted_centroid(chan, 6, 4);
    REQUIRE(c.has_value());
    CHECK(c->x == doctest::Approx(1.5));
    CHECK(c->y == doctest::Approx(2.5));
  }

  SUBCASE("two equal pixels average") {
    std::vector<double> chan(4 * 4, 0.0);
    chan[0 * 4 + 0] = 0.7;
    chan[3 * 4 + 2] = 0.7;
    const auto c = weighted_centroid(chan, 4, 4);
    REQUIRE(c.has_value());
    CHECK(c->x == doctest::Approx(1.0));
    CHECK(c->y == doctest::Approx(1.5));
  }

  SUBCASE("mass below the floor yields no centroid") {
    std::vector<double> chan(4 * 4, 0.0);
    chan[5] = 0.99;
    CHECK(!weighted_centroid(chan, 4, 4, 1.0).has_value());
    CHECK(weighted_centroid(chan, 4, 4, 0.5).has_value());
  }

  SUBCASE("scale invariance") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> chan(8 * 8);
    for (double &v : chan) v = u(rng);
    std::vector<double> scaled = chan;
    for (double &v : scaled) v *= 7.25;
    const auto a = weighted_centroid(chan, 8, 8);
    const auto b = weighted_centroid(scaled, 8, 8);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(std::abs(a->x - b->x) < 1e-9);
    CHECK(std::abs(a->y - b->y) < 1e-9);
  }

  SUBCASE("translation equivariance") {
    std::vector<double> a(10 * 10, 0.0), b(10 * 10, 0.0);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        const double v = u(rng);
        a[(2 + y) * 10 + 1 + x] = v;
        b[(5 + y) * 10 + 4 + x] = v;
      }
    const auto ca = weighted_centroid(a, 10, 10);
    const auto cb = weighted_centroid(b, 10, 10);
    REQUIRE(ca.has_value());
    REQUIRE(cb.has_value());
    CHECK(cb->x - ca->x == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(cb->y - ca->y == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("float and double overloads agree") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> d(6 * 6);
    std::vector<float> f(6 * 6);
    for (std::size_t i = 0; i < d.size(); ++i) {
      f[i] = float(u(rng));
      d[i] = f[i];
    }
    const auto cd = weighted_centroid(std::span<const double>(d), 6, 6);
    const auto cf = weighted_centroid(std::span<const float>(f), 6, 6);
    REQUIRE(cd.has_value());
    REQUIRE(cf.has_value());
    CHECK(cd->x == doctest::Approx(cf->x).epsilon(1e-6));
    CHECK(cd->y == doctest::Approx(cf->y).epsilon(1e-6));
  }
}

TEST_CASE("distance series and impact estimation") {
  // Three frames: centroids 3-4-5 apart, then 5 apart, then bat missing.
  PlaneStack stack = PlaneStack::zeros(3, 3, 16, 16);
  auto put = [&](int k, int c, int y, int x, float v) { stack.at(k, c, y, x) = v; };
  // Frame 0: ball at (2, 2), bat at (5, 6) -> d = 5.
  put(0, kClassBall, 2, 2, 1.0f);
  put(0, kClassBat, 6, 5, 1.0f);
  // Frame 1: ball at (2, 2), bat at (2, 5) -> d = 3.
  put(1, kClassBall, 2, 2, 1.0f);
  put(1, kClassBat, 2, 5, 1.0f);
  // Frame 2: ball only.
  put(2, kClassBall, 8, 8, 1.0f);

  fix_background(stack);
  ImpactResult res = distance_series(stack, 100);
  REQUIRE(res.frames.size() == 3);
  CHECK(res.frames[0].valid);
  CHECK(*res.frames[0].d_px == doctest::Approx(5.0));
  CHECK(res.frames[0].k == 1);
  CHECK(*res.frames[1].d_px == doctest::Approx(3.0));
  CHECK(!res.frames[2].valid);
  CHECK(!res.frames[2].d_px.has_value());
  CHECK(res.frames[2].ball.has_value());
  CHECK(!res.frames[2].bat.has_value());

  estimate_impact(res);
  CHECK(res.frame_index == 2);
  CHECK(res.t_impact_us == 200);
}

TEST_CASE("invalidated frames are excluded from the argmin") {
  // Two measurable frames; the closer one (d = 3) gets knocked out.
  PlaneStack stack = PlaneStack::zeros(2, 3, 16, 16);
  stack.at(0, kClassBall, 2, 2) = 1.0f;
  stack.at(0, kClassBat, 6, 5) = 1.0f;  // d = 5
  stack.at(1, kClassBall, 2, 2) = 1.0f;
  stack.at(1, kClassBat, 2, 5) = 1.0f;  // d = 3
  fix_background(stack);

  ImpactResult res = distance_series(stack, 100);
  const int bad[] = {1};
  invalidate_frames(res, bad);
  CHECK(!res.frames[1].valid);
  CHECK(!res.frames[1].d_px.has_value());
  estimate_impact(res);
  CHECK(res.frame_index == 1);
  CHECK(res.t_impact_us == 100);

  const int oob[] = {2};
  CHECK_THROWS_AS(invalidate_frames(res, oob), DimensionError);
  const int neg[] = {-1};
  CHECK_THROWS_AS(invalidate_frames(res, neg), DimensionError);
}

TEST_CASE("impact ties resolve to the earliest frame") {
  PlaneStack stack = PlaneStack::zeros(4, 3, 8, 8);
  for (int k = 0; k < 4; ++k) {
    stack.at(k, kClassBall, 1, 1) = 1.0f;
    stack.at(k, kClassBat, 1, k == 0 ? 5 : 4) = 1.0f;  // d = 4,3,3,3
  }
  fix_background(stack);
  ImpactResult res = distance_series(stack, 250);
  estimate_impact(res);
  CHECK(res.frame_index == 2);
  CHECK(res.t_impact_us == 500);
}

TEST_CASE("invalid frames are skipped by the argmin") {
  PlaneStack stack = PlaneStack::zeros(3, 3, 8, 8);
  // Frame 0: closest pair but bat mass below the floor -> invalid.
  stack.at(0, kClassBall, 1, 1) = 1.0f;
  stack.at(0, kClassBat, 1, 2) = 0.5f;
  stack.at(1, kClassBall, 1, 1) = 1.0f;
  stack.at(1, kClassBat, 1, 7) = 1.0f;
  stack.at(2, kClassBall, 1, 1) = 1.0f;
  stack.at(2, kClassBat, 1, 5) = 1.0f;
  fix_background(stack);
  ImpactResult res = distance_series(stack, 100);
  CHECK(!res.frames[0].valid);
  estimate_impact(res);
  CHECK(res.frame_index == 3);
}

TEST_CASE("a clip with no measurable frame throws") {
  PlaneStack stack = PlaneStack::zeros(2, 3, 8, 8);
  stack.at(0, kClassBall, 1, 1) = 1.0f;  // never both centroids
  stack.at(1, kClassBat, 2, 2) = 1.0f;
  fix_background(stack);
  CHECK_THROWS_WITH_AS(distance_series(stack, 100), "distance_series: no measurable frames",
                       DomainError);
}

TEST_CASE("argmin is monotone under distance-preserving relabeling") {
  // Shifting every frame's bat column by the same offset shifts distances
  // uniformly and must not change the argmin frame.
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<int> col(8, 20);
  for (int trial = 0; trial < 10; ++trial) {
    PlaneStack a = PlaneStack::zeros(5, 3, 4, 32);
    PlaneStack b = PlaneStack::zeros(5, 3, 4, 32);
    for (int k = 0; k < 5; ++k) {
      const int c = col(rng);
      a.at(k, kClassBall, 2, 2) = 1.0f;
      a.at(k, kClassBat, 2, c) = 1.0f;
      b.at(k, kClassBall, 2, 2) = 1.0f;
      b.at(k, kClassBat, 2, c + 3) = 1.0f;
    }
    fix_background(a);
    fix_background(b);
    ImpactResult ra = distance_series(a, 100);
    ImpactResult rb = distance_series(b, 100);
    estimate_impact(ra);
    estimate_impact(rb);
    CHECK(ra.frame_index == rb.frame_index);
  }
}

TEST_CASE("imu detection") {
  SUBCASE("first doubling of the squared norm wins") {
    ImuTrace t;
    t.samples = {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {2.1, 0.0, 0.0}, {5.0, 0.0, 0.0}};
    CHECK(imu_detect(t) == 2);
  }

  SUBCASE("gradual rise never triggers") {
    ImuTrace t;
    t.samples = {{1.0, 0.0, 0.0}, {1.2, 0.0, 0.0}, {1.4, 0.0, 0.0}};
    CHECK_THROWS_WITH_AS(imu_detect(t), "no impact detected", DomainError);
  }

  SUBCASE("norm uses all three axes") {
    ImuTrace t;
    t.samples = {{1.0, 1.0, 1.0}, {1.0, 1.0, 2.0}};  // 3 -> 6, not strict
    CHECK_THROWS_AS(imu_detect(t), DomainError);
    t.samples = {{1.0, 1.0, 1.0}, {1.0, 1.0, 2.1}};  // 3 -> 7.41
    CHECK(imu_detect(t) == 1);
  }

  SUBCASE("round trips through csv") {
    const auto path = temp_file("evimpact_imu_test.csv");
    {
      std::ofstream out(path);
      out << "ax,ay,az\n1.0,0.0,0.0\n1.0,0.0,0.0\n2.5,0.5,-0.25\n";
    }
    const ImuTrace t = read_imu_csv(path, 500.0);
    std::filesystem::remove(path);
    CHECK(t.rate_hz == 500.0);
    REQUIRE(t.samples.size() == 3);
    CHECK(t.samples[2][0] == doctest::Approx(2.5));
    CHECK(t.samples[2][2] == doctest::Approx(-0.25));
    CHECK(imu_detect(t) == 2);
  }

  SUBCASE("bad header is rejected") {
    const auto path = temp_file("evimpact_imu_bad.csv");
    {
      std::ofstream out(path);
      out << "x,y,z\n1,2,3\n";
    }
    CHECK_THROWS_AS(read_imu_csv(path), ParseError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("latency statistics") {
  const std::vector<double> lags{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const LatencyStats s = latency_stats(lags);
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.stddev == doctest::Approx(2.0));  // population
  CHECK(s.min == 2.0);
  CHECK(s.max == 9.0);

  const std::vector<double> one{3.5};
  const LatencyStats s1 = latency_stats(one);
  CHECK(s1.mean == 3.5);
  CHECK(s1.stddev == 0.0);
  CHECK(s1.min == 3.5);
  CHECK(s1.max == 3.5);

  CHECK_THROWS_AS(latency_stats(std::span<const double>{}), DomainError);
}
