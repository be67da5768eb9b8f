#include "homog/geometry.hpp"

#include <gtest/gtest.h>

#include <queue>
#include <random>
#include <vector>

using namespace homog;

namespace {

Vec<2> v2(double a, double b) { return Vec<2>(a, b); }

ManifoldModel<2> warped() { return ManifoldModel<2>::warped_sin(0.5); }

/// Dijkstra on an n x n periodic grid with a long-range stencil; edge weights
/// are midpoint-rule metric lengths.
double graph_distance(const ManifoldModel<2>& m, Vec<2> p, Vec<2> q, int n, int reach) {
  std::vector<std::pair<int, int>> stencil;
  for (int a = -reach; a <= reach; ++a)
    for (int b = -reach; b <= reach; ++b)
      if ((a != 0 || b != 0) && std::gcd(std::abs(a), std::abs(b)) == 1) stencil.emplace_back(a, b);
  const auto node = [n](int i, int j) { return ((i % n + n) % n) * n + ((j % n + n) % n); };
  const int si = static_cast<int>(std::lround(p[0] * n)), sj = static_cast<int>(std::lround(p[1] * n));
  const int ti = static_cast<int>(std::lround(q[0] * n)), tj = static_cast<int>(std::lround(q[1] * n));
  std::vector<double> dist(static_cast<std::size_t>(n) * n, 1e300);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[node(si, sj)] = 0.0;
  heap.emplace(0.0, node(si, sj));
  const int target = node(ti, tj);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (u == target) return d;
    const int i = u / n, j = u % n;
    for (auto [a, b] : stencil) {
      const Vec<2> dx(static_cast<double>(a) / n, static_cast<double>(b) / n);
      const Vec<2> mid(i / static_cast<double>(n) + 0.5 * dx[0], j / static_cast<double>(n) + 0.5 * dx[1]);
      const double w = m.norm(mid, dx);
      const int v = node(i + a, j + b);
      if (d + w < dist[v]) {
        dist[v] = d + w;
        heap.emplace(d + w, v);
      }
    }
  }
  return dist[target];
}

}  // namespace

TEST(Geometry, FlatExpIsTranslationModOne) {
  const auto m = ManifoldModel<2>::flat();
  const Vec<2> q = m.exp_map(v2(0.2, 0.3), v2(0.5, 0.9));
  EXPECT_NEAR(q[0], 0.7, 1e-15);
  EXPECT_NEAR(q[1], 0.2, 1e-15);
}

TEST(Geometry, ExpOfZeroIsIdentity) {
  for (const auto& m : {ManifoldModel<2>::flat(), warped(), ManifoldModel<2>::skew_frame(0.3)}) {
    const Vec<2> q = m.exp_map(v2(0.4, 0.7), Vec<2>::Zero());
    EXPECT_NEAR((q - v2(0.4, 0.7)).norm(), 0.0, 1e-15);
  }
}

TEST(Geometry, WarpedExpMatchesFineRk4Oracle) {
  const auto m = warped();
  const Vec<2> p(0.0, 0.0), v(0.1, 0.1);
  const Vec<2> q = m.exp_map(p, v);
  const Vec<2> oracle = wrap01(m.integrate(p, v, 10 * m.production_steps(p, v)).position);
  EXPECT_LT((q - oracle).norm(), 1e-8);
  // The geodesic genuinely bends.
  EXPECT_GT((q - v).norm(), 1e-4);
}

TEST(Geometry, RadiusExceededBeyondFloor) {
  const auto m = warped();
  try {
    m.exp_map(v2(0.1, 0.1), v2(0.4, 0.0));
    FAIL() << "expected RadiusExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RadiusExceeded);
  }
}

TEST(Geometry, GeodesicEnergyIsConserved) {
  const auto m = warped();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-0.15, 0.15);
  for (int s = 0; s < 20; ++s) {
    const Vec<2> p(u(rng), u(rng)), v(w(rng), w(rng));
    const auto end = m.shoot(p, v);
    const double e0 = m.norm(p, v), e1 = m.norm(end.position, end.velocity);
    EXPECT_NEAR(e1 / e0, 1.0, 1e-8);
  }
}

TEST(Geometry, FlatLogIsNearestRepresentative) {
  const auto m = ManifoldModel<2>::flat();
  const Vec<2> v = m.log_map(v2(0.2, 0.3), v2(0.7, 0.2));
  EXPECT_NEAR(v[0], 0.5, 1e-15);
  EXPECT_NEAR(v[1], -0.1, 1e-15);
  EXPECT_EQ(m.log_map(v2(0.3, 0.3), v2(0.3, 0.3)), Vec<2>::Zero());
  EXPECT_NEAR(m.distance(v2(0, 0), v2(0.5, 0)), 0.5, 1e-15);
  EXPECT_EQ(m.distance(v2(0.1, 0.9), v2(0.1, 0.9)), 0.0);
}

TEST(Geometry, WarpedRoundTrip) {
  const auto m = warped();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-0.13, 0.13);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Vec<2> p(u(rng), u(rng));
    const Vec<2> q = wrap01(Vec<2>(p + v2(w(rng), w(rng))));
    ASSERT_LT(m.distance(p, q), 0.2);
    const Vec<2> back = m.exp_map(p, m.log_map(p, q));
    worst = std::max(worst, nearest_rep<2>(back - q).norm());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Geometry, NetScaleRoundTripThousandPairs) {
  const auto m = warped();
  const double radius = 3.0 * std::pow(0.01, 0.6);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0), ang(0.0, kTwoPi), r(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const Vec<2> p(u(rng), u(rng));
    const double t = ang(rng);
    Vec<2> dir(std::cos(t), std::sin(t));
    dir *= radius * 0.95 * r(rng) / m.norm(p, dir);
    const Vec<2> q = m.exp_map(p, dir);
    worst = std::max(worst, nearest_rep<2>(m.exp_map(p, m.log_map(p, q)) - q).norm());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Geometry, DistanceSymmetricAndTriangle) {
  const auto m = warped();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-0.05, 0.05);
  for (int s = 0; s < 30; ++s) {
    const Vec<2> a(u(rng), u(rng));
    const Vec<2> b = wrap01(Vec<2>(a + v2(w(rng), w(rng))));
    const Vec<2> c = wrap01(Vec<2>(a + v2(w(rng), w(rng))));
    const double ab = m.distance(a, b), ba = m.distance(b, a);
    EXPECT_NEAR(ab, ba, 1e-8);
    EXPECT_LE(m.distance(a, c), ab + m.distance(b, c) + 1e-8);
  }
}

TEST(Geometry, WarpedDistanceMatchesGraphShortestPath) {
  const auto m = warped();
  EXPECT_NEAR(m.distance(v2(0, 0), v2(0.3, 0)), graph_distance(m, v2(0, 0), v2(0.3, 0), 400, 5), 1e-3);
  const Vec<2> p(0.1, 0.2), q(0.25, 0.3);
  EXPECT_NEAR(m.distance(p, q), graph_distance(m, p, q, 400, 5), 1e-3);
}

TEST(Geometry, DownFrameTrivialCases) {
  const auto flat = ManifoldModel<2>::flat();
  EXPECT_EQ(flat.down_frame(v2(0.1, 0.2), v2(0.3, 0.25)), Mat<2>::Identity());
  const auto m = warped();
  const Vec<2> pj(0.3, 0.6);
  EXPECT_LT((m.down_frame(pj, pj) - m.frame(pj)).norm(), 1e-9);
}

TEST(Geometry, DownFrameIsFirstOrderAccurate) {
  const auto m = warped();
  const std::vector<double> d{0.02, 0.04, 0.08};
  for (const Vec<2>& pj : {v2(0.1, 0.3), v2(0.6, 0.55), v2(0.9, 0.1)}) {
    std::vector<double> err;
    for (double r : d) err.push_back(down_frame_deviation(m, pj, r));
    const double slope = loglog_slope(d, err);
    EXPECT_GE(slope, 0.9);
    EXPECT_LE(slope, 1.1);
  }
}

TEST(Geometry, FrameRoundTripAndPeriodicity) {
  const auto m = ManifoldModel<2>::skew_frame(0.4);
  const Vec<2> x(0.3, 0.8), v(0.2, -0.7);
  EXPECT_LT((m.from_frame(x, m.to_frame(x, v)) - v).norm(), 1e-12);
  const auto w = warped();
  EXPECT_LT((w.metric(x) - w.metric(x + v2(1.0, -2.0))).norm(), 1e-12);
  EXPECT_LT((w.frame(x) - w.frame(x + v2(3.0, 1.0))).norm(), 1e-12);
  EXPECT_GT(w.min_frame_determinant(), 0.0);
}

TEST(Geometry, FrameGramIsIdentityForOrthonormalFrames) {
  const auto m = warped();
  EXPECT_LT((m.frame_gram(v2(0.37, 0.1)) - Mat<2>::Identity()).norm(), 1e-14);
}

TEST(Geometry, VolumeOfWarpedTorus) {
  // sqrt(1 + a sin) integrated over a period; compare with a fine midpoint sum.
  const auto m = warped();
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += std::sqrt(1.0 + 0.5 * std::sin(kTwoPi * (i + 0.5) / n));
  EXPECT_NEAR(m.volume(), s / n, 1e-12);
  EXPECT_NEAR(ManifoldModel<2>::flat().volume(), 1.0, 1e-15);
}

TEST(Geometry, ExpressionModelMatchesPreset) {
  const auto e = ManifoldModel<2>::from_expressions({"1", "0", "1+0.5*sin(2*pi*x1)"}, {}, MetricKind::Warped, 0.25);
  const auto p = warped();
  const Vec<2> x(0.2, 0.1), v(0.08, -0.05);
  EXPECT_LT((e.exp_map(x, v) - p.exp_map(x, v)).norm(), 1e-12);
  EXPECT_LT((e.frame(x) - p.frame(x)).norm(), 1e-12);
}

TEST(Geometry, PresetParsing) {
  EXPECT_EQ(ManifoldModel<2>::from_preset("warped-sin(0.3)").kind(), MetricKind::Warped);
  EXPECT_EQ(ManifoldModel<2>::from_preset("skew-frame(0.5)").frame(v2(0, 0))(0, 1), 0.5);
  EXPECT_THROW(ManifoldModel<2>::from_preset("sphere"), Error);
  EXPECT_THROW(ManifoldModel<2>::from_expressions({"1", "0", "x1"}, {}, MetricKind::General, 0.2), Error);
}

TEST(Geometry, ThreeDimensionalWarpedRoundTrip) {
  const auto m = ManifoldModel<3>::warped_sin(0.4);
  const Vec<3> p(0.2, 0.5, 0.9), v(0.05, -0.04, 0.03);
  const Vec<3> q = m.exp_map(p, v);
  EXPECT_LT((m.log_map(p, q) - v).norm(), 1e-9);
}

TEST(Geometry, MeasuredChartConstantIsFinite) {
  const double c = euclidean_chart_constant(warped(), 0.1, 20, 1);
  EXPECT_GT(c, 0.0);
  EXPECT_LT(c, 50.0);
  EXPECT_EQ(euclidean_chart_constant(ManifoldModel<2>::flat(), 0.1, 5, 1), 0.0);
}

TEST(Geometry, FiniteDifferenceChristoffelsMatchClosedForm) {
  const auto preset = warped();
  ASSERT_TRUE(preset.has_metric_derivative());
  const auto fd = ManifoldModel<2>::from_expressions({"1", "0", "1+0.5*sin(2*pi*x1)"}, {}, MetricKind::Warped, 0.3);
  ASSERT_FALSE(fd.has_metric_derivative());
  for (double x : {0.0, 0.13, 0.5, 0.77}) {
    const Vec<2> p(x, 0.4);
    const auto a = preset.christoffel(p), b = fd.christoffel(p);
    for (int k = 0; k < 2; ++k) EXPECT_LT((a[k] - b[k]).norm(), 1e-10);
  }
  // Closed form: Gamma^1_22 = -a pi cos(2 pi x1), Gamma^2_12 = a pi cos / (1 + a sin).
  const Vec<2> p(0.1, 0.0);
  const auto g = preset.christoffel(p);
  const double c = std::cos(kTwoPi * 0.1), s = std::sin(kTwoPi * 0.1);
  EXPECT_NEAR(g[0](1, 1), -0.5 * kPi * c, 1e-14);
  EXPECT_NEAR(g[1](0, 1), 0.5 * kPi * c / (1.0 + 0.5 * s), 1e-14);
}
