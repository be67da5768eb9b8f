#include "homog/nets.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homog;

namespace {

Net<2> hand_net(std::vector<Vec<2>> pts, double separation) {
  Net<2> n;
  n.points = std::move(pts);
  n.separation = separation;
  return n;
}

const ManifoldModel<2>& flat() {
  static const auto m = ManifoldModel<2>::flat();
  return m;
}

}  // namespace

TEST(Nets, SeparationAndCoveringHoldExactly) {
  for (double s : {0.3, 0.2, 0.1}) {
    const auto net = build_net(flat(), s, 42);
    EXPECT_GE(min_pairwise_distance(flat(), net), s * (1.0 - 1e-12));
    const VoronoiDecomposition<2> dec(flat(), net);
    ASSERT_TRUE(dec.covering_is_exact());
    EXPECT_LE(dec.covering_radius(), s * (1.0 + 1e-12));
  }
}

TEST(Nets, RandomOrderNetsAreMaximalToo) {
  NetOptions o;
  o.order = InsertionOrder::Random;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto net = build_net(flat(), 0.1, seed, o);
    EXPECT_GE(min_pairwise_distance(flat(), net), 0.1 * (1.0 - 1e-12));
    EXPECT_LE(VoronoiDecomposition<2>(flat(), net).covering_radius(), 0.1 * (1.0 + 1e-12));
  }
}

TEST(Nets, HalvingSeparationQuadruplesSize) {
  const double ratio = static_cast<double>(build_net(flat(), 0.05, 3).size()) / build_net(flat(), 0.1, 3).size();
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 8.0);
}

TEST(Nets, SizeWithinPackingAndCoveringBounds) {
  // Disjoint disks of radius s/2 (hexagonal density at most pi/sqrt(12)) and
  // covering disks of radius s bound J from both sides.
  const double s = 0.25;
  NetOptions random;
  random.order = InsertionOrder::Random;
  for (const auto& net : {build_net(flat(), s, 1), build_net(flat(), s, 1, random)}) {
    const double upper = (kPi / std::sqrt(12.0)) / (kPi * s * s / 4.0);
    const double lower = 1.0 / (kPi * s * s);
    EXPECT_GE(static_cast<double>(net.size()), std::ceil(lower));
    EXPECT_LE(static_cast<double>(net.size()), std::floor(upper));
  }
  // Farthest-point insertion fills the torus with the square lattice of spacing s.
  EXPECT_EQ(build_net(flat(), s, 1).size(), 16u);
}

TEST(Nets, DeterministicGivenSeed) {
  NetOptions o;
  o.order = InsertionOrder::Random;
  const auto a = build_net(flat(), 0.1, 9, o), b = build_net(flat(), 0.1, 9, o), c = build_net(flat(), 0.1, 10, o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
  bool differs = a.size() != c.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = a.points[i] != c.points[i];
  EXPECT_TRUE(differs);
}

TEST(Nets, SeparationTooLargeOnCurvedModel) {
  const auto m = ManifoldModel<2>::warped_sin(0.5);
  try {
    build_net(m, 0.2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SeparationTooLarge);
  }
  EXPECT_THROW(build_net(flat(), 0.5, 1), Error);
}

TEST(Nets, AssignmentRules) {
  const auto net = hand_net({Vec<2>(0, 0), Vec<2>(0.5, 0)}, 0.5);
  const VoronoiDecomposition<2> dec(flat(), net, 32);
  EXPECT_EQ(voronoi_assign(dec, Vec<2>(0.5, 0)), 1);
  EXPECT_EQ(voronoi_assign(dec, Vec<2>(0.2, 0)), 0);
  EXPECT_EQ(voronoi_assign(dec, Vec<2>(0.25, 0)), 0);
  EXPECT_EQ(voronoi_assign(dec, Vec<2>(0.75, 0.3)), 0);
  const auto big = build_net(flat(), 0.1, 5);
  const VoronoiDecomposition<2> d2(flat(), big);
  for (std::size_t j = 0; j < big.size(); j += 7) EXPECT_EQ(voronoi_assign(d2, big.points[j]), static_cast<int>(j));
}

TEST(Nets, TwoPointAdjacency) {
  const auto net = hand_net({Vec<2>(0.1, 0.3), Vec<2>(0.6, 0.3)}, 0.5);
  const VoronoiDecomposition<2> dec(flat(), net, 32);
  const auto pairs = dec.adjacency_pairs();
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], std::make_pair(0, 1));
}

TEST(Nets, AdjacentDistancesWithinBounds) {
  NetOptions random;
  random.order = InsertionOrder::Random;
  std::vector<std::size_t> degrees;
  for (double s : {0.2, 0.1, 0.05}) {
    for (const auto& net : {build_net(flat(), s, 2), build_net(flat(), s, 2, random)}) {
      const VoronoiDecomposition<2> dec(flat(), net);
      ASSERT_FALSE(dec.adjacency_pairs().empty());
      for (auto [i, j] : dec.adjacency_pairs()) {
        const double d = dec.locator().distance(i, net.points[static_cast<std::size_t>(j)]);
        EXPECT_GE(d, s * (1.0 - 1e-12));
        EXPECT_LE(d, 2.0 * s * (1.0 + 1e-2));
      }
      std::size_t deg = 0;
      for (const auto& nb : dec.neighbors()) deg = std::max(deg, nb.size());
      degrees.push_back(deg);
    }
  }
  // Angles of at least pi/6 between neighbours cap the degree at 12.
  for (auto d : degrees) EXPECT_LE(d, 12u);
}

TEST(Nets, InteriorBallCarriesOwnLabel) {
  const double s = 0.1;
  NetOptions random;
  random.order = InsertionOrder::Random;
  const auto net = build_net(flat(), s, 4, random);
  const VoronoiDecomposition<2> dec(flat(), net);
  const int n = dec.grid_n();
  for (std::size_t c = 0; c < dec.labels().size(); ++c) {
    const Vec<2> q = GridIndex<2>::midpoint(c, n);
    for (std::size_t j = 0; j < net.size(); ++j)
      if (dec.locator().distance(static_cast<int>(j), q) < s / 2) {
        EXPECT_EQ(dec.labels()[c], static_cast<int>(j));
      }
  }
}

TEST(Nets, OverlapConstant) {
  const auto single = hand_net({Vec<2>(0.3, 0.3)}, 0.1);
  EXPECT_EQ(overlap_constant(VoronoiDecomposition<2>(flat(), single)), 1);
  // Planar disk-packing oracle: at most 7 points of an s-separated set fit in
  // a closed disk of radius s.
  NetOptions random;
  random.order = InsertionOrder::Random;
  for (double s : {0.2, 0.1, 0.05}) {
    EXPECT_LE(overlap_constant(VoronoiDecomposition<2>(flat(), build_net(flat(), s, 1))), 7);
    EXPECT_LE(overlap_constant(VoronoiDecomposition<2>(flat(), build_net(flat(), s, 1, random))), 7);
  }
}

TEST(Nets, MinAdjacentAngle) {
  const auto two = hand_net({Vec<2>(0.1, 0.3), Vec<2>(0.6, 0.3)}, 0.5);
  EXPECT_DOUBLE_EQ(min_adjacent_angle(VoronoiDecomposition<2>(flat(), two, 32)), kPi);
  // Circumradius <= covering <= s and edges >= s give angles >= pi/6.
  NetOptions random;
  random.order = InsertionOrder::Random;
  for (double s : {0.2, 0.1, 0.05}) {
    const auto net = build_net(flat(), s, 6, random);
    EXPECT_GE(min_adjacent_angle(VoronoiDecomposition<2>(flat(), net)), kPi / 6.0 - 1e-9);
  }
}

TEST(Nets, BoundaryTubeOfStraightBoundary) {
  const auto net = hand_net({Vec<2>(0.0, 0.0), Vec<2>(0.5, 0.0)}, 0.5);
  const VoronoiDecomposition<2> dec(flat(), net, 32);
  const double delta = 0.02;
  // D_0 is the strip |x1| <= 1/4 with two boundary lines of length 1.
  const double v1 = boundary_tube_volume(dec, 0, delta);
  EXPECT_NEAR(v1, 2.0 * 2.0 * delta, 0.02 * 4.0 * delta);
  const double v2 = boundary_tube_volume(dec, 0, 2.0 * delta);
  EXPECT_GE(v2 / v1, 1.8);
  EXPECT_LE(v2 / v1, 2.2);
}

TEST(Nets, BoundaryTubeScalesWithCellPerimeter) {
  NetOptions random;
  random.order = InsertionOrder::Random;
  std::vector<double> slope;
  for (double s : {0.2, 0.1}) {
    const auto net = build_net(flat(), s, 8, random);
    const VoronoiDecomposition<2> dec(flat(), net);
    const double delta = s / 16.0;
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double v1 = boundary_tube_volume(dec, i, delta), v2 = boundary_tube_volume(dec, i, 2 * delta);
      EXPECT_GE(v2 / v1, 1.8);
      EXPECT_LE(v2 / v1, 2.2);
      worst = std::max(worst, v1 / delta);
    }
    slope.push_back(worst / s);  // (tube / delta) <= C * s^{n-1}
  }
  EXPECT_LT(slope[1] / slope[0], 2.0);
  EXPECT_GT(slope[1] / slope[0], 0.5);
  for (double c : slope) EXPECT_LT(c, 20.0);
}

TEST(Nets, WarpedNetInvariantsAndAngleStability) {
  const auto m = ManifoldModel<2>::warped_sin(0.5);
  std::vector<double> angles;
  for (double s : {0.1, 0.05}) {
    const auto net = build_net(m, s, 3);
    EXPECT_GE(min_pairwise_distance(m, net), s * (1.0 - 1e-9));
    const VoronoiDecomposition<2> dec(m, net);
    EXPECT_TRUE(dec.covering_is_exact());
    EXPECT_LE(dec.covering_radius(), s * (1.0 + 1e-9));
    EXPECT_LE(dec.grid_covering_radius(), s);
    for (auto [i, j] : dec.adjacency_pairs()) {
      const double d = dec.locator().distance(i, net.points[static_cast<std::size_t>(j)]);
      EXPECT_GE(d, s * (1.0 - 1e-9));
      EXPECT_LE(d, 2.0 * s * (1.0 + 1e-2));
    }
    angles.push_back(min_adjacent_angle(dec));
  }
  EXPECT_NEAR(angles[1] / angles[0], 1.0, 0.1);
}

TEST(Nets, ThreeDimensionalNet) {
  const auto m3 = ManifoldModel<3>::flat();
  const auto net = build_net(m3, 0.2, 1);
  EXPECT_GE(min_pairwise_distance(m3, net), 0.2 * (1.0 - 1e-12));
  const VoronoiDecomposition<3> dec(m3, net);
  EXPECT_LE(dec.grid_covering_radius(), 0.2);
  EXPECT_TRUE(dec.covering_is_exact());
  EXPECT_LE(dec.covering_radius(), 0.2 * (1.0 + 1e-12));
  EXPECT_LE(overlap_constant(dec), 20);
}

TEST(Nets, LatticeAlignedNetPointsLieOnTheLattice) {
  NetOptions o;
  o.lattice_aligned = true;
  o.epsilon = 0.01;
  const auto net = build_net(flat(), 0.1, 1, o);
  for (const auto& p : net.points)
    for (int d = 0; d < 2; ++d) EXPECT_NEAR(p[d] / 0.01, std::round(p[d] / 0.01), 1e-9);
  EXPECT_GE(min_pairwise_distance(flat(), net), 0.1 * (1.0 - 1e-12));
  EXPECT_LE(VoronoiDecomposition<2>(flat(), net).covering_radius(), 0.1 + 0.01 * std::sqrt(2.0) / 2);
  o.epsilon = 0.03;
  EXPECT_THROW(build_net(flat(), 0.1, 1, o), Error);
}
