#include "homog/oscillate.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homog;

namespace {

LadderConfig coarse_ladder(bool aligned = false) {
  LadderConfig c;
  c.epsilons = {0.025, 0.02};
  c.lattice_aligned = aligned;
  return c;
}

/// One warped scale, built once: eps = 0.02 keeps eps^beta below a third of
/// the injectivity floor, and curved nets are the expensive part.
const Ladder<2>& warped_ladder() {
  static const Ladder<2> ladder = [] {
    LadderConfig c;
    c.epsilons = {0.02};
    return Ladder<2>(ManifoldModel<2>::from_preset("warped"), c);
  }();
  return ladder;
}

std::vector<Vec<2>> sample_points(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec<2>> out;
  for (int i = 0; i < count; ++i) out.emplace_back(u(rng), u(rng));
  return out;
}

}  // namespace

TEST(Oscillator, OneStaysOne) {
  const Ladder<2> flat(ManifoldModel<2>::flat(), coarse_ladder());
  const auto one = FiberField<2>::constant(1.0);
  for (const Ladder<2>* ladder : {&flat, &warped_ladder()})
    for (std::size_t i = 0; i < ladder->size(); ++i)
      for (const auto& q : sample_points(500, 3)) EXPECT_NEAR((*ladder)[i].value(one, q), 1.0, 1e-12);
}

TEST(Oscillator, BaseOnlyFieldTracksItsValue) {
  // f[p, v] = h(p) with Lip(h) = 2 pi: f^eps stays within eps^beta Lip(h) of h
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const FiberField<2> h = FiberField<2>::from_expression("sin(2*pi*x1)");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double bound = std::pow(ladder[i].epsilon(), ladder.config().beta) * kTwoPi;
    double worst = 0.0;
    for (const auto& q : sample_points(2000, 5))
      worst = std::max(worst, std::abs(ladder[i].value(h, q) - std::sin(kTwoPi * q[0])));
    EXPECT_LT(worst, bound);
  }
}

TEST(Oscillator, VisitAgreesWithTerms) {
  const auto f = fiber_preset<2>("h-sin-v1");
  const auto& osc = warped_ladder()[0];
  for (const auto& q : sample_points(300, 7)) {
    double by_terms = 0.0, mass = 0.0;
    for (const auto& t : osc.terms(q)) {
      by_terms += t.psi * f(t.site_point, t.fiber);
      mass += t.psi;
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_NEAR(osc.value(f, q), by_terms, 1e-13);
  }
}

TEST(Oscillator, AlignedNetIsClassicalInsideCores) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder(true));
  const auto f = FiberField<2>::from_expression("sin(2*pi*v1)*cos(2*pi*v2) + 0.3*cos(2*pi*(v1 - 2*v2))");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    int interior = 0;
    for (const auto& q : sample_points(3000, 11)) {
      const auto t = osc.terms(q);
      if (t.size() != 1) continue;  // only the cores D_j^- where psi_j = 1
      ++interior;
      const Vec<2> v = wrap01(Vec<2>(q / eps));
      EXPECT_NEAR(osc.value(f, q), f(q, v), 1e-9);
    }
    EXPECT_GT(interior, 100);
  }
}

TEST(Oscillator, ConstantTensorInBothModes) {
  Mat<2> a;
  a << 2.0, 0.3, 0.3, 1.5;
  const auto field = TensorField<2>::constant(a);
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  for (const auto& q : sample_points(200, 13))
    for (TensorMode mode : {TensorMode::Coordinates, TensorMode::Pullback})
      EXPECT_LT((ladder[0].tensor_value(field, q, mode, false) - a).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Oscillator, SymmetrizedTensorIsSelfAdjoint) {
  const auto& ladder = warped_ladder();
  const auto& model = ladder.model();
  Mat<2> a;
  a << 2.0, 0.5, -0.3, 1.0;
  const auto field = TensorField<2>::constant(a);
  for (const auto& q : sample_points(200, 17))
    for (TensorMode mode : {TensorMode::Coordinates, TensorMode::Pullback}) {
      const Mat<2> s = ladder[0].tensor_value(field, q, mode, true);
      const Mat<2> ad = TensorField<2>::adjoint(s, model.frame_gram(wrap01(q)));
      EXPECT_LT((s - ad).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Oscillator, ScaleGuardRejectsCoarseEpsilon) {
  LadderConfig c;
  c.epsilons = {0.2};
  try {
    const Ladder<2> ladder(ManifoldModel<2>::flat(), c);
    FAIL() << "expected a scale-order error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ScaleOrderViolated);
  }
}

TEST(Diagnostics, UnitPairingIsTheVolume) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const auto q = two_scale_pairing(ladder[0], [](const Vec<2>&) { return 1.0; }, FiberField<2>::constant(1.0), 256);
  EXPECT_NEAR(q.value, 1.0, 1e-12);
}

TEST(Diagnostics, AlgebraWithOneIsExact) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const auto r = algebra_check(ladder, fiber_preset<2>("sin-v1"), FiberField<2>::constant(1.0));
  for (const auto& row : r.rows) EXPECT_LT(row.error, 1e-13);
}

TEST(Diagnostics, ConstantAdmissibility) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const auto r = admissibility_check(ladder, FiberField<2>::constant(1.5));
  for (const auto& row : r.rows) EXPECT_LT(row.relative_error, 1e-12);
}

TEST(Diagnostics, CompensatedWithOneIsRiemannLebesgue) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const auto f = fiber_preset<2>("2+cos-v1");
  const BaseFunction<2> one{"1", [](const Vec<2>&) { return 1.0; }, [](const Vec<2>&) { return Vec<2>::Zero(); }};
  const auto c = compensated_pairing(ladder, f, FiberField<2>::constant(1.0), one);
  const auto rl = riemann_lebesgue_check(ladder, f);
  ASSERT_EQ(c.rows.size(), rl.rows.size());
  for (std::size_t i = 0; i < c.rows.size(); ++i) EXPECT_NEAR(c.rows[i].measured, rl.rows[i].measured, 1e-12);
  EXPECT_NEAR(rl.rows.front().target, 2.0, 1e-12);
}

TEST(Diagnostics, ConstantVerticalFieldByPartsIsSmall) {
  const Ladder<2> ladder(ManifoldModel<2>::flat(), coarse_ladder());
  const auto cases = by_parts_presets();
  const auto r = by_parts_residual(ladder, cases[0].u, cases[0].x, cases[0].name);
  // X = Y^up has no fiber divergence; what remains is the smoothing of Y by psi
  for (const auto& row : r.rows) EXPECT_LT(row.error, 0.05);
}
