#include "homog/homogenize.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homog;

namespace {

const Mat<2> kI = Mat<2>::Identity();

/// 1D laminate corrector by cumulative quadrature: w' = c/a - 1, c the
/// harmonic mean of a, normalized to mean zero.
struct LaminateOracle {
  std::vector<double> w;  // on a uniform grid of `n` points
  double harmonic = 0.0;

  explicit LaminateOracle(int n, int refine = 400) {
    auto a = [](double t) { return 2.0 + std::cos(kTwoPi * t); };
    const int fine = n * refine;
    const double h = 1.0 / fine;
    double inv = 0.0;
    for (int i = 0; i < fine; ++i) inv += h / a((i + 0.5) * h);
    harmonic = 1.0 / inv;
    std::vector<double> cum(static_cast<std::size_t>(fine) + 1, 0.0);
    for (int i = 0; i < fine; ++i) {
      // Simpson on each fine cell
      const double t0 = i * h, t1 = t0 + h;
      auto g = [&](double t) { return harmonic / a(t) - 1.0; };
      cum[static_cast<std::size_t>(i) + 1] = cum[static_cast<std::size_t>(i)] + h / 6.0 * (g(t0) + 4.0 * g(t0 + h / 2) + g(t1));
    }
    for (int j = 0; j < n; ++j) w.push_back(cum[static_cast<std::size_t>(j * refine)]);
    double mean = 0.0;
    for (double v : w) mean += v / n;
    for (double& v : w) v -= mean;
  }
};

}  // namespace

TEST(CellProblem, IdentityHasZeroCorrectors) {
  const auto sol = solve_cell<2>(TensorField<2>::preset("identity"), Vec<2>::Zero(), kI, DirectionKind::Frame);
  for (const auto& w : sol.correctors)
    for (double v : w) EXPECT_LT(std::abs(v), 1e-14);
  const auto h = assemble_homogenized_frame(sol);
  EXPECT_LT((h.endomorphism - kI).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CellProblem, LaminateGoldenValues) {
  const auto sol = solve_cell<2>(TensorField<2>::preset("laminate"), Vec<2>::Zero(), kI, DirectionKind::Frame);
  const auto h = assemble_homogenized_frame(sol);
  EXPECT_NEAR(h.endomorphism(0, 0), std::sqrt(3.0), 1e-6 * std::sqrt(3.0));
  EXPECT_NEAR(h.endomorphism(1, 1), 2.0, 2e-6);
  EXPECT_LT(std::abs(h.endomorphism(0, 1)) + std::abs(h.endomorphism(1, 0)), 1e-12);
  EXPECT_LT(sol.residual, 1e-10);
  // w2 = 0 and w1 matches the 1D quadrature oracle
  const LaminateOracle oracle(sol.grid.m);
  double worst = 0.0;
  for (std::size_t s = 0; s < sol.grid.size(); ++s) {
    EXPECT_LT(std::abs(sol.correctors[1][s]), 1e-13);
    const auto idx = GridIndex<2>::unflatten(s, sol.grid.m);
    worst = std::max(worst, std::abs(sol.correctors[0][s] - oracle.w[static_cast<std::size_t>(idx[0])]));
  }
  EXPECT_LT(worst, 1e-9);
  // harmonic-mean identity and Voigt-Reuss bracketing
  EXPECT_NEAR(h.endomorphism(0, 0) / oracle.harmonic, 1.0, 1e-8);
  EXPECT_LE(oracle.harmonic - 1e-9, h.endomorphism(0, 0));
  EXPECT_LE(h.endomorphism(0, 0), 2.0);
}

TEST(CellProblem, LaminateSwapAndCheckerboardSymmetry) {
  const auto h1 = assemble_homogenized_frame(solve_cell<2>(TensorField<2>::preset("laminate"), Vec<2>::Zero(), kI, DirectionKind::Frame));
  const auto h2 =
      assemble_homogenized_frame(solve_cell<2>(TensorField<2>::preset("laminate-v2"), Vec<2>::Zero(), kI, DirectionKind::Frame));
  EXPECT_NEAR(h1.endomorphism(0, 0), h2.endomorphism(1, 1), 1e-12);
  EXPECT_NEAR(h1.endomorphism(1, 1), h2.endomorphism(0, 0), 1e-12);
  const auto hc =
      assemble_homogenized_frame(solve_cell<2>(TensorField<2>::preset("checkerboard"), Vec<2>::Zero(), kI, DirectionKind::Frame));
  EXPECT_NEAR(hc.endomorphism(0, 0), hc.endomorphism(1, 1), 1e-10);
  EXPECT_LT(std::abs(hc.endomorphism(0, 1)), 1e-10);
  EXPECT_LT(hc.endomorphism(0, 0), 2.0);
  EXPECT_GT(hc.endomorphism(0, 0), 1.0);
}

TEST(CellProblem, ConstantTensorGivesItsSymmetricPart) {
  Mat<2> a;
  a << 2.0, 0.4, 0.4, 1.5;
  const auto h = assemble_homogenized_general(solve_cell<2>(TensorField<2>::constant(a), Vec<2>::Zero(), kI));
  EXPECT_LT((h.endomorphism - a).cwiseAbs().maxCoeff(), 1e-12);
  Mat<2> g;
  g << 2.0, 0.3, 0.3, 1.0;
  const auto hid = assemble_homogenized_general(solve_cell<2>(TensorField<2>::preset("identity"), Vec<2>::Zero(), g));
  EXPECT_LT((hid.bilinear - g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CellProblem, NonOrthonormalGramLaminate) {
  Mat<2> g;
  g << 4.0, 0.0, 0.0, 1.0;
  const auto sol = solve_cell<2>(TensorField<2>::preset("laminate"), Vec<2>::Zero(), g);
  const auto h = assemble_homogenized_general(sol);
  // v1 rescaling leaves the 1D harmonic/arithmetic means unchanged as endomorphism entries
  EXPECT_NEAR(h.endomorphism(0, 0), std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(h.endomorphism(1, 1), 2.0, 1e-9);
  EXPECT_LT(h.asymmetry, 1e-10);
  EXPECT_THROW(solve_cell<2>(TensorField<2>::preset("laminate"), Vec<2>::Zero(), g, DirectionKind::Frame), Error);
}

TEST(CellProblem, FrameAndGeneralAssemblyAgree) {
  for (const std::string preset : {"anisotropic", "checkerboard", "laminate"}) {
    const auto sol = solve_cell<2>(TensorField<2>::preset(preset), Vec<2>::Zero(), kI, DirectionKind::Frame);
    const auto hf = assemble_homogenized_frame(sol);
    const auto hg = assemble_homogenized_general(sol);
    EXPECT_LT((hf.endomorphism - hg.endomorphism).cwiseAbs().maxCoeff(), 1e-10) << preset;
    EXPECT_LT(hf.asymmetry, 1e-10) << preset;
    // the linear flux average equals the quadratic form when the cell equations hold
    EXPECT_LT((average_flux(sol) - hg.endomorphism).cwiseAbs().maxCoeff(), 1e-10) << preset;
    EXPECT_GT(hg.lower, 0.0);
  }
}

TEST(CellProblem, ModeRefinementStability) {
  for (const std::string preset : {"anisotropic", "checkerboard"}) {
    CellOptions o32, o48;
    o32.modes = 32;
    o48.modes = 48;
    const auto a = TensorField<2>::preset(preset);
    const auto h32 = assemble_homogenized_general(solve_cell<2>(a, Vec<2>::Zero(), kI, DirectionKind::GramSchmidt, o32));
    const auto h48 = assemble_homogenized_general(solve_cell<2>(a, Vec<2>::Zero(), kI, DirectionKind::GramSchmidt, o48));
    EXPECT_LT((h32.endomorphism - h48.endomorphism).cwiseAbs().maxCoeff(), 1e-6) << preset;
  }
}

TEST(CellProblem, NonSelfAdjointTensorUsesBiCGStab) {
  TensorField<2> a;
  a.name = "skewed";
  a.value = [](const Vec<2>&, const Vec<2>& v) {
    Mat<2> m;
    m << 1.0, 0.3, -0.3, 1.0;
    return Mat<2>((2.0 + std::cos(kTwoPi * v[0]) * std::sin(kTwoPi * v[1])) * m);
  };
  const auto sol = solve_cell<2>(a, Vec<2>::Zero(), kI);
  EXPECT_FALSE(sol.symmetric);
  EXPECT_LT(sol.residual, 1e-12);
  EXPECT_LT((average_flux(sol) - assemble_homogenized_general(sol).endomorphism).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CellProblem, NotEllipticIsRejected) {
  try {
    solve_cell<2>(TensorField<2>::preset("scalar:cos(2*pi*v1)"), Vec<2>::Zero(), kI);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotElliptic);
  }
}

TEST(Corrector, U1GradientIdentity) {
  Mat<2> g;
  g << 1.5, 0.2, 0.2, 0.8;
  const auto sol = solve_cell<2>(TensorField<2>::preset("anisotropic"), Vec<2>::Zero(), g);
  const Vec<2> grad_u(0.7, -1.3);
  const auto u1 = build_corrector_u1(sol, grad_u);
  const auto direct = vertical_gradient(sol.grid, u1, g);
  const auto closed = corrector_u1_gradient(sol, grad_u);
  for (int d = 0; d < 2; ++d)
    for (std::size_t s = 0; s < u1.size(); ++s) EXPECT_NEAR(direct[d][s], closed[d][s], 1e-10);
  for (double v : build_corrector_u1(sol, Vec<2>::Zero())) EXPECT_EQ(v, 0.0);
}

TEST(Corrector, LaminateU1DependsOnV1Only) {
  const auto sol = solve_cell<2>(TensorField<2>::preset("laminate"), Vec<2>::Zero(), kI, DirectionKind::Frame);
  const auto u1 = build_corrector_u1(sol, Vec<2>(2.0, 5.0));
  for (std::size_t s = 0; s < u1.size(); ++s) EXPECT_NEAR(u1[s], 2.0 * sol.correctors[0][s], 1e-12);
}

TEST(HomogenizedField, ConstantOnlyWhenBaseIndependent) {
  const auto flat = ManifoldModel<2>::flat();
  const HomogenizedField<2> lam(flat, TensorField<2>::preset("laminate"));
  EXPECT_TRUE(lam.constant());
  const HomogenizedField<2> mod(flat, TensorField<2>::preset("modulated-laminate"));
  EXPECT_FALSE(mod.constant());
  const auto at = mod.tensor(Vec<2>(0.25, 0.0)).endomorphism;
  EXPECT_NEAR(at(0, 0), 1.25 * std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(at(1, 1), 2.5, 1e-9);
}
