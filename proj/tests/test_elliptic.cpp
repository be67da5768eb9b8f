#include "homog/elliptic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homog;

namespace {

const auto kFlat = ManifoldModel<2>::flat();

ChartCoefficient identity_coefficient(const ManifoldModel<2>& model) {
  return [model](const Vec<2>& x) { return chart_coefficient(model, Mat<2>::Identity(), x); };
}

double manufactured_error(int n) {
  const Mesh mesh(kFlat, DomainSpec{}, n);
  const DirichletProblem problem(kFlat, mesh, identity_coefficient(kFlat));
  const auto sol = problem.solve(load_preset("manufactured"));
  std::vector<double> exact(mesh.node_count());
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const Vec<2> x = mesh.node(k);
    exact[k] = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
  }
  return l2_norm(kFlat, mesh, difference(sol.u, exact));
}

}  // namespace

TEST(Mesh, SquareAndPunctureBookkeeping) {
  const Mesh sq(kFlat, DomainSpec{}, 8);
  EXPECT_EQ(sq.node_count(), 81u);
  EXPECT_EQ(sq.unknowns(), 49u);
  EXPECT_EQ(sq.element_count(), 128u);
  const Mesh torus(kFlat, DomainSpec::from_preset("torus-minus-disk"), 16);
  EXPECT_EQ(torus.node_count(), 256u);
  EXPECT_LT(torus.unknowns(), 256u);
  EXPECT_GT(torus.unknowns(), 200u);
  EXPECT_EQ(torus.index(16, -1), torus.index(0, 15));
  DomainSpec whole = DomainSpec::from_preset("torus-minus-disk");
  whole.radius = 0.6;  // beyond the injectivity floor
  EXPECT_THROW(Mesh(kFlat, whole, 8), Error);
  EXPECT_THROW(DomainSpec::from_preset("annulus"), Error);
}

TEST(Assembly, LaplacianStencilAndSymmetry) {
  const Mesh mesh(kFlat, DomainSpec::from_preset("torus-minus-disk"), 16);
  const auto k = assemble_stiffness(mesh, element_coefficients(kFlat, mesh, identity_coefficient(kFlat)));
  EXPECT_LT((k - SparseMatrix(k.transpose())).cwiseAbs().sum(), 1e-12);
  // rows of nodes away from the disk reproduce the 5-point Laplacian
  const std::size_t far = mesh.index(0, 0);
  const int r = mesh.free_index(far);
  ASSERT_GE(r, 0);
  double sum = 0.0;
  int nnz = 0;
  for (SparseMatrix::InnerIterator it(k, r); it; ++it) {
    sum += it.value();
    if (std::abs(it.value()) > 1e-14) ++nnz;
  }
  EXPECT_NEAR(k.coeff(r, r), 4.0, 1e-12);
  EXPECT_NEAR(sum, 0.0, 1e-12);
  EXPECT_EQ(nnz, 5);
}

TEST(Solver, ManufacturedSolutionConvergesAtSecondOrder) {
  const double e16 = manufactured_error(16), e32 = manufactured_error(32), e64 = manufactured_error(64);
  EXPECT_GT(e16 / e32, 3.5);
  EXPECT_LT(e16 / e32, 4.5);
  EXPECT_GT(e32 / e64, 3.5);
  EXPECT_LT(e32 / e64, 4.5);
}

TEST(Solver, MultigridIterationsStayBounded) {
  std::vector<int> its;
  for (int n : {64, 128, 256, 512}) {
    const Mesh mesh(kFlat, DomainSpec{}, n);
    const DirichletProblem problem(kFlat, mesh, identity_coefficient(kFlat));
    const auto sol = problem.solve(load_preset("one"));
    EXPECT_LT(sol.relative_residual, 1e-10);
    its.push_back(sol.iterations);
  }
  // mesh-independent up to slow growth from the Galerkin coarse operators
  EXPECT_LE(its.back(), 2 * its.front()) << its.front() << " -> " << its.back();
  EXPECT_LT(its.back(), 20);
}

TEST(Solver, GalerkinOrthogonalityAndSymmetry) {
  const Mesh mesh(kFlat, DomainSpec::from_preset("torus-minus-disk"), 32);
  auto coeff = [](const Vec<2>& x) {
    Mat<2> a;
    a << 2.0 + std::sin(kTwoPi * x[0]), 0.3, 0.3, 1.5 + std::cos(kTwoPi * x[1]);
    return a;
  };
  const DirichletProblem problem(kFlat, mesh, coeff);
  const auto f = load_preset("sin(2*pi*x1)+0.5");
  const auto b = assemble_load(kFlat, mesh, f);
  const auto sol = problem.solve_load(b);
  const Eigen::VectorXd x = free_values(mesh, sol.u);
  EXPECT_LT((problem.stiffness() * x - b).norm() / b.norm(), 1e-10);
  // symmetry of the discrete Green operator: <K^{-1} b1, b2> = <b1, K^{-1} b2>
  const auto b2 = assemble_load(kFlat, mesh, load_preset("cos(2*pi*x2)"));
  const Eigen::VectorXd x2 = free_values(mesh, problem.solve_load(b2).u);
  EXPECT_NEAR(x.dot(b2), x2.dot(b), 1e-9 * std::abs(x.dot(b2)));
}

TEST(Solver, MaximumPrincipleForNonnegativeLoad) {
  const Mesh mesh(kFlat, DomainSpec{}, 32);
  const DirichletProblem problem(kFlat, mesh, identity_coefficient(kFlat));
  const auto sol = problem.solve(load_preset("one"));
  for (double v : sol.u) EXPECT_GE(v, -1e-12);
  // torsion function maximum of the unit square
  EXPECT_NEAR(*std::max_element(sol.u.begin(), sol.u.end()), 0.07367, 5e-4);
}

TEST(Solver, WarpedModelEnergyMatchesLoadPairing) {
  const auto warped = ManifoldModel<2>::from_preset("warped");
  const Mesh mesh(warped, DomainSpec::from_preset("torus-minus-disk"), 32);
  const DirichletProblem problem(warped, mesh, identity_coefficient(warped));
  const auto f = load_preset("one");
  const auto sol = problem.solve(f);
  // for the identity coefficient the energy is the H1 seminorm squared
  const double energy = std::pow(h1_seminorm(warped, mesh, sol.u), 2);
  const double work = free_values(mesh, sol.u).dot(assemble_load(warped, mesh, f));
  EXPECT_NEAR(energy, work, 1e-8 * work);
  EXPECT_NEAR(weak_pairing(warped, mesh, sol.u, f), work, 1e-12 * work);
}

TEST(Solver, RejectsBadCoefficients) {
  const Mesh mesh(kFlat, DomainSpec{}, 8);
  auto negative = [](const Vec<2>&) { return Mat<2>(-Mat<2>::Identity()); };
  try {
    DirichletProblem(kFlat, mesh, negative);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotElliptic);
  }
  // a varying skew part makes the weak form nonsymmetric (a constant one drops out)
  auto skew = [](const Vec<2>& x) {
    Mat<2> a;
    const double s = 0.5 * std::sin(kTwoPi * x[0]);
    a << 1.0, s, -s, 1.0;
    return a;
  };
  EXPECT_THROW(DirichletProblem(kFlat, mesh, skew), Error);
}
