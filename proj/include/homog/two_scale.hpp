#pragma once

// The decoupled route to the two-scale system: solve the homogenized problem
// for u, lift u1 = <grad u, w> from the cell correctors, then measure how far
// (u, u1) is from solving the coupled weak form
//   int_Omega avg_v <A (grad u + grad_v u1), grad phi + grad_v phi1> = int f phi
// over test pairs (hat, 0) and (hat * fiber mode, ...) .

#include "homog/elliptic.hpp"
#include "homog/homogenize.hpp"

namespace homog {

struct TwoScaleOptions {
  int base_cells = 64;
  CellOptions cell;
  int test_band = 4;  // fiber test modes with |k|_inf <= test_band
  std::string load = "one";
  DomainSpec domain = DomainSpec::from_preset("torus-minus-disk");
  SolveOptions solve;
};

struct TwoScaleReport {
  double base_residual = 0.0;   // worst relative residual over (hat, 0)
  double fiber_residual = 0.0;  // worst relative residual over (0, hat * mode)
  double residual = 0.0;        // the larger of the two
  std::size_t tests = 0;
  int iterations = 0;  // homogenized solve
  double energy = 0.0;
  int base_cells = 0;
  int fiber_modes = 0;
};

namespace detail {

/// What the residual needs from one cell solution: the averaged flux and the
/// pairings avg_v (d e_k)^T A (I + D_v w) for each real fiber test function.
struct CellDigest {
  Mat<2> flux = Mat<2>::Zero();
  Mat<2> a_star = Mat<2>::Zero();
  double upper = 0.0;
  std::vector<Eigen::RowVector2d> mode_pairings;
};

inline std::vector<Vec<2>> fiber_test_modes(int band) {
  std::vector<Vec<2>> modes;
  for (int k1 = 0; k1 <= band; ++k1)
    for (int k2 = -band; k2 <= band; ++k2)
      if (k1 > 0 || k2 > 0) modes.emplace_back(k1, k2);
  return modes;
}

inline CellDigest digest_cell(const CellSolution<2>& sol, const std::vector<Vec<2>>& modes) {
  CellDigest d;
  d.flux = average_flux(sol);
  const auto tensor = assemble_homogenized_general(sol);
  d.a_star = tensor.endomorphism;
  d.upper = tensor.upper;
  std::vector<Mat<2>> m(sol.grid.size());
  for (std::size_t s = 0; s < m.size(); ++s) m[s] = sol.tensor[s] * (Mat<2>::Identity() + sol.corrector_differential(s));
  for (const Vec<2>& k : modes) {
    Eigen::RowVector2d c_cos = Eigen::RowVector2d::Zero(), c_sin = Eigen::RowVector2d::Zero();
    for (std::size_t s = 0; s < m.size(); ++s) {
      const double phase = kTwoPi * k.dot(sol.grid.point(s));
      // d cos = -2 pi k sin, d sin = 2 pi k cos
      c_cos -= kTwoPi * std::sin(phase) * k.transpose() * m[s];
      c_sin += kTwoPi * std::cos(phase) * k.transpose() * m[s];
    }
    d.mode_pairings.push_back(c_cos / static_cast<double>(m.size()));
    d.mode_pairings.push_back(c_sin / static_cast<double>(m.size()));
  }
  return d;
}

}  // namespace detail

/// Residual of the decoupled pair in the coupled two-scale weak form, each
/// test normalized by Lambda * ||(u, u1)||_energy * ||(phi, phi1)||.
inline TwoScaleReport two_scale_residual(const ManifoldModel<2>& model, const TensorField<2>& a, const TwoScaleOptions& options) {
  const Mesh mesh(model, options.domain, options.base_cells);
  const auto modes = detail::fiber_test_modes(options.test_band);
  const HomogenizedField<2> field(model, a, DirectionKind::GramSchmidt, options.cell);

  const std::size_t ne = mesh.element_count();
  std::vector<detail::CellDigest> digests;
  std::vector<std::size_t> digest_of(ne, 0);
  if (field.constant()) {
    digests.push_back(detail::digest_cell(field.constant_cell(), modes));
  } else {
    digests.resize(ne);
    parallel_for(ne, [&](std::size_t e) { digests[e] = detail::digest_cell(field.cell(wrap01(mesh.centroid(e))), modes); });
    for (std::size_t e = 0; e < ne; ++e) digest_of[e] = e;
  }

  // per-element geometry: chart point, frame, sqrt(det g)
  std::vector<Mat<2>> frame(ne), ginv(ne), coeff(ne);
  std::vector<double> density(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const Vec<2> x = wrap01(mesh.centroid(e));
    frame[e] = model.frame(x);
    ginv[e] = model.inverse_metric(x);
    density[e] = model.volume_density(x);
    coeff[e] = frame[e] * digests[digest_of[e]].a_star * frame[e].inverse() * ginv[e] * density[e];
  }
  const DirichletProblem problem(model, mesh, coeff, options.solve);
  const auto f = load_preset(options.load);
  const Eigen::VectorXd load = assemble_load(model, mesh, f);
  const auto sol = problem.solve_load(load);

  // frame components of grad u per element
  std::vector<Vec<2>> xi(ne);
  double energy = 0.0, upper = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto nodes = mesh.element_nodes(e);
    const auto g = mesh.barycentric_gradients(e);
    const Vec<2> du = sol.u[nodes[0]] * g[0] + sol.u[nodes[1]] * g[1] + sol.u[nodes[2]] * g[2];
    xi[e] = frame[e].inverse() * ginv[e] * du;
    const Mat<2> gram = frame[e].transpose() * (ginv[e].inverse()) * frame[e];
    energy += mesh.element_area() * density[e] * xi[e].dot(gram * digests[digest_of[e]].a_star * xi[e]);
    upper = std::max(upper, digests[digest_of[e]].upper);
  }
  const double energy_norm = std::sqrt(energy);

  const std::size_t nu = mesh.unknowns();
  const std::size_t nf = 2 * modes.size();
  Eigen::VectorXd base = -load, hat_energy = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nu));
  Eigen::MatrixXd fiber = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nf));
  Eigen::VectorXd hat_mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nu));
  for (std::size_t e = 0; e < ne; ++e) {
    const auto nodes = mesh.element_nodes(e);
    const auto g = mesh.barycentric_gradients(e);
    const auto& d = digests[digest_of[e]];
    const double w = mesh.element_area() * density[e];
    const Vec<2> flux = frame[e] * d.flux * xi[e];  // chart vector E * avg A (I + D_v w) xi
    for (int k = 0; k < 3; ++k) {
      const int r = mesh.free_index(nodes[static_cast<std::size_t>(k)]);
      if (r < 0) continue;
      const Vec<2>& dl = g[static_cast<std::size_t>(k)];
      base[r] += w * dl.dot(flux);
      hat_energy[r] += w * dl.dot(ginv[e] * dl);
      hat_mass[r] += w / 6.0;
      for (std::size_t t = 0; t < nf; ++t) fiber(r, static_cast<Eigen::Index>(t)) += w / 3.0 * d.mode_pairings[t].dot(xi[e]);
    }
  }

  TwoScaleReport report;
  const double scale = std::max(upper, 1e-300) * std::max(energy_norm, 1e-300);
  for (std::size_t r = 0; r < nu; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    report.base_residual = std::max(report.base_residual, std::abs(base[ri]) / (scale * std::sqrt(hat_energy[ri])));
    for (std::size_t t = 0; t < nf; ++t) {
      // ||hat * e_k||^2 = int hat^2 * avg |d e_k|^2 with |d e_k|^2 averaging 2 pi^2 |k|^2 (flat fiber norm)
      const double kk = modes[t / 2].squaredNorm();
      const double norm = std::sqrt(hat_mass[ri] * 2.0 * kPi * kPi * kk);
      report.fiber_residual = std::max(report.fiber_residual, std::abs(fiber(ri, static_cast<Eigen::Index>(t))) / (scale * norm));
    }
  }
  report.residual = std::max(report.base_residual, report.fiber_residual);
  report.tests = nu * (1 + nf);
  report.iterations = sol.iterations;
  report.energy = energy;
  report.base_cells = options.base_cells;
  report.fiber_modes = options.cell.modes;
  return report;
}

}  // namespace homog
