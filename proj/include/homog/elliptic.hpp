#pragma once

// P1 finite elements for -div(A grad u) = f with zero Dirichlet data on chart
// domains of a two-dimensional model. The weak form is
//   int dphi(C du) sqrt(det g) dx = int f phi sqrt(det g) dx,
// where C = E A E^{-1} g^{-1} carries the frame-component tensor A to chart
// coordinates (C maps differentials to vectors).
//
// The mesh is a structured n x n grid of chart squares, each cut along the
// (0,0)-(1,1) diagonal, so every node couples to seven nodes. Solves use
// conjugate gradients preconditioned by a Galerkin multigrid V-cycle.

#include "homog/geometry.hpp"
#include "homog/krylov.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace homog {

enum class DomainKind { Square, TorusMinusDisk };

struct DomainSpec {
  DomainKind kind = DomainKind::Square;
  double lo = 0.0;  // Square: the chart patch (lo, hi)^2
  double hi = 1.0;
  Vec<2> center = Vec<2>(0.5, 0.5);  // TorusMinusDisk: removed geodesic disk
  double radius = 0.2;

  static DomainSpec from_preset(const std::string& name) {
    DomainSpec d;
    if (name == "square") return d;
    if (name == "torus-minus-disk") {
      d.kind = DomainKind::TorusMinusDisk;
      return d;
    }
    throw Error(ErrorKind::InvalidConfig, "unknown domain preset '" + name + "' (square | torus-minus-disk)");
  }
  std::string name() const { return kind == DomainKind::Square ? "square" : "torus-minus-disk"; }
};

/// Element quadrature for the coefficient: one point at the centroid, or the
/// three edge midpoints (exact for quadratics).
enum class CoefficientQuadrature { Centroid, EdgeMidpoints };

class Mesh {
 public:
  Mesh(const ManifoldModel<2>& model, const DomainSpec& domain, int n) : domain_(domain), n_(n) {
    if (n < 2) throw Error(ErrorKind::InvalidConfig, "meshes need at least 2 cells per side");
    periodic_ = domain.kind == DomainKind::TorusMinusDisk;
    if (periodic_) {
      if (!(domain.radius > 0.0 && domain.radius < model.injectivity_floor()))
        throw Error(ErrorKind::InvalidConfig, "removed disk radius must lie in (0, injectivity floor)");
      x0_ = 0.0;
      length_ = 1.0;
    } else {
      if (!(domain.hi > domain.lo)) throw Error(ErrorKind::InvalidConfig, "empty square patch");
      x0_ = domain.lo;
      length_ = domain.hi - domain.lo;
    }
    const int side = nodes_per_side();
    fixed_.assign(static_cast<std::size_t>(side) * side, 0);
    for (int j = 0; j < side; ++j)
      for (int i = 0; i < side; ++i) {
        bool f;
        if (periodic_) {
          f = in_disk(model, node(i, j));
        } else {
          f = i == 0 || j == 0 || i == n_ || j == n_;
        }
        fixed_[index(i, j)] = f ? 1 : 0;
      }
    free_index_.assign(fixed_.size(), -1);
    for (std::size_t k = 0; k < fixed_.size(); ++k)
      if (!fixed_[k]) {
        free_index_[k] = static_cast<int>(free_nodes_.size());
        free_nodes_.push_back(static_cast<int>(k));
      }
    if (free_nodes_.empty()) throw Error(ErrorKind::InvalidConfig, "domain has no interior nodes");
    if (!connected()) throw Error(ErrorKind::InvalidConfig, "domain interior is not connected");
    if (periodic_ && free_nodes_.size() == fixed_.size())
      throw Error(ErrorKind::InvalidConfig, "removed disk contains no mesh node");
  }

  const DomainSpec& domain() const { return domain_; }
  int cells() const { return n_; }
  bool periodic() const { return periodic_; }
  int nodes_per_side() const { return periodic_ ? n_ : n_ + 1; }
  std::size_t node_count() const { return fixed_.size(); }
  double h() const { return length_ / n_; }
  double origin() const { return x0_; }
  Vec<2> node(int i, int j) const { return Vec<2>(x0_ + i * h(), x0_ + j * h()); }
  Vec<2> node(std::size_t k) const {
    const int side = nodes_per_side();
    return node(static_cast<int>(k % static_cast<std::size_t>(side)), static_cast<int>(k / static_cast<std::size_t>(side)));
  }
  std::size_t index(int i, int j) const {
    const int side = nodes_per_side();
    if (periodic_) {
      i = ((i % side) + side) % side;
      j = ((j % side) + side) % side;
    }
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(side) + static_cast<std::size_t>(i);
  }
  bool fixed(std::size_t k) const { return fixed_[k] != 0; }
  int free_index(std::size_t k) const { return free_index_[k]; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }
  std::size_t unknowns() const { return free_nodes_.size(); }

  /// Elements are numbered 2 * cell + t, t = 0 for the lower triangle
  /// (0,0),(1,0),(1,1) and t = 1 for the upper triangle (0,0),(1,1),(0,1).
  std::size_t element_count() const { return 2 * static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_); }
  std::array<std::size_t, 3> element_nodes(std::size_t e) const {
    const std::size_t cell = e / 2;
    const int i = static_cast<int>(cell % static_cast<std::size_t>(n_)), j = static_cast<int>(cell / static_cast<std::size_t>(n_));
    if (e % 2 == 0) return {index(i, j), index(i + 1, j), index(i + 1, j + 1)};
    return {index(i, j), index(i + 1, j + 1), index(i, j + 1)};
  }
  /// Unwrapped chart positions of the element vertices.
  std::array<Vec<2>, 3> element_vertices(std::size_t e) const {
    const std::size_t cell = e / 2;
    const int i = static_cast<int>(cell % static_cast<std::size_t>(n_)), j = static_cast<int>(cell / static_cast<std::size_t>(n_));
    if (e % 2 == 0) return {node(i, j), node(i + 1, j), node(i + 1, j + 1)};
    return {node(i, j), node(i + 1, j + 1), node(i, j + 1)};
  }
  Vec<2> centroid(std::size_t e) const {
    const auto v = element_vertices(e);
    return (v[0] + v[1] + v[2]) / 3.0;
  }
  /// Chart gradients of the three barycentric functions.
  std::array<Vec<2>, 3> barycentric_gradients(std::size_t e) const {
    const double s = 1.0 / h();
    if (e % 2 == 0) return {Vec<2>(-s, 0.0), Vec<2>(s, -s), Vec<2>(0.0, s)};
    return {Vec<2>(0.0, -s), Vec<2>(s, 0.0), Vec<2>(-s, s)};
  }
  double element_area() const { return 0.5 * h() * h(); }

  /// Node k of this mesh that coincides with node (2i, 2j) of a mesh refined once.
  std::size_t coarse_to_fine(int i, int j, const Mesh& fine) const { return fine.index(2 * i, 2 * j); }

 private:
  bool in_disk(const ManifoldModel<2>& model, const Vec<2>& x) const {
    // exact geodesic distances are only taken near the disk; targets past the
    // injectivity floor are farther than any admissible radius
    if (model.approximate_distance(domain_.center, x) > 2.0 * domain_.radius) return false;
    try {
      return model.distance(domain_.center, x) <= domain_.radius;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::RadiusExceeded) return false;
      throw;
    }
  }

  bool connected() const {
    const int side = nodes_per_side();
    std::vector<char> seen(fixed_.size(), 0);
    std::vector<std::size_t> stack{static_cast<std::size_t>(free_nodes_.front())};
    seen[stack.back()] = 1;
    std::size_t count = 0;
    const int di[6] = {1, -1, 0, 0, 1, -1}, dj[6] = {0, 0, 1, -1, 1, -1};
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      ++count;
      const int i = static_cast<int>(k % static_cast<std::size_t>(side)), j = static_cast<int>(k / static_cast<std::size_t>(side));
      for (int d = 0; d < 6; ++d) {
        const int ii = i + di[d], jj = j + dj[d];
        if (!periodic_ && (ii < 0 || jj < 0 || ii >= side || jj >= side)) continue;
        const std::size_t nb = index(ii, jj);
        if (fixed_[nb] || seen[nb]) continue;
        seen[nb] = 1;
        stack.push_back(nb);
      }
    }
    return count == free_nodes_.size();
  }

  DomainSpec domain_;
  int n_;
  bool periodic_ = false;
  double x0_ = 0.0, length_ = 1.0;
  std::vector<char> fixed_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Chart coefficient C = E A E^{-1} g^{-1} of a frame-component tensor A at x.
inline Mat<2> chart_coefficient(const ManifoldModel<2>& model, const Mat<2>& a_frame, const Vec<2>& x) {
  const Mat<2> e = model.frame(x);
  return e * a_frame * e.inverse() * model.inverse_metric(x);
}

/// Coefficient as chart matrices C(x) (see chart_coefficient).
using ChartCoefficient = std::function<Mat<2>(const Vec<2>&)>;

struct AssemblyOptions {
  CoefficientQuadrature quadrature = CoefficientQuadrature::Centroid;
};

namespace detail {

inline std::array<Vec<2>, 3> quadrature_points(const Mesh& mesh, std::size_t e, CoefficientQuadrature q) {
  const auto v = mesh.element_vertices(e);
  if (q == CoefficientQuadrature::Centroid) {
    const Vec<2> c = (v[0] + v[1] + v[2]) / 3.0;
    return {c, c, c};
  }
  return {0.5 * (v[0] + v[1]), 0.5 * (v[1] + v[2]), 0.5 * (v[2] + v[0])};
}

}  // namespace detail

/// Per-element averaged C sqrt(det g), evaluated in parallel.
inline std::vector<Mat<2>> element_coefficients(const ManifoldModel<2>& model, const Mesh& mesh, const ChartCoefficient& c,
                                                const AssemblyOptions& options = {}) {
  std::vector<Mat<2>> out(mesh.element_count());
  const int points = options.quadrature == CoefficientQuadrature::Centroid ? 1 : 3;
  std::vector<int> bad(out.size(), 0);
  parallel_for(out.size(), [&](std::size_t e) {
    const auto qp = detail::quadrature_points(mesh, e, options.quadrature);
    Mat<2> acc = Mat<2>::Zero();
    for (int k = 0; k < points; ++k) {
      const Vec<2> x = wrap01(qp[static_cast<std::size_t>(k)]);
      const double det = model.metric(x).determinant();
      if (!(det > 0.0)) {
        bad[e] = 1;
        return;
      }
      const Mat<2> ck = c(x);
      const Mat<2> sym = 0.5 * (ck + ck.transpose());
      if (!(sym.trace() > 0.0 && sym.determinant() > 0.0)) {
        bad[e] = 2;
        return;
      }
      acc += ck * std::sqrt(det);
    }
    out[e] = acc / points;
  });
  for (std::size_t e = 0; e < bad.size(); ++e) {
    if (bad[e] == 1) throw Error(ErrorKind::SingularAssembly, "nonpositive metric determinant in element " + std::to_string(e));
    if (bad[e] == 2) throw Error(ErrorKind::NotElliptic, "coefficient is not elliptic in element " + std::to_string(e));
  }
  return out;
}

/// Stiffness matrix over the free nodes. Each row gathers the six triangles
/// around its node, so rows are independent and assembled in parallel.
inline SparseMatrix assemble_stiffness(const Mesh& mesh, const std::vector<Mat<2>>& coeff) {
  const std::size_t nu = mesh.unknowns();
  const int n = mesh.cells();
  const int side = mesh.nodes_per_side();
  const double area = mesh.element_area();
  std::vector<int> outer(nu + 1, 0);
  std::vector<int> inner(nu * 7);
  std::vector<double> values(nu * 7);
  std::vector<unsigned char> count(nu, 0);
  // (cell offset di, dj, triangle t, local vertex of the row node)
  static constexpr int kIncident[6][4] = {{0, 0, 0, 0}, {0, 0, 1, 0}, {-1, 0, 0, 1}, {-1, -1, 0, 2}, {-1, -1, 1, 1}, {0, -1, 1, 2}};
  parallel_for(nu, [&](std::size_t r) {
    const std::size_t node = static_cast<std::size_t>(mesh.free_nodes()[r]);
    const int i = static_cast<int>(node % static_cast<std::size_t>(side)), j = static_cast<int>(node / static_cast<std::size_t>(side));
    std::array<std::pair<int, double>, 7> row;
    unsigned nrow = 0;
    for (const auto& inc : kIncident) {
      int ci = i + inc[0], cj = j + inc[1];
      if (mesh.periodic()) {
        ci = (ci + n) % n;
        cj = (cj + n) % n;
      } else if (ci < 0 || cj < 0 || ci >= n || cj >= n) {
        continue;
      }
      const std::size_t e = 2 * (static_cast<std::size_t>(cj) * static_cast<std::size_t>(n) + static_cast<std::size_t>(ci)) +
                            static_cast<std::size_t>(inc[2]);
      const auto nodes = mesh.element_nodes(e);
      const auto grads = mesh.barycentric_gradients(e);
      const Vec<2> cb = coeff[e].transpose() * grads[static_cast<std::size_t>(inc[3])];
      for (std::size_t a = 0; a < 3; ++a) {
        const int col = mesh.free_index(nodes[a]);
        if (col < 0) continue;
        const double v = area * cb.dot(grads[a]);
        unsigned k = 0;
        while (k < nrow && row[k].first != col) ++k;
        if (k == nrow) row[nrow++] = {col, 0.0};
        row[k].second += v;
      }
    }
    std::sort(row.begin(), row.begin() + nrow);
    for (unsigned k = 0; k < nrow; ++k) {
      inner[r * 7 + k] = row[k].first;
      values[r * 7 + k] = row[k].second;
    }
    count[r] = static_cast<unsigned char>(nrow);
  });
  // compact the fixed-width rows into CSR
  std::size_t nnz = 0;
  for (std::size_t r = 0; r < nu; ++r) {
    outer[r] = static_cast<int>(nnz);
    for (unsigned k = 0; k < count[r]; ++k, ++nnz) {
      inner[nnz] = inner[r * 7 + k];
      values[nnz] = values[r * 7 + k];
    }
  }
  outer[nu] = static_cast<int>(nnz);
  const Eigen::Map<const SparseMatrix> view(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nnz),
                                            outer.data(), inner.data(), values.data());
  return SparseMatrix(view);
}

/// f * sqrt(det g) at every edge midpoint, each shared edge evaluated once.
/// Edge families per cell (i, j): horizontal (i+1/2, j), vertical (i, j+1/2)
/// and diagonal (i+1/2, j+1/2).
class EdgeMidpointValues {
 public:
  EdgeMidpointValues(const ManifoldModel<2>& model, const Mesh& mesh, const std::function<double(const Vec<2>&)>& f)
      : n_(mesh.cells()), side_(n_ + 1) {
    const std::size_t count = static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_);
    for (auto* v : {&h_, &v_, &d_}) v->resize(count);
    const double hh = mesh.h();
    const bool flat = model.is_flat();
    const double flat_density = model.volume_density(Vec<2>::Zero());
    parallel_for(count, [&](std::size_t k) {
      const int i = static_cast<int>(k % static_cast<std::size_t>(side_)), j = static_cast<int>(k / static_cast<std::size_t>(side_));
      const Vec<2> x = mesh.node(i, j);
      auto eval = [&](const Vec<2>& m) {
        const Vec<2> w = wrap01(m);
        return f(w) * (flat ? flat_density : model.volume_density(w));
      };
      h_[k] = eval(x + Vec<2>(0.5 * hh, 0.0));
      v_[k] = eval(x + Vec<2>(0.0, 0.5 * hh));
      d_[k] = eval(x + Vec<2>(0.5 * hh, 0.5 * hh));
    });
  }

  /// Values at the midpoints of edges (v0,v1), (v1,v2), (v2,v0) of element e.
  std::array<double, 3> element(std::size_t e) const {
    const std::size_t cell = e / 2;
    const int i = static_cast<int>(cell % static_cast<std::size_t>(n_)), j = static_cast<int>(cell / static_cast<std::size_t>(n_));
    if (e % 2 == 0) return {h_[at(i, j)], v_[at(i + 1, j)], d_[at(i, j)]};
    return {d_[at(i, j)], h_[at(i, j + 1)], v_[at(i, j)]};
  }

 private:
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(side_) + static_cast<std::size_t>(i); }

  int n_, side_;
  std::vector<double> h_, v_, d_;
};

/// Load vector int f phi sqrt(det g) by the edge-midpoint rule.
inline Eigen::VectorXd assemble_load(const ManifoldModel<2>& model, const Mesh& mesh, const std::function<double(const Vec<2>&)>& f) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.unknowns()));
  const EdgeMidpointValues mids(model, mesh, f);
  const double w = mesh.element_area() / 3.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    const auto m = mids.element(e);
    // vertex k touches midpoints k (edge k,k+1) and k-1 (edge k-1,k), each with weight 1/2
    for (int k = 0; k < 3; ++k) {
      const int r = mesh.free_index(nodes[static_cast<std::size_t>(k)]);
      if (r < 0) continue;
      b[r] += w * 0.5 * (m[static_cast<std::size_t>(k)] + m[static_cast<std::size_t>((k + 2) % 3)]);
    }
  }
  return b;
}

/// Linear interpolation from the mesh with n/2 cells to the mesh with n
/// cells (the P1 spaces are nested), restricted to free nodes.
inline SparseMatrix prolongation(const Mesh& coarse, const Mesh& fine) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(fine.unknowns() * 2);
  const int side = fine.nodes_per_side();
  for (int fi : fine.free_nodes()) {
    const std::size_t k = static_cast<std::size_t>(fi);
    const int i = static_cast<int>(k % static_cast<std::size_t>(side)), j = static_cast<int>(k / static_cast<std::size_t>(side));
    const int row = fine.free_index(k);
    std::array<std::pair<int, int>, 2> parents;
    int np = 0;
    if (i % 2 == 0 && j % 2 == 0) {
      parents[0] = {i / 2, j / 2};
      np = 1;
    } else if (i % 2 == 1 && j % 2 == 0) {
      parents = {{{(i - 1) / 2, j / 2}, {(i + 1) / 2, j / 2}}};
      np = 2;
    } else if (i % 2 == 0 && j % 2 == 1) {
      parents = {{{i / 2, (j - 1) / 2}, {i / 2, (j + 1) / 2}}};
      np = 2;
    } else {  // midpoint of the coarse diagonal
      parents = {{{(i - 1) / 2, (j - 1) / 2}, {(i + 1) / 2, (j + 1) / 2}}};
      np = 2;
    }
    for (int p = 0; p < np; ++p) {
      const int c = coarse.free_index(coarse.index(parents[static_cast<std::size_t>(p)].first, parents[static_cast<std::size_t>(p)].second));
      if (c >= 0) t.emplace_back(row, c, np == 1 ? 1.0 : 0.5);
    }
  }
  SparseMatrix p(static_cast<Eigen::Index>(fine.unknowns()), static_cast<Eigen::Index>(coarse.unknowns()));
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

struct SolveOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
  int smoothing_steps = 2;
  int coarsest_cells = 32;  // stop coarsening at or below this many cells per side
};

/// Galerkin multigrid hierarchy with symmetric Gauss-Seidel smoothing.
class Multigrid {
 public:
  Multigrid(const ManifoldModel<2>& model, const Mesh& mesh, SparseMatrix a, const SolveOptions& options)
      : options_(options) {
    levels_.push_back({std::move(a), SparseMatrix(), {}});
    Mesh current = mesh;
    while (current.cells() % 2 == 0 && current.cells() > options.coarsest_cells) {
      const Mesh coarse(model, current.domain(), current.cells() / 2);
      SparseMatrix p = prolongation(coarse, current);
      const SparseMatrix ap = levels_.back().a * p;
      SparseMatrix ac = SparseMatrix(p.transpose()) * ap;
      ac.prune(0.0);
      levels_.back().p = std::move(p);
      levels_.push_back({std::move(ac), SparseMatrix(), {}});
      current = coarse;
    }
    for (auto& l : levels_) {
      l.diagonal = l.a.diagonal();
    }
    coarse_solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    coarse_solver_->compute(Eigen::SparseMatrix<double>(levels_.back().a));
    if (coarse_solver_->info() != Eigen::Success)
      throw Error(ErrorKind::SingularAssembly, "coarse multigrid operator is not positive definite");
  }

  std::size_t levels() const { return levels_.size(); }

  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    z.setZero(r.size());
    cycle(0, r, z);
  }

 private:
  struct Level {
    SparseMatrix a;
    SparseMatrix p;  // to this level from the next coarser one
    Eigen::VectorXd diagonal;
  };

  void gauss_seidel(const Level& l, const Eigen::VectorXd& b, Eigen::VectorXd& x, bool forward) const {
    const Eigen::Index n = l.a.rows();
    const auto* outer = l.a.outerIndexPtr();
    const auto* inner = l.a.innerIndexPtr();
    const double* values = l.a.valuePtr();
    for (Eigen::Index s = 0; s < n; ++s) {
      const Eigen::Index i = forward ? s : n - 1 - s;
      double acc = b[i];
      for (auto k = outer[i]; k < outer[i + 1]; ++k) acc -= values[k] * x[inner[k]];
      x[i] = (acc + l.diagonal[i] * x[i]) / l.diagonal[i];
    }
  }

  void cycle(std::size_t level, const Eigen::VectorXd& b, Eigen::VectorXd& x) const {
    const Level& l = levels_[level];
    if (level + 1 == levels_.size()) {
      x = coarse_solver_->solve(b);
      return;
    }
    for (int s = 0; s < options_.smoothing_steps; ++s) gauss_seidel(l, b, x, true);
    const Eigen::VectorXd r = b - l.a * x;
    const Eigen::VectorXd rc = l.p.transpose() * r;
    Eigen::VectorXd ec = Eigen::VectorXd::Zero(rc.size());
    cycle(level + 1, rc, ec);
    x += l.p * ec;
    for (int s = 0; s < options_.smoothing_steps; ++s) gauss_seidel(l, b, x, false);
  }

  SolveOptions options_;
  std::vector<Level> levels_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> coarse_solver_;
};

/// Nodal field on a mesh (zero on fixed nodes) plus solver statistics.
struct FemSolution {
  std::vector<double> u;  // every mesh node
  int iterations = 0;
  double relative_residual = 0.0;
  std::size_t multigrid_levels = 0;
};

/// Assembled Dirichlet problem; reusable for several loads.
class DirichletProblem {
 public:
  DirichletProblem(const ManifoldModel<2>& model, const Mesh& mesh, const ChartCoefficient& c, AssemblyOptions assembly = {},
                   SolveOptions options = {})
      : model_(model), mesh_(mesh), options_(options) {
    setup(element_coefficients(model_, mesh_, c, assembly));
  }

  /// From precomputed per-element C sqrt(det g) (see element_coefficients).
  DirichletProblem(const ManifoldModel<2>& model, const Mesh& mesh, const std::vector<Mat<2>>& element_coeff,
                   SolveOptions options = {})
      : model_(model), mesh_(mesh), options_(options) {
    if (element_coeff.size() != mesh.element_count())
      throw Error(ErrorKind::InvalidConfig, "one coefficient per element is required");
    setup(element_coeff);
  }

  const Mesh& mesh() const { return mesh_; }
  const SparseMatrix& stiffness() const { return stiffness_; }

  FemSolution solve(const std::function<double(const Vec<2>&)>& f) const { return solve_load(assemble_load(model_, mesh_, f)); }

  FemSolution solve_load(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    auto apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out = stiffness_ * v; };
    auto prec = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) { mg_->apply(r, z); };
    const auto res = pcg(apply, prec, b, x, KrylovOptions{options_.tolerance, options_.max_iterations});
    if (!res.converged)
      throw Error(ErrorKind::NoConvergence, "Dirichlet solve stalled at relative residual " + std::to_string(res.relative_residual));
    FemSolution out;
    out.u.assign(mesh_.node_count(), 0.0);
    for (std::size_t r = 0; r < mesh_.unknowns(); ++r)
      out.u[static_cast<std::size_t>(mesh_.free_nodes()[r])] = x[static_cast<Eigen::Index>(r)];
    out.iterations = res.iterations;
    out.relative_residual = res.relative_residual;
    out.multigrid_levels = mg_->levels();
    return out;
  }

 private:
  void setup(const std::vector<Mat<2>>& element_coeff) {
    // symmetric element coefficients give a symmetric stiffness matrix
    for (const auto& c : element_coeff)
      if (std::abs(c(0, 1) - c(1, 0)) > 1e-12 * c.cwiseAbs().maxCoeff())
        throw Error(ErrorKind::InvalidConfig, "the Dirichlet solver needs a self-adjoint coefficient");
    stiffness_ = assemble_stiffness(mesh_, element_coeff);
    mg_ = std::make_unique<Multigrid>(model_, mesh_, stiffness_, options_);
  }

  ManifoldModel<2> model_;
  Mesh mesh_;
  SolveOptions options_;
  SparseMatrix stiffness_;
  std::unique_ptr<Multigrid> mg_;
};

/// Free-node vector of a nodal field.
inline Eigen::VectorXd free_values(const Mesh& mesh, const std::vector<double>& u) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(mesh.unknowns()));
  for (std::size_t r = 0; r < mesh.unknowns(); ++r) x[static_cast<Eigen::Index>(r)] = u[static_cast<std::size_t>(mesh.free_nodes()[r])];
  return x;
}

/// int u phi sqrt(det g) with u piecewise linear and phi smooth (edge-midpoint rule).
inline double weak_pairing(const ManifoldModel<2>& model, const Mesh& mesh, const std::vector<double>& u,
                           const std::function<double(const Vec<2>&)>& phi) {
  const EdgeMidpointValues mids(model, mesh, phi);
  std::vector<double> per(mesh.element_count());
  const double w = mesh.element_area() / 3.0;
  parallel_for(per.size(), [&](std::size_t e) {
    const auto nodes = mesh.element_nodes(e);
    const auto m = mids.element(e);
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += 0.5 * (u[nodes[k]] + u[nodes[(k + 1) % 3]]) * m[k];
    per[e] = w * s;
  });
  return pairwise_sum(per);
}

/// L2 norm with the sqrt(det g) weight taken at the centroid; the edge-midpoint
/// rule is exact for the quadratic u^2 on each element.
inline double l2_norm(const ManifoldModel<2>& model, const Mesh& mesh, const std::vector<double>& u) {
  std::vector<double> per(mesh.element_count());
  const double w = mesh.element_area() / 3.0;
  parallel_for(per.size(), [&](std::size_t e) {
    const auto n = mesh.element_nodes(e);
    const double a = u[n[0]], b = u[n[1]], c = u[n[2]];
    const double s = 0.25 * ((a + b) * (a + b) + (b + c) * (b + c) + (c + a) * (c + a));
    per[e] = w * s * model.volume_density(wrap01(mesh.centroid(e)));
  });
  return std::sqrt(pairwise_sum(per));
}

/// H1 seminorm (int |grad u|_g^2 sqrt(det g))^{1/2}, metric at the centroid.
inline double h1_seminorm(const ManifoldModel<2>& model, const Mesh& mesh, const std::vector<double>& u) {
  std::vector<double> per(mesh.element_count());
  parallel_for(per.size(), [&](std::size_t e) {
    const auto n = mesh.element_nodes(e);
    const auto g = mesh.barycentric_gradients(e);
    const Vec<2> du = u[n[0]] * g[0] + u[n[1]] * g[1] + u[n[2]] * g[2];
    const Vec<2> x = wrap01(mesh.centroid(e));
    per[e] = mesh.element_area() * du.dot(model.inverse_metric(x) * du) * model.volume_density(x);
  });
  return std::sqrt(pairwise_sum(per));
}

/// Difference of two nodal fields on the same mesh.
inline std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

/// Named right-hand sides.
inline std::function<double(const Vec<2>&)> load_preset(const std::string& name) {
  if (name == "one") return [](const Vec<2>&) { return 1.0; };
  if (name == "sin-bump")
    return [](const Vec<2>& x) { return std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
  if (name == "manufactured")  // -Laplace of sin(pi x) sin(pi y)
    return [](const Vec<2>& x) { return 2.0 * kPi * kPi * std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
  const auto e = Expression::parse(name);
  return [e](const Vec<2>& x) { return e(x); };
}

}  // namespace homog
