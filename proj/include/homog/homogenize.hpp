#pragma once

// Periodic cell problems on a fiber, the homogenized tensor A*, and the
// first-order corrector u1.
//
// Over a base point p the fiber carries the constant Gram matrix G. For a
// tensor A in frame components the cell flux is A grad_v w = A G^{-1} dw/dv,
// so the cell equation -div^v(A[grad_v w_i + o_i]) = 0 reads
//   sum_k d_k (B dw)_k = -sum_k d_k (A o_i)^k,  B = A G^{-1},
// with B symmetric exactly when A is self-adjoint with respect to G. The
// solver is pseudo-spectral (m = 2N samples per axis, Nyquist modes dropped)
// with Krylov iterations preconditioned by the constant symbol 4 pi^2 k^T Bbar k.

#include "homog/fiber.hpp"
#include "homog/krylov.hpp"

#include <array>
#include <vector>

namespace homog {

struct CellOptions {
  int modes = 32;  // N; the fiber grid has 2N samples per axis
  double tolerance = 1e-12;
  int max_iterations = 2000;
};

/// How the directions o_i are chosen: the frame itself (valid only when the
/// frame is orthonormal, G = I) or Gram-Schmidt on the frame in g(p).
enum class DirectionKind { Frame, GramSchmidt };

/// Columns are g-orthonormal directions, Gram-Schmidt on the frame in order.
template <int Dim>
Mat<Dim> gram_schmidt_directions(const Mat<Dim>& gram) {
  Mat<Dim> o = Mat<Dim>::Identity();
  for (int i = 0; i < Dim; ++i) {
    Vec<Dim> c = o.col(i);
    for (int j = 0; j < i; ++j) c -= (o.col(j).dot(gram * c)) * o.col(j);
    o.col(i) = c / std::sqrt(c.dot(gram * c));
  }
  return o;
}

template <int Dim>
struct CellSolution {
  Vec<Dim> point = Vec<Dim>::Zero();
  Mat<Dim> gram = Mat<Dim>::Identity();
  Mat<Dim> directions = Mat<Dim>::Identity();  // columns o_i, frame components
  FiberGrid<Dim> grid;
  std::vector<Mat<Dim>> tensor;                    // A at the fiber samples
  std::array<std::vector<double>, Dim> correctors;  // w_i, mean zero
  std::array<VerticalSamples<Dim>, Dim> gradients;  // grad_v w_i
  bool symmetric = true;
  int iterations = 0;
  double residual = 0.0;  // worst relative spectral residual over the directions

  /// D_v w at sample s as an endomorphism: X -> sum_i <X, o_i> grad_v w_i.
  Mat<Dim> corrector_differential(std::size_t s) const {
    Mat<Dim> w;
    for (int i = 0; i < Dim; ++i)
      for (int a = 0; a < Dim; ++a) w(a, i) = gradients[i][a][s];
    return w * directions.transpose() * gram;
  }
};

namespace detail {

/// -div(B grad) on fiber samples, with B = A G^{-1} per sample.
template <int Dim>
class CellOperator {
 public:
  CellOperator(const FiberGrid<Dim>& grid, std::vector<Mat<Dim>> flux) : grid_(grid), fft_(grid.m), flux_(std::move(flux)) {
    Mat<Dim> mean = Mat<Dim>::Zero();
    for (const auto& b : flux_) mean += b;
    mean /= static_cast<double>(flux_.size());
    mean = 0.5 * (mean + mean.transpose());
    symbol_.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec<Dim> k = grid.wavevector(i);
      const double s = 4.0 * kPi * kPi * k.dot(mean * k);
      symbol_[i] = (grid.nyquist(i) || k.squaredNorm() == 0.0 || !(s > 0.0)) ? 0.0 : 1.0 / s;
    }
  }

  void apply(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    const auto c = fft_.forward(std::vector<double>(w.data(), w.data() + w.size()));
    VerticalSamples<Dim> partial;
    for (int d = 0; d < Dim; ++d) partial[d] = fft_.inverse(spectral_partial(grid_, c, d));
    VerticalSamples<Dim> f;
    for (int d = 0; d < Dim; ++d) f[d].assign(grid_.size(), 0.0);
    for (std::size_t s = 0; s < grid_.size(); ++s)
      for (int a = 0; a < Dim; ++a)
        for (int b = 0; b < Dim; ++b) f[a][s] += flux_[s](a, b) * partial[b][s];
    const auto div = vertical_divergence(grid_, f);
    out.resize(w.size());
    for (std::size_t s = 0; s < grid_.size(); ++s) out[static_cast<Eigen::Index>(s)] = -div[s];
  }

  void precondition(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    auto c = fft_.forward(std::vector<double>(r.data(), r.data() + r.size()));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= symbol_[i];
    const auto back = fft_.inverse(c);
    z = Eigen::Map<const Eigen::VectorXd>(back.data(), static_cast<Eigen::Index>(back.size()));
  }

 private:
  FiberGrid<Dim> grid_;
  FiberFFT<Dim> fft_;
  std::vector<Mat<Dim>> flux_;
  std::vector<double> symbol_;
};

}  // namespace detail

/// Solves the cell problems at p for the directions chosen by `kind`.
/// Throws NotElliptic if sym(G A) fails to be positive on a sample, and
/// NoConvergence if the Krylov iteration stalls.
template <int Dim>
CellSolution<Dim> solve_cell(const TensorField<Dim>& a, const Vec<Dim>& p, const Mat<Dim>& gram,
                             DirectionKind kind = DirectionKind::GramSchmidt, const CellOptions& options = {}) {
  if (options.modes < 1) throw Error(ErrorKind::InvalidConfig, "cell problems need at least one fiber mode");
  CellSolution<Dim> sol;
  sol.point = p;
  sol.gram = gram;
  sol.grid = FiberGrid<Dim>{2 * options.modes};
  if (kind == DirectionKind::Frame) {
    if ((gram - Mat<Dim>::Identity()).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorKind::InvalidConfig, "frame directions need an orthonormal frame (G = I)");
    sol.directions = Mat<Dim>::Identity();
  } else {
    sol.directions = gram_schmidt_directions<Dim>(gram);
  }

  const auto& grid = sol.grid;
  const std::size_t n = grid.size();
  sol.tensor.resize(n);
  for (std::size_t s = 0; s < n; ++s) sol.tensor[s] = a(p, grid.point(s));

  const Eigen::LLT<Mat<Dim>> llt(gram);
  const Mat<Dim> linv = Mat<Dim>(llt.matrixL()).inverse();
  const Mat<Dim> ginv = gram.inverse();
  std::vector<Mat<Dim>> flux(n);
  double asym = 0.0, scale = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Mat<Dim> ga = gram * sol.tensor[s];
    const Mat<Dim> reduced = linv * (0.5 * (ga + ga.transpose())) * linv.transpose();
    const double low = Eigen::SelfAdjointEigenSolver<Mat<Dim>>(reduced).eigenvalues().minCoeff();
    if (!(low > 0.0))
      throw Error(ErrorKind::NotElliptic, "tensor '" + a.name + "' is not elliptic at fiber sample " + std::to_string(s));
    flux[s] = sol.tensor[s] * ginv;
    asym = std::max(asym, (flux[s] - flux[s].transpose()).cwiseAbs().maxCoeff());
    scale = std::max(scale, flux[s].cwiseAbs().maxCoeff());
  }
  sol.symmetric = asym <= 1e-12 * scale;

  const detail::CellOperator<Dim> op(grid, std::move(flux));
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.apply(x, y); };
  auto prec = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) { op.precondition(r, z); };
  const KrylovOptions kopt{options.tolerance, options.max_iterations};

  for (int i = 0; i < Dim; ++i) {
    // right-hand side: div^v(A o_i)
    VerticalSamples<Dim> ao;
    for (int d = 0; d < Dim; ++d) ao[d].resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      const Vec<Dim> v = sol.tensor[s] * sol.directions.col(i);
      for (int d = 0; d < Dim; ++d) ao[d][s] = v[d];
    }
    const auto div = vertical_divergence(grid, ao);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(div.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const auto r = sol.symmetric ? pcg(apply, prec, b, x, kopt) : bicgstab(apply, prec, b, x, kopt);
    if (!r.converged)
      throw Error(ErrorKind::NoConvergence, "cell problem " + std::to_string(i) + " stalled at relative residual " +
                                                std::to_string(r.relative_residual));
    sol.iterations += r.iterations;
    sol.residual = std::max(sol.residual, r.relative_residual);
    std::vector<double> w(x.data(), x.data() + x.size());
    const double mean = fiber_mean(w);
    for (double& value : w) value -= mean;
    sol.gradients[static_cast<std::size_t>(i)] = vertical_gradient(grid, w, gram);
    sol.correctors[static_cast<std::size_t>(i)] = std::move(w);
  }
  return sol;
}

/// Homogenized tensor at one base point: the endomorphism A* (frame
/// components) and its bilinear form G A*.
template <int Dim>
struct HomogenizedTensor {
  Mat<Dim> endomorphism = Mat<Dim>::Identity();
  Mat<Dim> bilinear = Mat<Dim>::Identity();
  double lower = 0.0;  // spectrum of the bilinear form relative to G
  double upper = 0.0;
  double asymmetry = 0.0;  // max |bilinear - bilinear^T|
};

namespace detail {

template <int Dim>
HomogenizedTensor<Dim> finish_tensor(const Mat<Dim>& endomorphism, const Mat<Dim>& gram) {
  HomogenizedTensor<Dim> h;
  h.endomorphism = endomorphism;
  h.bilinear = gram * endomorphism;
  h.asymmetry = (h.bilinear - h.bilinear.transpose()).cwiseAbs().maxCoeff();
  const Mat<Dim> linv = Mat<Dim>(Eigen::LLT<Mat<Dim>>(gram).matrixL()).inverse();
  const Mat<Dim> reduced = linv * (0.5 * (h.bilinear + h.bilinear.transpose())) * linv.transpose();
  const auto ev = Eigen::SelfAdjointEigenSolver<Mat<Dim>>(reduced).eigenvalues();
  h.lower = ev.minCoeff();
  h.upper = ev.maxCoeff();
  return h;
}

}  // namespace detail

/// General formula: A* = mean over the fiber of (I + (D_v w)^ad) A (I + D_v w),
/// with the metric adjoint X^ad = G^{-1} X^T G.
template <int Dim>
HomogenizedTensor<Dim> assemble_homogenized_general(const CellSolution<Dim>& sol) {
  const Mat<Dim> ginv = sol.gram.inverse();
  std::vector<Mat<Dim>> terms(sol.grid.size());
  for (std::size_t s = 0; s < terms.size(); ++s) {
    const Mat<Dim> dw = sol.corrector_differential(s);
    const Mat<Dim> right = Mat<Dim>::Identity() + dw;
    terms[s] = (Mat<Dim>::Identity() + ginv * dw.transpose() * sol.gram) * sol.tensor[s] * right;
  }
  Mat<Dim> mean = Mat<Dim>::Zero();
  for (int a = 0; a < Dim; ++a)
    for (int b = 0; b < Dim; ++b) {
      std::vector<double> entry(terms.size());
      for (std::size_t s = 0; s < terms.size(); ++s) entry[s] = terms[s](a, b);
      mean(a, b) = fiber_mean(entry);
    }
  return detail::finish_tensor<Dim>(mean, sol.gram);
}

/// Frame formula (orthonormal frames): A*[e_i, e_j] = mean of
/// <A(grad_v w_i + e_i), grad_v w_j + e_j>.
template <int Dim>
HomogenizedTensor<Dim> assemble_homogenized_frame(const CellSolution<Dim>& sol) {
  if ((sol.gram - Mat<Dim>::Identity()).cwiseAbs().maxCoeff() > 1e-12 ||
      (sol.directions - Mat<Dim>::Identity()).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorKind::InvalidConfig, "the frame formula needs an orthonormal frame and frame directions");
  Mat<Dim> form;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) {
      std::vector<double> entry(sol.grid.size());
      for (std::size_t s = 0; s < entry.size(); ++s) {
        Vec<Dim> xi, xj;
        for (int a = 0; a < Dim; ++a) {
          xi[a] = sol.gradients[static_cast<std::size_t>(i)][a][s] + (a == i ? 1.0 : 0.0);
          xj[a] = sol.gradients[static_cast<std::size_t>(j)][a][s] + (a == j ? 1.0 : 0.0);
        }
        entry[s] = (sol.tensor[s] * xi).dot(xj);
      }
      form(i, j) = fiber_mean(entry);
    }
  // <A* X, Y> = sum X^i Y^j form(i, j) with G = I, so A* = form^T
  return detail::finish_tensor<Dim>(form.transpose(), sol.gram);
}

/// Fiber average of the flux A (I + D_v w); equals A* when the cell
/// equations hold exactly.
template <int Dim>
Mat<Dim> average_flux(const CellSolution<Dim>& sol) {
  Mat<Dim> mean = Mat<Dim>::Zero();
  for (int a = 0; a < Dim; ++a)
    for (int b = 0; b < Dim; ++b) {
      std::vector<double> entry(sol.grid.size());
      for (std::size_t s = 0; s < entry.size(); ++s)
        entry[s] = (sol.tensor[s] * (Mat<Dim>::Identity() + sol.corrector_differential(s)))(a, b);
      mean(a, b) = fiber_mean(entry);
    }
  return mean;
}

/// u1[p, v] = sum_i <grad u, o_i> w_i(v) from the gradient of u at p (frame components).
template <int Dim>
std::vector<double> build_corrector_u1(const CellSolution<Dim>& sol, const std::type_identity_t<Vec<Dim>>& grad_u) {
  const Vec<Dim> c = sol.directions.transpose() * sol.gram * grad_u;
  std::vector<double> u1(sol.grid.size(), 0.0);
  for (int i = 0; i < Dim; ++i)
    for (std::size_t s = 0; s < u1.size(); ++s) u1[s] += c[i] * sol.correctors[static_cast<std::size_t>(i)][s];
  return u1;
}

/// grad_v u1 = D_v w (grad u), the closed form of the corrector gradient.
template <int Dim>
VerticalSamples<Dim> corrector_u1_gradient(const CellSolution<Dim>& sol, const std::type_identity_t<Vec<Dim>>& grad_u) {
  VerticalSamples<Dim> g;
  for (int d = 0; d < Dim; ++d) g[d].resize(sol.grid.size());
  for (std::size_t s = 0; s < sol.grid.size(); ++s) {
    const Vec<Dim> v = sol.corrector_differential(s) * grad_u;
    for (int d = 0; d < Dim; ++d) g[d][s] = v[d];
  }
  return g;
}

/// A* over the base: one solve when A does not depend on p, otherwise one
/// solve per requested point (independent, in parallel).
template <int Dim>
class HomogenizedField {
 public:
  HomogenizedField(const ManifoldModel<Dim>& model, TensorField<Dim> a, DirectionKind kind = DirectionKind::GramSchmidt,
                   CellOptions options = {})
      : model_(model), a_(std::move(a)), kind_(kind), options_(options) {
    constant_ = !a_.depends_on_base && model_.is_flat();
    if (constant_) {
      const Vec<Dim> p = Vec<Dim>::Zero();
      cell_ = solve_cell<Dim>(a_, p, model_.frame_gram(p), kind_, options_);
      tensor_ = assemble_homogenized_general(cell_);
    }
  }

  bool constant() const { return constant_; }
  const CellSolution<Dim>& constant_cell() const { return cell_; }
  const HomogenizedTensor<Dim>& constant_tensor() const { return tensor_; }

  CellSolution<Dim> cell(const Vec<Dim>& p) const {
    if (constant_) return cell_;
    return solve_cell<Dim>(a_, p, model_.frame_gram(p), kind_, options_);
  }

  HomogenizedTensor<Dim> tensor(const Vec<Dim>& p) const {
    if (constant_) return tensor_;
    return assemble_homogenized_general(cell(p));
  }

  /// A* at many points (frame components).
  std::vector<Mat<Dim>> endomorphisms(const std::vector<Vec<Dim>>& points) const {
    std::vector<Mat<Dim>> out(points.size());
    if (constant_) {
      std::fill(out.begin(), out.end(), tensor_.endomorphism);
      return out;
    }
    parallel_for(points.size(), [&](std::size_t i) { out[i] = tensor(points[i]).endomorphism; });
    return out;
  }

  const TensorField<Dim>& source() const { return a_; }
  const CellOptions& options() const { return options_; }

 private:
  ManifoldModel<Dim> model_;
  TensorField<Dim> a_;
  DirectionKind kind_;
  CellOptions options_;
  bool constant_ = false;
  CellSolution<Dim> cell_;
  HomogenizedTensor<Dim> tensor_;
};

}  // namespace homog
