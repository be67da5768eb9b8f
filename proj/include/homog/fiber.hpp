#pragma once

// Periodic fields on the torus fibers and the vertical calculus in frame
// coordinates v in [0,1)^n. A fiber over p carries the constant Gram matrix
// G(p) = E^T g E of the frame, so every vertical operator has constant
// coefficients; discrete fibers are m^n sample grids handled by FFT.
//
// Conventions: a (1,1) tensor A acts on frame components as (A X)^i = A(i,l) X^l;
// vertical gradients have frame components G^{-1} df/dv; div^v X = sum_i dX^i/dv_i.

#include "homog/expression.hpp"
#include "homog/geometry.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <functional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace homog {

using Complex = std::complex<double>;

/// Uniform m^Dim sample grid of the fiber torus [0,1)^Dim.
template <int Dim>
struct FiberGrid {
  int m = 64;

  std::size_t size() const { return GridIndex<Dim>::size(m); }
  Vec<Dim> point(std::size_t flat) const { return GridIndex<Dim>::node(flat, m); }

  /// Signed wave numbers in [-m/2, m/2) in FFT order.
  Vec<Dim> wavevector(std::size_t flat) const {
    const auto idx = GridIndex<Dim>::unflatten(flat, m);
    Vec<Dim> k;
    for (int d = 0; d < Dim; ++d) k[d] = idx[d] < (m + 1) / 2 ? idx[d] : idx[d] - m;
    return k;
  }

  /// True for modes on the Nyquist plane (k_d = -m/2 for some d, m even).
  bool nyquist(std::size_t flat) const {
    if (m % 2 != 0) return false;
    const auto idx = GridIndex<Dim>::unflatten(flat, m);
    for (int d = 0; d < Dim; ++d)
      if (idx[d] == m / 2) return true;
    return false;
  }
};

/// Multi-dimensional FFT by 1D transforms along each axis. forward() returns
/// Fourier coefficients c_k = m^{-Dim} sum_v f(v) e^{-2 pi i k.v}.
template <int Dim>
class FiberFFT {
 public:
  explicit FiberFFT(int m) : m_(m) {}

  std::vector<Complex> forward(const std::vector<double>& values) const {
    std::vector<Complex> data(values.begin(), values.end());
    transform(data, false);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& c : data) c *= scale;
    return data;
  }

  std::vector<Complex> forward(std::vector<Complex> data) const {
    transform(data, false);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& c : data) c *= scale;
    return data;
  }

  std::vector<Complex> inverse_complex(std::vector<Complex> coeffs) const {
    transform(coeffs, true);
    return coeffs;
  }

  std::vector<double> inverse(const std::vector<Complex>& coeffs) const {
    auto data = inverse_complex(coeffs);
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i].real();
    return out;
  }

 private:
  /// Unnormalized transform: sign -1 forward, +1 inverse.
  void transform(std::vector<Complex>& data, bool inverse) const {
    thread_local Eigen::FFT<double> fft;
    const std::size_t m = static_cast<std::size_t>(m_);
    std::vector<Complex> line(m), out(m);
    std::size_t stride = 1;
    for (int axis = Dim - 1; axis >= 0; --axis) {
      const std::size_t block = stride * m;
      for (std::size_t base = 0; base < data.size(); base += block)
        for (std::size_t off = 0; off < stride; ++off) {
          for (std::size_t i = 0; i < m; ++i) line[i] = data[base + off + i * stride];
          if (inverse) {
            fft.SetFlag(Eigen::FFT<double>::Unscaled);
            fft.inv(out, line);
          } else {
            fft.fwd(out, line);
          }
          for (std::size_t i = 0; i < m; ++i) data[base + off + i * stride] = out[i];
        }
      stride *= m;
    }
  }

  int m_;
};

template <int Dim>
using VerticalSamples = std::array<std::vector<double>, Dim>;

/// Samples of a scalar function of v on the grid.
template <int Dim, class F>
std::vector<double> sample_fiber(const FiberGrid<Dim>& grid, F&& f) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(grid.point(i));
  return out;
}

/// Spectral coordinate derivative d/dv_axis (Nyquist modes dropped).
template <int Dim>
std::vector<Complex> spectral_partial(const FiberGrid<Dim>& grid, const std::vector<Complex>& coeffs, int axis) {
  std::vector<Complex> out(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (grid.nyquist(i)) continue;
    out[i] = Complex(0.0, kTwoPi * grid.wavevector(i)[axis]) * coeffs[i];
  }
  return out;
}

/// Vertical gradient: frame components (G^{-1} df/dv)_j on the grid.
template <int Dim>
VerticalSamples<Dim> vertical_gradient(const FiberGrid<Dim>& grid, const std::vector<double>& f,
                                       const std::type_identity_t<Mat<Dim>>& gram) {
  const FiberFFT<Dim> fft(grid.m);
  const auto c = fft.forward(f);
  VerticalSamples<Dim> partial;
  for (int d = 0; d < Dim; ++d) partial[d] = fft.inverse(spectral_partial(grid, c, d));
  const Mat<Dim> ginv = gram.inverse();
  VerticalSamples<Dim> out;
  for (int d = 0; d < Dim; ++d) out[d].assign(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int a = 0; a < Dim; ++a)
      for (int b = 0; b < Dim; ++b) out[a][i] += ginv(a, b) * partial[b][i];
  return out;
}

/// Vertical divergence sum_i dX^i/dv_i of frame components.
template <int Dim>
std::vector<double> vertical_divergence(const FiberGrid<Dim>& grid, const std::type_identity_t<VerticalSamples<Dim>>& x) {
  const FiberFFT<Dim> fft(grid.m);
  std::vector<Complex> acc(grid.size());
  for (int d = 0; d < Dim; ++d) {
    const auto dc = spectral_partial(grid, fft.forward(x[d]), d);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dc[i];
  }
  return fft.inverse(acc);
}

/// Fiber average (mode zero); exact for band-limited data below the Nyquist limit.
inline double fiber_mean(const std::vector<double>& f) {
  return pairwise_sum(f) / static_cast<double>(f.size());
}

/// Metric fiber inner product averaged over the fiber: mean of X^T G Y.
template <int Dim>
double fiber_inner(const VerticalSamples<Dim>& x, const VerticalSamples<Dim>& y, const Mat<Dim>& gram) {
  std::vector<double> v(x[0].size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int a = 0; a < Dim; ++a)
      for (int b = 0; b < Dim; ++b) v[i] += x[a][i] * gram(a, b) * y[b][i];
  return fiber_mean(v);
}

/// Vertical Leray decomposition X = grad_v u + Y with div^v Y = 0 and u of
/// zero fiber mean: u_hat(k) = k.X_hat(k) / (2 pi i k^T G^{-1} k) for k != 0.
template <int Dim>
struct LerayDecomposition {
  std::vector<double> u;
  VerticalSamples<Dim> gradient;  // grad_v u
  VerticalSamples<Dim> remainder; // Y
};

template <int Dim>
LerayDecomposition<Dim> vertical_leray(const FiberGrid<Dim>& grid, const std::type_identity_t<VerticalSamples<Dim>>& x,
                                       const std::type_identity_t<Mat<Dim>>& gram) {
  const FiberFFT<Dim> fft(grid.m);
  const Mat<Dim> ginv = gram.inverse();
  std::array<std::vector<Complex>, Dim> xc;
  for (int d = 0; d < Dim; ++d) xc[d] = fft.forward(x[d]);
  std::vector<Complex> uc(grid.size());
  for (std::size_t i = 0; i < uc.size(); ++i) {
    if (grid.nyquist(i)) continue;
    const Vec<Dim> k = grid.wavevector(i);
    const double norm2 = k.dot(ginv * k);
    if (norm2 == 0.0) continue;
    Complex kx = 0.0;
    for (int d = 0; d < Dim; ++d) kx += k[d] * xc[d][i];
    uc[i] = kx / Complex(0.0, kTwoPi * norm2);
  }
  LerayDecomposition<Dim> out;
  out.u = fft.inverse(uc);
  out.gradient = vertical_gradient(grid, out.u, gram);
  for (int d = 0; d < Dim; ++d) {
    out.remainder[d].resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out.remainder[d][i] = x[d][i] - out.gradient[d][i];
  }
  return out;
}

/// P_k f = <k, grad f> / (2 pi i |k|^2) at a point, from the coordinate gradient of f.
template <int Dim>
Complex p_k_operator(const Vec<Dim>& grad_f, const Vec<Dim>& k) {
  const double k2 = k.squaredNorm();
  if (k2 == 0.0) throw Error(ErrorKind::ZeroMode, "P_k is undefined for k = 0");
  return Complex(k.dot(grad_f), 0.0) / Complex(0.0, kTwoPi * k2);
}

/// Real trigonometric polynomial sum_k a_k cos(2 pi k.v) + b_k sin(2 pi k.v).
template <int Dim>
struct TrigPolynomial {
  std::vector<Vec<Dim>> modes;
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;

  double operator()(const Vec<Dim>& v) const {
    double s = 0.0;
    for (std::size_t t = 0; t < modes.size(); ++t) {
      const double phase = kTwoPi * modes[t].dot(v);
      s += cos_coeffs[t] * std::cos(phase) + sin_coeffs[t] * std::sin(phase);
    }
    return s;
  }

  Vec<Dim> gradient(const Vec<Dim>& v) const {
    Vec<Dim> g = Vec<Dim>::Zero();
    for (std::size_t t = 0; t < modes.size(); ++t) {
      const double phase = kTwoPi * modes[t].dot(v);
      g += kTwoPi * (sin_coeffs[t] * std::cos(phase) - cos_coeffs[t] * std::sin(phase)) * modes[t];
    }
    return g;
  }

  /// Random coefficients in [-1,1] on every mode with |k_i| <= band (one of each +-k pair).
  static TrigPolynomial random(int band, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TrigPolynomial p;
    const int side = 2 * band + 1;
    for (std::size_t flat = 0; flat < GridIndex<Dim>::size(side); ++flat) {
      const auto idx = GridIndex<Dim>::unflatten(flat, side);
      Vec<Dim> k;
      for (int d = 0; d < Dim; ++d) k[d] = idx[d] - band;
      // keep the first nonzero component positive so +-k are not both listed
      int lead = 0;
      while (lead < Dim && k[lead] == 0.0) ++lead;
      if (lead < Dim && k[lead] < 0.0) continue;
      p.modes.push_back(k);
      p.cos_coeffs.push_back(u(rng));
      p.sin_coeffs.push_back(lead < Dim ? u(rng) : 0.0);
    }
    return p;
  }
};

/// Scalar field f[p, v] on the torus bundle (v in frame coordinates).
template <int Dim>
struct FiberField {
  using Value = std::function<double(const Vec<Dim>&, const Vec<Dim>&)>;
  using Gradient = std::function<Vec<Dim>(const Vec<Dim>&, const Vec<Dim>&)>;

  std::string name;
  Value value;
  Gradient fiber_partials;  // df/dv (coordinate partials); empty: finite differences
  Gradient base_partials;   // df/dp (chart partials); empty: finite differences
  bool depends_on_base = true;
  bool depends_on_fiber = true;

  double operator()(const Vec<Dim>& p, const Vec<Dim>& v) const { return value(p, v); }

  Vec<Dim> dv(const Vec<Dim>& p, const Vec<Dim>& v) const {
    if (fiber_partials) return fiber_partials(p, v);
    if (!depends_on_fiber) return Vec<Dim>::Zero();
    return fd([&](const Vec<Dim>& w) { return value(p, w); }, v);
  }

  Vec<Dim> dp(const Vec<Dim>& p, const Vec<Dim>& v) const {
    if (base_partials) return base_partials(p, v);
    if (!depends_on_base) return Vec<Dim>::Zero();
    return fd([&](const Vec<Dim>& x) { return value(x, v); }, p);
  }

  static FiberField constant(double c) {
    FiberField f;
    f.name = std::to_string(c);
    f.value = [c](const Vec<Dim>&, const Vec<Dim>&) { return c; };
    f.fiber_partials = f.base_partials = [](const Vec<Dim>&, const Vec<Dim>&) { return Vec<Dim>::Zero(); };
    f.depends_on_base = f.depends_on_fiber = false;
    return f;
  }

  /// Closed form in x1..x3 (base chart) and v1..v3 (fiber), e.g. "2+cos(2*pi*v1)".
  static FiberField from_expression(const std::string& text) {
    const auto e = Expression::parse(text);
    FiberField f;
    f.name = text;
    f.value = [e](const Vec<Dim>& p, const Vec<Dim>& v) { return e(p, v); };
    f.depends_on_base = e.uses_base();
    f.depends_on_fiber = e.uses_fiber();
    return f;
  }

  static FiberField from_trig(const TrigPolynomial<Dim>& t, const std::string& name = "trig") {
    FiberField f;
    f.name = name;
    f.value = [t](const Vec<Dim>&, const Vec<Dim>& v) { return t(v); };
    f.fiber_partials = [t](const Vec<Dim>&, const Vec<Dim>& v) { return t.gradient(v); };
    f.base_partials = [](const Vec<Dim>&, const Vec<Dim>&) { return Vec<Dim>::Zero(); };
    f.depends_on_base = false;
    return f;
  }

  /// Fourth-order central differences, step 1e-4.
  template <class F>
  static Vec<Dim> fd(F&& f, const Vec<Dim>& x) {
    const double h = 1e-4;
    Vec<Dim> g;
    for (int d = 0; d < Dim; ++d) {
      Vec<Dim> e = Vec<Dim>::Zero();
      e[d] = h;
      g[d] = (-f(x + 2.0 * e) + 8.0 * f(x + e) - 8.0 * f(x - e) + f(x - 2.0 * e)) / (12.0 * h);
    }
    return g;
  }
};

/// Vertical vector field with frame components X^i[p, v].
template <int Dim>
using VerticalField = std::array<FiberField<Dim>, Dim>;

/// div^v X as a fiber field (sum of fiber partials of the components).
template <int Dim>
FiberField<Dim> vertical_divergence_field(const VerticalField<Dim>& x) {
  FiberField<Dim> f;
  f.name = "div_v";
  f.value = [x](const Vec<Dim>& p, const Vec<Dim>& v) {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i) s += x[i].dv(p, v)[i];
    return s;
  };
  f.depends_on_base = false;
  for (const auto& c : x) f.depends_on_base = f.depends_on_base || c.depends_on_base;
  return f;
}

/// (1,1) tensor field A[p, v] in frame components.
template <int Dim>
struct TensorField {
  std::string name;
  std::function<Mat<Dim>(const Vec<Dim>&, const Vec<Dim>&)> value;
  bool depends_on_base = false;
  bool depends_on_fiber = true;

  Mat<Dim> operator()(const Vec<Dim>& p, const Vec<Dim>& v) const { return value(p, v); }

  /// Metric adjoint A^ad = G^{-1} A^T G (so that <A X, Y> = <X, A^ad Y>).
  static Mat<Dim> adjoint(const Mat<Dim>& a, const Mat<Dim>& gram) { return gram.inverse() * a.transpose() * gram; }
  static Mat<Dim> symmetrize(const Mat<Dim>& a, const Mat<Dim>& gram) { return 0.5 * (a + adjoint(a, gram)); }

  static TensorField constant(const Mat<Dim>& a) {
    TensorField t;
    t.name = "constant";
    t.value = [a](const Vec<Dim>&, const Vec<Dim>&) { return a; };
    t.depends_on_fiber = false;
    return t;
  }

  static TensorField scalar(const std::string& name, std::function<double(const Vec<Dim>&, const Vec<Dim>&)> a,
                            bool depends_on_base) {
    TensorField t;
    t.name = name;
    t.value = [a](const Vec<Dim>& p, const Vec<Dim>& v) { return Mat<Dim>(a(p, v) * Mat<Dim>::Identity()); };
    t.depends_on_base = depends_on_base;
    return t;
  }

  /// Presets:
  ///   identity
  ///   laminate            (2 + cos 2 pi v1) Id
  ///   laminate-v2         (2 + cos 2 pi v2) Id
  ///   checkerboard        (2 + cos 2 pi v1 cos 2 pi v2) Id
  ///   modulated-laminate  (2 + cos 2 pi v1)(1 + 0.25 sin 2 pi x1) Id
  ///   anisotropic         symmetric, full, fiber dependent (2D only)
  ///   constant:a,b,...    constant matrix, row-major
  ///   scalar:<expr>       expr(x, v) Id
  static TensorField preset(const std::string& spec) {
    if (spec == "identity") return constant(Mat<Dim>::Identity());
    if (spec == "laminate")
      return scalar(spec, [](const Vec<Dim>&, const Vec<Dim>& v) { return 2.0 + std::cos(kTwoPi * v[0]); }, false);
    if (spec == "laminate-v2")
      return scalar(spec, [](const Vec<Dim>&, const Vec<Dim>& v) { return 2.0 + std::cos(kTwoPi * v[1]); }, false);
    if (spec == "checkerboard")
      return scalar(
          spec, [](const Vec<Dim>&, const Vec<Dim>& v) { return 2.0 + std::cos(kTwoPi * v[0]) * std::cos(kTwoPi * v[1]); },
          false);
    if (spec == "modulated-laminate")
      return scalar(
          spec,
          [](const Vec<Dim>& p, const Vec<Dim>& v) {
            return (2.0 + std::cos(kTwoPi * v[0])) * (1.0 + 0.25 * std::sin(kTwoPi * p[0]));
          },
          true);
    if (spec == "anisotropic") {
      if constexpr (Dim == 2) {
        TensorField t;
        t.name = spec;
        t.value = [](const Vec<Dim>&, const Vec<Dim>& v) {
          const double c1 = std::cos(kTwoPi * v[0]), s2 = std::sin(kTwoPi * v[1]);
          Mat<Dim> a;
          a << 2.0 + c1, 0.4 * s2 * c1, 0.4 * s2 * c1, 1.5 + 0.5 * s2;
          return a;
        };
        return t;
      }
      throw Error(ErrorKind::InvalidConfig, "the anisotropic tensor preset is two-dimensional");
    }
    if (spec.rfind("constant:", 0) == 0) {
      std::vector<double> vals;
      std::string rest = spec.substr(9);
      std::size_t start = 0;
      while (start <= rest.size()) {
        const std::size_t comma = rest.find(',', start);
        const std::string tok = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
          vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw Error(ErrorKind::InvalidConfig, "bad number '" + tok + "' in tensor preset");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (vals.size() != static_cast<std::size_t>(Dim * Dim))
        throw Error(ErrorKind::InvalidConfig, "constant tensor needs " + std::to_string(Dim * Dim) + " entries");
      Mat<Dim> a;
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) a(i, j) = vals[static_cast<std::size_t>(i * Dim + j)];
      auto t = constant(a);
      t.name = spec;
      return t;
    }
    if (spec.rfind("scalar:", 0) == 0) {
      const auto e = Expression::parse(spec.substr(7));
      auto t = scalar(spec, [e](const Vec<Dim>& p, const Vec<Dim>& v) { return e(p, v); }, e.uses_base());
      t.depends_on_fiber = e.uses_fiber();
      return t;
    }
    throw Error(ErrorKind::InvalidConfig, "unknown tensor preset '" + spec + "'");
  }
};

/// Extreme generalized Rayleigh quotients <A w, w>_G / <w, w>_G over fiber samples.
struct EllipticityBounds {
  double lower = 0.0;
  double upper = 0.0;
  double constant() const { return std::max(upper, 1.0 / lower); }
};

template <int Dim>
EllipticityBounds ellipticity(const TensorField<Dim>& a, const std::type_identity_t<Vec<Dim>>& p,
                              const std::type_identity_t<Mat<Dim>>& gram, int m = 16) {
  EllipticityBounds b{std::numeric_limits<double>::infinity(), 0.0};
  const FiberGrid<Dim> grid{m};
  const Eigen::LLT<Mat<Dim>> llt(gram);
  const Mat<Dim> l = llt.matrixL();
  const Mat<Dim> linv = l.inverse();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Mat<Dim> ga = gram * a(p, grid.point(i));
    const Mat<Dim> s = 0.5 * (ga + ga.transpose());
    const Mat<Dim> reduced = linv * s * linv.transpose();
    const Eigen::SelfAdjointEigenSolver<Mat<Dim>> eig(reduced);
    b.lower = std::min(b.lower, eig.eigenvalues().minCoeff());
    b.upper = std::max(b.upper, eig.eigenvalues().maxCoeff());
  }
  return b;
}

/// Normalized bundle integral: integral over M of the fiber average of f,
/// midpoint rule in the chart (n^Dim cells, sqrt(det g) weight), fiber mean
/// on an m^Dim grid.
template <int Dim>
double normalized_integral(const ManifoldModel<Dim>& model, const FiberField<Dim>& f, int base_n = 64, int fiber_m = 32) {
  const std::size_t total = GridIndex<Dim>::size(base_n);
  const FiberGrid<Dim> grid{fiber_m};
  std::vector<double> cell(total);
  parallel_for(total, [&](std::size_t c) {
    const Vec<Dim> p = GridIndex<Dim>::midpoint(c, base_n);
    double avg;
    if (!f.depends_on_fiber) {
      avg = f(p, Vec<Dim>::Zero());
    } else {
      std::vector<double> vals(grid.size());
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = f(p, grid.point(i));
      avg = fiber_mean(vals);
    }
    cell[c] = avg * model.volume_density(p);
  });
  return pairwise_sum(cell) / static_cast<double>(total);
}

}  // namespace homog
