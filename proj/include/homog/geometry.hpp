#pragma once

// Closed parallelizable manifolds presented in one periodic chart [0,1)^n:
// a periodic metric G(x), a periodic global frame E(x) (columns e_i in chart
// coordinates), Christoffel symbols by finite differences of G, and the
// exponential/log pair by RK4 integration of the geodesic equation and Newton
// shooting.

#include "homog/core.hpp"
#include "homog/expression.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <regex>
#include <string>
#include <utility>

namespace homog {

enum class MetricKind { Flat, Warped, General };

inline const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Flat: return "flat";
    case MetricKind::Warped: return "warped";
    case MetricKind::General: return "general";
  }
  return "general";
}

inline MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "flat") return MetricKind::Flat;
  if (s == "warped") return MetricKind::Warped;
  if (s == "general") return MetricKind::General;
  throw Error(ErrorKind::InvalidConfig, "unknown metric_kind '" + s + "'");
}

struct GeodesicOptions {
  double steps_per_length = 64.0;
  int min_steps = 8;
  /// Endpoint agreement required between n and 2n RK4 steps.
  double tolerance = 1e-10;
  bool checked = true;
  int max_steps = 1 << 14;
  double christoffel_step = 1e-4;
  int newton_max_iterations = 50;
  double newton_tolerance = 1e-13;
};

/// Endpoint of an integrated geodesic, in unwrapped chart coordinates.
template <int Dim>
struct GeodesicEnd {
  Vec<Dim> position;
  Vec<Dim> velocity;
  int steps = 0;
};

/// Symmetric inverse square root, used to build g-orthonormal frames.
template <int Dim>
Mat<Dim> inverse_sqrt_spd(const Mat<Dim>& g) {
  Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(g);
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

template <int Dim>
class ManifoldModel {
 public:
  static_assert(Dim == 2 || Dim == 3, "supported dimensions are 2 and 3");

  using MatrixField = std::function<Mat<Dim>(const Vec<Dim>&)>;
  /// dG/dx^m for m = 0..Dim-1; optional, finite differences are used otherwise.
  using MetricDerivative = std::function<std::array<Mat<Dim>, Dim>(const Vec<Dim>&)>;

  ManifoldModel(std::string name, MetricKind kind, MatrixField metric, MatrixField frame,
                double injectivity_floor, GeodesicOptions options = {})
      : name_(std::move(name)),
        kind_(kind),
        metric_(std::move(metric)),
        frame_(std::move(frame)),
        injectivity_floor_(injectivity_floor),
        options_(options) {
    if (!(injectivity_floor_ > 0.0))
      throw Error(ErrorKind::InvalidConfig, "injectivity_floor must be positive");
    survey();
  }

  // -- presets ------------------------------------------------------------

  static ManifoldModel flat(GeodesicOptions options = {}) {
    return ManifoldModel("flat", MetricKind::Flat, [](const Vec<Dim>&) { return Mat<Dim>::Identity(); },
                         [](const Vec<Dim>&) { return Mat<Dim>::Identity(); }, 0.5, options);
  }

  /// G = diag(1, 1 + a sin 2 pi x1, 1...), with the g-orthonormal diagonal frame.
  /// The x2-circle at the narrowest x1 has length sqrt(1-|a|); the default
  /// floor stays a margin below half of it.
  static ManifoldModel warped_sin(double a, double injectivity_floor = 0.0, GeodesicOptions options = {}) {
    if (injectivity_floor <= 0.0) injectivity_floor = 0.45 * std::sqrt(1.0 - std::min(std::abs(a), 0.99));
    if (!(std::abs(a) < 1.0)) throw Error(ErrorKind::InvalidConfig, "warped-sin amplitude must satisfy |a| < 1");
    auto metric = [a](const Vec<Dim>& x) {
      Mat<Dim> g = Mat<Dim>::Identity();
      g(1, 1) = 1.0 + a * std::sin(kTwoPi * x[0]);
      return g;
    };
    auto frame = [a](const Vec<Dim>& x) {
      Mat<Dim> e = Mat<Dim>::Identity();
      e(1, 1) = 1.0 / std::sqrt(1.0 + a * std::sin(kTwoPi * x[0]));
      return e;
    };
    ManifoldModel model("warped-sin(" + format_number(a) + ")", MetricKind::Warped, metric, frame,
                        injectivity_floor, options);
    model.set_metric_derivative([a](const Vec<Dim>& x) {
      std::array<Mat<Dim>, Dim> dg;
      for (auto& m : dg) m.setZero();
      dg[0](1, 1) = a * kTwoPi * std::cos(kTwoPi * x[0]);
      return dg;
    });
    return model;
  }

  /// Flat metric with the constant sheared frame e_2 = (b, 1, ...).
  static ManifoldModel skew_frame(double b, GeodesicOptions options = {}) {
    Mat<Dim> e = Mat<Dim>::Identity();
    e(0, 1) = b;
    return ManifoldModel("skew-frame(" + format_number(b) + ")", MetricKind::Flat,
                         [](const Vec<Dim>&) { return Mat<Dim>::Identity(); },
                         [e](const Vec<Dim>&) { return e; }, 0.5, options);
  }

  /// "flat", "warped-sin(a)" or "skew-frame(b)".
  static ManifoldModel from_preset(const std::string& preset, GeodesicOptions options = {}) {
    static const std::regex warped(R"(warped-sin\(([-+0-9.eE]+)\))");
    static const std::regex skew(R"(skew-frame\(([-+0-9.eE]+)\))");
    std::smatch m;
    if (preset == "flat") return flat(options);
    if (preset == "warped") return warped_sin(0.5, 0.0, options);
    if (std::regex_match(preset, m, warped)) return warped_sin(std::stod(m[1].str()), 0.0, options);
    if (std::regex_match(preset, m, skew)) return skew_frame(std::stod(m[1].str()), options);
    throw Error(ErrorKind::InvalidConfig, "unknown manifold preset '" + preset + "'");
  }

  /// Metric from upper-triangular expressions (g11, g12, ..., gnn, row-major);
  /// the frame is either given row-major (e11, e12, ...) or, when empty, the
  /// g-orthonormal frame G^{-1/2}.
  static ManifoldModel from_expressions(const std::vector<std::string>& metric_upper,
                                        const std::vector<std::string>& frame_entries, MetricKind kind,
                                        double injectivity_floor, GeodesicOptions options = {}) {
    constexpr std::size_t upper = Dim * (Dim + 1) / 2;
    if (metric_upper.size() != upper)
      throw Error(ErrorKind::InvalidConfig, "metric needs " + std::to_string(upper) + " expressions");
    std::vector<Expression> g;
    for (const auto& s : metric_upper) g.push_back(Expression::parse(s));
    auto metric = [g](const Vec<Dim>& x) {
      Mat<Dim> m;
      std::size_t k = 0;
      for (int i = 0; i < Dim; ++i)
        for (int j = i; j < Dim; ++j) {
          m(i, j) = g[k](x);
          m(j, i) = m(i, j);
          ++k;
        }
      return m;
    };
    MatrixField frame;
    if (frame_entries.empty()) {
      frame = [metric](const Vec<Dim>& x) { return inverse_sqrt_spd<Dim>(metric(x)); };
    } else {
      if (frame_entries.size() != static_cast<std::size_t>(Dim * Dim))
        throw Error(ErrorKind::InvalidConfig, "frame needs " + std::to_string(Dim * Dim) + " expressions");
      std::vector<Expression> e;
      for (const auto& s : frame_entries) e.push_back(Expression::parse(s));
      frame = [e](const Vec<Dim>& x) {
        Mat<Dim> m;
        for (int i = 0; i < Dim; ++i)
          for (int j = 0; j < Dim; ++j) m(i, j) = e[static_cast<std::size_t>(i * Dim + j)](x);
        return m;
      };
    }
    return ManifoldModel("expression", kind, metric, frame, injectivity_floor, options);
  }

  // -- pointwise data -------------------------------------------------------

  const std::string& name() const { return name_; }
  MetricKind kind() const { return kind_; }
  bool is_flat() const { return kind_ == MetricKind::Flat; }
  double injectivity_floor() const { return injectivity_floor_; }
  const GeodesicOptions& options() const { return options_; }

  Mat<Dim> metric(const Vec<Dim>& x) const { return metric_(x); }
  Mat<Dim> inverse_metric(const Vec<Dim>& x) const { return metric_(x).inverse(); }
  Mat<Dim> frame(const Vec<Dim>& x) const { return frame_(x); }
  Mat<Dim> frame_inverse(const Vec<Dim>& x) const { return frame_(x).inverse(); }

  /// g_ij = g(e_i, e_j), the constant fiber inner product over x.
  Mat<Dim> frame_gram(const Vec<Dim>& x) const {
    const Mat<Dim> e = frame_(x);
    return e.transpose() * metric_(x) * e;
  }

  double volume_density(const Vec<Dim>& x) const { return std::sqrt(metric_(x).determinant()); }

  double inner(const Vec<Dim>& x, const Vec<Dim>& u, const Vec<Dim>& v) const {
    return u.dot(metric_(x) * v);
  }
  double norm(const Vec<Dim>& x, const Vec<Dim>& v) const { return std::sqrt(inner(x, v, v)); }

  /// Chart components -> frame components.
  Vec<Dim> to_frame(const Vec<Dim>& x, const Vec<Dim>& v) const { return frame_(x).lu().solve(v); }
  Vec<Dim> from_frame(const Vec<Dim>& x, const Vec<Dim>& c) const { return frame_(x) * c; }

  /// Gamma[k](i, j) = Gamma^k_ij at x.
  std::array<Mat<Dim>, Dim> christoffel(const Vec<Dim>& x) const {
    std::array<Mat<Dim>, Dim> gamma;
    if (is_flat()) {
      for (auto& g : gamma) g.setZero();
      return gamma;
    }
    const std::array<Mat<Dim>, Dim> dg = metric_derivative_ ? metric_derivative_(x) : metric_gradient_fd(x);
    const Mat<Dim> ginv = metric_(x).inverse();
    for (int k = 0; k < Dim; ++k) {
      gamma[k].setZero();
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) {
          double s = 0.0;
          for (int l = 0; l < Dim; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
          gamma[k](i, j) = 0.5 * s;
        }
    }
    return gamma;
  }

  /// dG/dx^m by fourth-order central differences with step h_chr.
  std::array<Mat<Dim>, Dim> metric_gradient_fd(const Vec<Dim>& x) const {
    const double h = options_.christoffel_step;
    std::array<Mat<Dim>, Dim> dg;
    for (int m = 0; m < Dim; ++m) {
      Vec<Dim> e = Vec<Dim>::Zero();
      e[m] = h;
      dg[m] = (-metric_(x + 2.0 * e) + 8.0 * metric_(x + e) - 8.0 * metric_(x - e) + metric_(x - 2.0 * e)) /
              (12.0 * h);
    }
    return dg;
  }

  /// Installs a closed-form metric derivative (used by presets).
  void set_metric_derivative(MetricDerivative d) { metric_derivative_ = std::move(d); }
  bool has_metric_derivative() const { return static_cast<bool>(metric_derivative_); }

  // -- geodesics ------------------------------------------------------------

  /// RK4 integration of x'' = -Gamma(x', x') on t in [0,1] with a fixed step count.
  GeodesicEnd<Dim> integrate(const Vec<Dim>& p, const Vec<Dim>& v, int steps) const {
    if (is_flat()) return {p + v, v, 0};
    const double dt = 1.0 / steps;
    Vec<Dim> x = p, u = v;
    auto accel = [this](const Vec<Dim>& pos, const Vec<Dim>& vel) {
      const auto gamma = christoffel(pos);
      Vec<Dim> a;
      for (int k = 0; k < Dim; ++k) a[k] = -vel.dot(gamma[k] * vel);
      return a;
    };
    for (int s = 0; s < steps; ++s) {
      const Vec<Dim> k1x = u;
      const Vec<Dim> k1u = accel(x, u);
      const Vec<Dim> k2x = u + 0.5 * dt * k1u;
      const Vec<Dim> k2u = accel(x + 0.5 * dt * k1x, k2x);
      const Vec<Dim> k3x = u + 0.5 * dt * k2u;
      const Vec<Dim> k3u = accel(x + 0.5 * dt * k2x, k3x);
      const Vec<Dim> k4x = u + dt * k3u;
      const Vec<Dim> k4u = accel(x + dt * k3x, k4x);
      x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    }
    return {x, u, steps};
  }

  int production_steps(const Vec<Dim>& p, const Vec<Dim>& v) const {
    const double len = norm(p, v);
    return std::max(options_.min_steps, static_cast<int>(std::ceil(options_.steps_per_length * len)));
  }

  /// Step count that passes the n-versus-2n endpoint check for (p, v).
  int checked_steps(const Vec<Dim>& p, const Vec<Dim>& v) const {
    int n = production_steps(p, v);
    if (!options_.checked) return n;
    Vec<Dim> coarse = integrate(p, v, n).position;
    for (;;) {
      const Vec<Dim> fine = integrate(p, v, 2 * n).position;
      if ((fine - coarse).norm() <= options_.tolerance) return 2 * n;
      n *= 2;
      if (2 * n > options_.max_steps)
        throw Error(ErrorKind::StepSizeUnderflow, "geodesic integrator cannot reach tolerance");
      coarse = fine;
    }
  }

  /// Geodesic endpoint with step-doubling control, unwrapped coordinates.
  GeodesicEnd<Dim> shoot(const Vec<Dim>& p, const Vec<Dim>& v) const {
    if (is_flat()) return {p + v, v, 0};
    return integrate(p, v, checked_steps(p, v));
  }

  Vec<Dim> exp_map(const Vec<Dim>& p, const Vec<Dim>& v) const {
    if (is_flat()) return wrap01(Vec<Dim>(p + v));
    if (norm(p, v) > injectivity_floor_)
      throw Error(ErrorKind::RadiusExceeded, "|v|_g exceeds the injectivity floor");
    return wrap01(shoot(p, v).position);
  }

  /// Jacobian of v -> exp_p(v) (unwrapped) by central differences.
  Mat<Dim> exp_differential(const Vec<Dim>& p, const Vec<Dim>& v, int steps = 0) const {
    if (is_flat()) return Mat<Dim>::Identity();
    const int n = steps > 0 ? steps : 2 * production_steps(p, v);
    const double h = 1e-6;
    Mat<Dim> jac;
    for (int i = 0; i < Dim; ++i) {
      Vec<Dim> dv = Vec<Dim>::Zero();
      dv[i] = h;
      jac.col(i) = (integrate(p, v + dv, n).position - integrate(p, v - dv, n).position) / (2.0 * h);
    }
    return jac;
  }

  /// Chart components of exp_p^{-1}(q). Shooting starts from the second-order
  /// guess v = delta + Gamma(delta, delta) / 2 with the first-order Jacobian
  /// I - Gamma(v, .); a finite-difference Jacobian replaces it only when the
  /// contraction stalls.
  Vec<Dim> log_map(const Vec<Dim>& p, const Vec<Dim>& q) const {
    const Vec<Dim> delta = nearest_rep<Dim>(q - p);
    if (is_flat()) return flat_log(p, delta);
    const Vec<Dim> target = p + delta;
    if (norm(p, delta) > injectivity_floor_)
      throw Error(ErrorKind::RadiusExceeded, "log_map target lies beyond the injectivity floor");
    const auto gamma = christoffel(Vec<Dim>(p + 0.5 * delta));
    Vec<Dim> v = delta;
    Mat<Dim> approx_jac = Mat<Dim>::Identity();
    for (int k = 0; k < Dim; ++k) {
      v[k] += 0.5 * delta.dot(gamma[k] * delta);
      approx_jac.row(k) -= (gamma[k] * delta).transpose();
    }
    const int n = checked_steps(p, v.norm() > 0.0 ? Vec<Dim>(1.25 * v) : v);
    Eigen::PartialPivLU<Mat<Dim>> lu(approx_jac);
    bool exact_jacobian = false;
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0; it < options_.newton_max_iterations; ++it) {
      const Vec<Dim> residual = integrate(p, v, n).position - target;
      const double size = residual.template lpNorm<Eigen::Infinity>();
      if (size < options_.newton_tolerance) return v;
      if (size > 0.25 * last && !exact_jacobian) {
        const Mat<Dim> jac = exp_differential(p, v, n);
        if (!(jac.determinant() > 0.0))
          throw Error(ErrorKind::RadiusExceeded, "conjugate point detected along the shooting geodesic");
        lu.compute(jac);
        exact_jacobian = true;
      } else if (size > 0.25 * last) {
        exact_jacobian = false;  // refresh at the next stall
      }
      last = size;
      v -= lu.solve(residual);
      if (norm(p, v) > injectivity_floor_)
        throw Error(ErrorKind::RadiusExceeded, "log_map target lies beyond the injectivity floor");
    }
    throw Error(ErrorKind::NewtonDivergence, "shooting did not converge");
  }

  double distance(const Vec<Dim>& p, const Vec<Dim>& q) const {
    if (is_flat()) {
      const Vec<Dim> v = flat_log(p, nearest_rep<Dim>(q - p));
      return std::sqrt(v.dot(flat_metric_ * v));
    }
    return norm(p, log_map(p, q));
  }

  /// Midpoint-metric length of the nearest chart representative of q - p;
  /// exact on flat models, third-order accurate otherwise. Used only to
  /// prune candidates before exact distances are taken.
  double approximate_distance(const Vec<Dim>& p, const Vec<Dim>& q) const {
    if (is_flat()) return distance(p, q);
    const Vec<Dim> d = nearest_rep<Dim>(q - p);
    return std::sqrt(d.dot(metric_(p + 0.5 * d) * d));
  }

  /// Columns e_i^down(p_j; q) = (d exp_{p_j})_v e_i(p_j) with v = log_{p_j}(q).
  Mat<Dim> down_frame(const Vec<Dim>& pj, const Vec<Dim>& q) const {
    if (is_flat()) return frame_(pj);
    const Vec<Dim> v = log_map(pj, q);
    return exp_differential(pj, v, checked_steps(pj, v)) * frame_(pj);
  }

  // -- global data ----------------------------------------------------------

  double volume() const { return volume_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  double min_frame_determinant() const { return min_frame_det_; }

  /// Chart-coordinate radius that contains every geodesic ball of radius r.
  double chart_radius(double r) const { return r / std::sqrt(lambda_min_); }

 private:
  static std::string format_number(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  /// Nearest lattice representative in the (constant) metric norm.
  Vec<Dim> flat_log(const Vec<Dim>&, const Vec<Dim>& delta) const {
    if (flat_identity_) return delta;
    Vec<Dim> best = delta;
    double best_norm = delta.dot(flat_metric_ * delta);
    const int count = static_cast<int>(GridIndex<Dim>::size(3));
    for (int c = 0; c < count; ++c) {
      const auto idx = GridIndex<Dim>::unflatten(static_cast<std::size_t>(c), 3);
      Vec<Dim> shift;
      for (int d = 0; d < Dim; ++d) shift[d] = idx[d] - 1;
      const Vec<Dim> cand = delta + shift;
      const double n2 = cand.dot(flat_metric_ * cand);
      if (n2 < best_norm - 1e-15) {
        best = cand;
        best_norm = n2;
      }
    }
    return best;
  }

  void survey() {
    const int n = Dim == 2 ? 64 : 24;
    const std::size_t total = GridIndex<Dim>::size(n);
    lambda_min_ = std::numeric_limits<double>::infinity();
    lambda_max_ = 0.0;
    min_frame_det_ = std::numeric_limits<double>::infinity();
    std::vector<double> dens(total);
    for (std::size_t c = 0; c < total; ++c) {
      const Vec<Dim> x = GridIndex<Dim>::midpoint(c, n);
      const Mat<Dim> g = metric_(x);
      if ((g - g.transpose()).norm() > 1e-12 * g.norm())
        throw Error(ErrorKind::InvalidConfig, "metric is not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(g);
      lambda_min_ = std::min(lambda_min_, es.eigenvalues().minCoeff());
      lambda_max_ = std::max(lambda_max_, es.eigenvalues().maxCoeff());
      min_frame_det_ = std::min(min_frame_det_, std::abs(frame_(x).determinant()));
      dens[c] = std::sqrt(g.determinant());
      if (c % 7 == 0) {
        for (int d = 0; d < Dim; ++d) {
          Vec<Dim> y = x;
          y[d] += 1.0;
          if ((metric_(y) - g).norm() > 1e-12 * g.norm() || (frame_(y) - frame_(x)).norm() > 1e-12 * frame_(x).norm())
            throw Error(ErrorKind::InvalidConfig, "metric or frame is not 1-periodic");
        }
      }
    }
    if (!(lambda_min_ > 0.0)) throw Error(ErrorKind::InvalidConfig, "metric is not positive definite");
    if (!(min_frame_det_ > 1e-12)) throw Error(ErrorKind::InvalidConfig, "frame degenerates");
    volume_ = pairwise_sum(dens) / static_cast<double>(total);
    flat_metric_ = metric_(Vec<Dim>::Zero());
    flat_identity_ = (flat_metric_ - Mat<Dim>::Identity()).norm() == 0.0;
    if (is_flat()) {
      for (std::size_t c = 0; c < total; c += 97) {
        if ((metric_(GridIndex<Dim>::midpoint(c, n)) - flat_metric_).norm() > 1e-14)
          throw Error(ErrorKind::InvalidConfig, "metric_kind flat requires a constant metric");
      }
    }
  }

  std::string name_;
  MetricKind kind_;
  MatrixField metric_;
  MatrixField frame_;
  MetricDerivative metric_derivative_;
  double injectivity_floor_;
  GeodesicOptions options_;
  double volume_ = 1.0;
  double lambda_min_ = 1.0;
  double lambda_max_ = 1.0;
  double min_frame_det_ = 1.0;
  Mat<Dim> flat_metric_ = Mat<Dim>::Identity();
  bool flat_identity_ = true;
};

/// max over the geodesic sphere of radius r about p_j of ||E_down(p_j; q) - E(q)||.
template <int Dim>
double down_frame_deviation(const ManifoldModel<Dim>& model, const Vec<Dim>& pj, double r, int directions = 32) {
  static_assert(Dim == 2 || Dim == 3);
  double worst = 0.0;
  auto probe = [&](Vec<Dim> dir) {
    dir *= r / model.norm(pj, dir);
    const Vec<Dim> q = model.exp_map(pj, dir);
    worst = std::max(worst, (model.down_frame(pj, q) - model.frame(q)).norm());
  };
  for (int k = 0; k < directions; ++k) {
    const double t = kTwoPi * k / directions;
    if constexpr (Dim == 2) {
      probe(Vec<Dim>(std::cos(t), std::sin(t)));
    } else {
      for (int l = 1; l < directions / 2; ++l) {
        const double s = kPi * l / (directions / 2);
        probe(Vec<Dim>(std::sin(s) * std::cos(t), std::sin(s) * std::sin(t), std::cos(s)));
      }
    }
  }
  return worst;
}

/// Measured constant C in ||(d exp_p)_v - I|| <= C |v| over random p and
/// |v|_g <= radius.
template <int Dim>
double euclidean_chart_constant(const ManifoldModel<Dim>& model, double radius, int samples,
                                std::uint64_t seed) {
  if (model.is_flat()) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec<Dim> p, dir;
    for (int d = 0; d < Dim; ++d) {
      p[d] = unit(rng);
      dir[d] = normal(rng);
    }
    const double len = radius * unit(rng) + 1e-3 * radius;
    const Vec<Dim> v = dir * (len / model.norm(p, dir));
    const Mat<Dim> dexp = model.exp_differential(p, v);
    worst = std::max(worst, (dexp - Mat<Dim>::Identity()).norm() / len);
  }
  return worst;
}

}  // namespace homog
