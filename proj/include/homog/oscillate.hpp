#pragma once

// Oscillating functions and tensors built from fiber data through the
// partition of unity, f^eps(q) = sum_j psi_j(q) f[p_j, v_j(q)] with
// v_j(q) = E(p_j)^{-1} log_{p_j}(q) / eps reduced mod 1, and the two-scale
// diagnostics measured over an eps-ladder.

#include "homog/fiber.hpp"
#include "homog/partition.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace homog {

/// Coordinates mode expresses fiber components in the frame at q; pullback
/// mode uses the down frame e_i^v(p_j; q) = d exp_{p_j}(e_i(p_j)).
enum class TensorMode { Coordinates, Pullback };

inline const char* to_string(TensorMode m) { return m == TensorMode::Coordinates ? "coords" : "pullback"; }
inline TensorMode tensor_mode_from_string(const std::string& s) {
  if (s == "coords" || s == "coordinates") return TensorMode::Coordinates;
  if (s == "pullback") return TensorMode::Pullback;
  throw Error(ErrorKind::InvalidConfig, "unknown tensor mode '" + s + "' (coords | pullback)");
}

/// Largest eps admitted for a net of separation s: the fast scale must stay
/// well below the cell scale.
inline double max_epsilon_for_separation(double separation) { return separation / 4.0; }

/// One contributing site at a point q.
template <int Dim>
struct OscillationTerm {
  int site = -1;
  double psi = 0.0;
  Vec<Dim> dpsi = Vec<Dim>::Zero();   // chart covector
  Vec<Dim> fiber = Vec<Dim>::Zero();  // v_j in [0,1)^Dim
  Vec<Dim> site_point = Vec<Dim>::Zero();
  Mat<Dim> jacobian = Mat<Dim>::Identity();  // eps dv_j/dq (frame comps per chart displacement)
};

template <int Dim>
class Oscillator {
 public:
  explicit Oscillator(std::shared_ptr<const PartitionOfUnity<Dim>> pu) : pu_(std::move(pu)) {
    const double eps = pu_->epsilon();
    if (eps > max_epsilon_for_separation(pu_->separation()))
      throw Error(ErrorKind::ScaleOrderViolated, "eps = " + std::to_string(eps) + " exceeds separation / 4 = " +
                                                      std::to_string(max_epsilon_for_separation(pu_->separation())));
    const auto& net = pu_->net().points;
    frame_inv_.resize(net.size());
    for (std::size_t j = 0; j < net.size(); ++j) frame_inv_[j] = model().frame_inverse(net[j]);
  }

  const PartitionOfUnity<Dim>& partition() const { return *pu_; }
  const ManifoldModel<Dim>& model() const { return pu_->model(); }
  double epsilon() const { return pu_->epsilon(); }

  /// Contributing sites at q; `with_jacobian` also fills eps dv_j/dq.
  std::vector<OscillationTerm<Dim>> terms(const Vec<Dim>& q, bool with_jacobian = false) const {
    const auto s = pu_->evaluate_all(q);
    const auto& m = model();
    const double eps = epsilon();
    std::vector<OscillationTerm<Dim>> out(s.sites.size());
    for (std::size_t a = 0; a < s.sites.size(); ++a) {
      auto& t = out[a];
      t.site = s.sites[a];
      t.psi = s.values[a];
      t.dpsi = s.differentials[a];
      t.site_point = pu_->net().points[static_cast<std::size_t>(t.site)];
      const Vec<Dim> log = m.is_flat() ? Vec<Dim>(-s.logs[a]) : m.log_map(t.site_point, s.point);
      const Mat<Dim>& einv = frame_inv_[static_cast<std::size_t>(t.site)];
      t.fiber = wrap01(Vec<Dim>(einv * log / eps));
      if (with_jacobian) {
        t.jacobian = m.is_flat() ? einv : Mat<Dim>(einv * m.exp_differential(t.site_point, log).inverse());
      }
    }
    return out;
  }

  double value(const FiberField<Dim>& f, const Vec<Dim>& q) const {
    double s = 0.0;
    visit(q, [&](double psi, const Vec<Dim>& site, const Vec<Dim>& fiber) { s += psi * f(site, fiber); });
    return s;
  }

  /// Chart differential of f^eps at q.
  Vec<Dim> differential(const FiberField<Dim>& f, const Vec<Dim>& q) const {
    Vec<Dim> d = Vec<Dim>::Zero();
    const double eps = epsilon();
    for (const auto& t : terms(q, true)) {
      d += t.dpsi * f(t.site_point, t.fiber);
      d += t.psi * (t.jacobian.transpose() * f.dv(t.site_point, t.fiber)) / eps;
    }
    return d;
  }

  /// (grad_v f)^eps at q in frame components (coordinates mode): sum_j psi_j G(p_j)^{-1} df/dv.
  Vec<Dim> vertical_gradient_value(const FiberField<Dim>& f, const Vec<Dim>& q) const {
    Vec<Dim> g = Vec<Dim>::Zero();
    for (const auto& t : terms(q)) g += t.psi * model().frame_gram(t.site_point).inverse() * f.dv(t.site_point, t.fiber);
    return g;
  }

  /// X^eps at q in frame components (coordinates mode).
  Vec<Dim> vector_value(const VerticalField<Dim>& x, const Vec<Dim>& q) const {
    Vec<Dim> v = Vec<Dim>::Zero();
    for (const auto& t : terms(q))
      for (int i = 0; i < Dim; ++i) v[i] += t.psi * x[static_cast<std::size_t>(i)](t.site_point, t.fiber);
    return v;
  }

  /// A^eps at q as frame components at q; optionally symmetrized in g(q).
  /// Pullback mode maps through the down frames: E(q)^{-1} D_j A D_j^{-1} E(q).
  Mat<Dim> tensor_value(const TensorField<Dim>& a, const Vec<Dim>& q, TensorMode mode, bool symmetrize) const {
    const auto& m = model();
    const Vec<Dim> qq = wrap01(q);
    Mat<Dim> out = Mat<Dim>::Zero();
    if (mode == TensorMode::Coordinates) {
      visit(qq, [&](double psi, const Vec<Dim>& site, const Vec<Dim>& fiber) { out += psi * a(site, fiber); });
    } else {
      const Mat<Dim> eq = m.frame(qq), eq_inv = eq.inverse();
      for (const auto& t : terms(qq)) {
        const Mat<Dim> down = m.down_frame(t.site_point, qq);
        out += t.psi * eq_inv * down * a(t.site_point, t.fiber) * down.inverse() * eq;
      }
    }
    if (symmetrize) out = TensorField<Dim>::symmetrize(out, m.frame_gram(qq));
    return out;
  }

 private:
  /// fn(psi_j, p_j, v_j) over the contributing sites, without gradients or allocation.
  template <class Fn>
  void visit(const Vec<Dim>& q, Fn&& fn) const {
    const auto& m = model();
    const double eps = epsilon();
    const Vec<Dim> qq = wrap01(q);
    pu_->for_each_value(qq, [&](int site, double psi, const Vec<Dim>& log_q) {
      const Vec<Dim>& p = pu_->net().points[static_cast<std::size_t>(site)];
      const Vec<Dim> log = m.is_flat() ? Vec<Dim>(-log_q) : m.log_map(p, qq);
      fn(psi, p, wrap01(Vec<Dim>(frame_inv_[static_cast<std::size_t>(site)] * log / eps)));
    });
  }

  std::shared_ptr<const PartitionOfUnity<Dim>> pu_;
  std::vector<Mat<Dim>> frame_inv_;
};

/// Tensor-product midpoint rule on the chart with the sqrt(det g) weight and
/// fixed-order pairwise summation.
template <int Dim>
struct BaseQuadrature {
  int n = 256;

  template <class F>
  double integrate(const ManifoldModel<Dim>& model, F&& f) const {
    const std::size_t total = GridIndex<Dim>::size(n);
    std::vector<double> vals(total);
    parallel_for(total, [&](std::size_t c) {
      const Vec<Dim> q = GridIndex<Dim>::midpoint(c, n);
      vals[c] = f(q) * model.volume_density(q);
    });
    return pairwise_sum(vals) / static_cast<double>(total);
  }
};

/// Integral and a Richardson estimate of its quadrature error from grids n and n/2.
struct QuadratureValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

template <int Dim, class F>
QuadratureValue integrate_with_estimate(const ManifoldModel<Dim>& model, int n, F&& f) {
  const double fine = BaseQuadrature<Dim>{n}.integrate(model, f);
  const double coarse = BaseQuadrature<Dim>{std::max(1, n / 2)}.integrate(model, f);
  return {fine, std::abs(fine - coarse) / 3.0};
}

/// Two-scale pairing: integral over M of u(q) f^eps(q).
template <int Dim, class U>
QuadratureValue two_scale_pairing(const Oscillator<Dim>& osc, U&& u, const FiberField<Dim>& f, int n) {
  return integrate_with_estimate<Dim>(osc.model(), n, [&](const Vec<Dim>& q) { return u(q) * osc.value(f, q); });
}

// ---------------------------------------------------------------------------
// Diagnostics over an eps-ladder

struct LadderConfig {
  std::vector<double> epsilons{0.02, 0.01, 0.005};
  double alpha = 0.8;
  double beta = 0.6;
  std::uint64_t seed = 1;
  double points_per_epsilon = 8.0;  // quadrature spacing h <= eps / points_per_epsilon
  int min_quadrature = 256;
  StepProfile profile = StepProfile::Quintic;
  bool lattice_aligned = false;

  int quadrature_n(double eps) const {
    return std::max(min_quadrature, static_cast<int>(std::ceil(points_per_epsilon / eps)));
  }
};

/// Nets and partitions for every eps of a ladder.
template <int Dim>
class Ladder {
 public:
  Ladder(const ManifoldModel<Dim>& model, LadderConfig config) : model_(model), config_(std::move(config)) {
    check_exponents(config_.alpha, config_.beta);
    if (config_.epsilons.empty()) return;
    for (double eps : config_.epsilons) {
      if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorKind::InvalidConfig, "eps must lie in (0, 1)");
      NetOptions no;
      no.lattice_aligned = config_.lattice_aligned;
      no.epsilon = eps;
      no.beta = config_.beta;
      const double s = std::pow(eps, config_.beta);
      const auto net = build_net(model_, s, config_.seed, no);
      const VoronoiDecomposition<Dim> dec(model_, net);
      PartitionOptions po;
      po.profile = config_.profile;
      oscillators_.emplace_back(std::make_shared<const PartitionOfUnity<Dim>>(dec, config_.alpha, config_.beta, eps, po));
    }
  }

  const ManifoldModel<Dim>& model() const { return model_; }
  const LadderConfig& config() const { return config_; }
  std::size_t size() const { return oscillators_.size(); }
  const Oscillator<Dim>& operator[](std::size_t i) const { return oscillators_[i]; }

 private:
  ManifoldModel<Dim> model_;
  LadderConfig config_;
  std::vector<Oscillator<Dim>> oscillators_;
};

struct LadderRow {
  double epsilon = 0.0;
  double measured = 0.0;
  double target = 0.0;
  double error = 0.0;           // |measured - target| (or the residual itself)
  double relative_error = 0.0;  // error / scale
  double quadrature_error = 0.0;
};

struct LadderReport {
  std::string suite;
  std::string name;
  std::vector<LadderRow> rows;
  double slope = 0.0;  // log-log slope of error against eps
  bool decreasing = false;
  bool passed = false;
  std::string requirement;
};

namespace detail {

/// Strictly decreasing, with values already at the rounding floor accepted.
inline bool strictly_decreasing(const std::vector<LadderRow>& rows, double floor) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].error < rows[i - 1].error) && rows[i].error > floor) return false;
  return true;
}

inline void finish(LadderReport& r, double floor) {
  std::vector<double> e, x;
  for (const auto& row : r.rows) {
    x.push_back(row.epsilon);
    e.push_back(std::max(row.error, 1e-300));
  }
  r.slope = r.rows.size() >= 2 ? loglog_slope(x, e) : 0.0;
  r.decreasing = strictly_decreasing(r.rows, floor);
}

}  // namespace detail

/// Riemann-Lebesgue: integral of f^eps against the bundle integral of f.
/// Relative errors use |target|, or the bundle L2 norm of f when the target is 0.
template <int Dim>
LadderReport riemann_lebesgue_check(const Ladder<Dim>& ladder, const FiberField<Dim>& f, double tolerance = 0.05) {
  LadderReport r{"rl", f.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  const double target = normalized_integral(m, f);
  const auto sq = FiberField<Dim>{"f^2", [&f](const Vec<Dim>& p, const Vec<Dim>& v) { return f(p, v) * f(p, v); }, {}, {}};
  const double norm = std::sqrt(normalized_integral(m, sq));
  const double scale = std::abs(target) > 1e-12 * norm ? std::abs(target) : norm;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double eps = ladder[i].epsilon();
    const auto q = two_scale_pairing(ladder[i], [](const Vec<Dim>&) { return 1.0; }, f, ladder.config().quadrature_n(eps));
    const double err = std::abs(q.value - target);
    r.rows.push_back({eps, q.value, target, err, err / scale, q.error_estimate});
  }
  detail::finish(r, 1e-12 * scale);
  r.requirement = "decreasing, final relative error < " + std::to_string(tolerance);
  r.passed = r.decreasing && !r.rows.empty() && r.rows.back().relative_error < tolerance;
  return r;
}

/// Admissibility: integral of |f^eps|^2 against the bundle integral of |f|^2.
template <int Dim>
LadderReport admissibility_check(const Ladder<Dim>& ladder, const FiberField<Dim>& f, double tolerance = 0.05) {
  LadderReport r{"admissible", f.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  const auto sq = FiberField<Dim>{"f^2", [&f](const Vec<Dim>& p, const Vec<Dim>& v) { return f(p, v) * f(p, v); }, {}, {}};
  const double target = normalized_integral(m, sq);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const auto q = integrate_with_estimate<Dim>(m, ladder.config().quadrature_n(eps), [&](const Vec<Dim>& x) {
      const double v = osc.value(f, x);
      return v * v;
    });
    const double err = std::abs(q.value - target);
    r.rows.push_back({eps, q.value, target, err, err / target, q.error_estimate});
  }
  detail::finish(r, 1e-12 * target);
  r.requirement = "decreasing, final relative error < " + std::to_string(tolerance);
  r.passed = r.decreasing && !r.rows.empty() && r.rows.back().relative_error < tolerance;
  return r;
}

/// Almost-algebra: |integral f^eps g^eps - integral (fg)^eps|.
template <int Dim>
LadderReport algebra_check(const Ladder<Dim>& ladder, const FiberField<Dim>& f, const FiberField<Dim>& g) {
  LadderReport r{"algebra", f.name + " * " + g.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  const FiberField<Dim> fg{"fg", [&](const Vec<Dim>& p, const Vec<Dim>& v) { return f(p, v) * g(p, v); }, {}, {}};
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const auto q = integrate_with_estimate<Dim>(m, ladder.config().quadrature_n(eps), [&](const Vec<Dim>& x) {
      return osc.value(f, x) * osc.value(g, x) - osc.value(fg, x);
    });
    r.rows.push_back({eps, q.value, 0.0, std::abs(q.value), std::abs(q.value), q.error_estimate});
  }
  detail::finish(r, 1e-13);
  const double need = ladder.config().alpha - ladder.config().beta - 0.2;
  r.requirement = "decreasing, log-log slope >= " + std::to_string(need);
  r.passed = r.decreasing && (r.slope >= need || r.rows.back().error <= 1e-13);
  return r;
}

/// Gradient commutation: sup over a grid of |eps grad_q f^eps - (grad_v f)^eps|_g.
template <int Dim>
LadderReport gradient_commutator_check(const Ladder<Dim>& ladder, const FiberField<Dim>& f) {
  LadderReport r{"gradcomm", f.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const int n = ladder.config().quadrature_n(eps);
    const std::size_t total = GridIndex<Dim>::size(n);
    std::vector<double> worst(total);
    parallel_for(total, [&](std::size_t c) {
      const Vec<Dim> q = GridIndex<Dim>::midpoint(c, n);
      const Vec<Dim> grad_chart = m.inverse_metric(q) * osc.differential(f, q);
      const Vec<Dim> lhs = eps * m.to_frame(q, grad_chart);
      const Vec<Dim> diff = lhs - osc.vertical_gradient_value(f, q);
      worst[c] = std::sqrt(diff.dot(m.frame_gram(q) * diff));
    });
    const double e = *std::max_element(worst.begin(), worst.end());
    r.rows.push_back({eps, e, 0.0, e, e, 0.0});
  }
  detail::finish(r, 1e-13);
  const double need = (1.0 - ladder.config().alpha) - 0.2;
  r.requirement = "decreasing, log-log slope >= " + std::to_string(need);
  r.passed = r.decreasing && r.slope >= need;
  return r;
}

/// A smooth function on M with its chart differential.
template <int Dim>
struct BaseFunction {
  std::string name;
  std::function<double(const Vec<Dim>&)> value;
  std::function<Vec<Dim>(const Vec<Dim>&)> differential;
};

/// Integration-by-parts residual
///   R(eps) = -int <grad u, X^eps> - (1/eps) int u h^eps - int u div Xbar,  h = div^v X,
/// with int u div Xbar = -int du(Xbar) on the closed manifold.
template <int Dim>
LadderReport by_parts_residual(const Ladder<Dim>& ladder, const BaseFunction<Dim>& u,
                               const std::type_identity_t<VerticalField<Dim>>& x,
                               const std::string& name, double ratio = 0.5) {
  LadderReport r{"byparts", name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  const auto h = vertical_divergence_field<Dim>(x);
  // int u div Xbar, eps independent and not oscillating
  const FiberGrid<Dim> fg{16};
  const double div_term = -BaseQuadrature<Dim>{256}.integrate(m, [&](const Vec<Dim>& q) {
    Vec<Dim> avg = Vec<Dim>::Zero();
    for (std::size_t s = 0; s < fg.size(); ++s)
      for (int i = 0; i < Dim; ++i) avg[i] += x[static_cast<std::size_t>(i)](q, fg.point(s));
    avg /= static_cast<double>(fg.size());
    return u.differential(q).dot(m.from_frame(q, avg));
  });
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const auto q = integrate_with_estimate<Dim>(m, ladder.config().quadrature_n(eps), [&](const Vec<Dim>& p) {
      const Vec<Dim> xe = m.from_frame(p, osc.vector_value(x, p));
      return -u.differential(p).dot(xe) - u.value(p) * osc.value(h, p) / eps;
    });
    const double res = std::abs(q.value - div_term);
    r.rows.push_back({eps, q.value, div_term, res, res, q.error_estimate});
  }
  detail::finish(r, 1e-13);
  r.requirement = "residual at the last eps <= " + std::to_string(ratio) + " x residual at the first";
  r.passed = r.rows.size() >= 2 && r.rows.back().error <= ratio * r.rows.front().error;
  return r;
}

/// Compensated pairing int phi f^eps g^eps against int phi mean(f g).
template <int Dim>
LadderReport compensated_pairing(const Ladder<Dim>& ladder, const FiberField<Dim>& f, const FiberField<Dim>& g,
                                 const BaseFunction<Dim>& phi, double tolerance = 0.05) {
  LadderReport r{"compensated", f.name + " * " + g.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  const FiberField<Dim> target_field{"phi fg",
                                     [&](const Vec<Dim>& p, const Vec<Dim>& v) { return phi.value(p) * f(p, v) * g(p, v); }, {}, {}};
  const double target = normalized_integral(m, target_field);
  const double scale = std::max(std::abs(target), 1e-300);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const auto q = integrate_with_estimate<Dim>(m, ladder.config().quadrature_n(eps), [&](const Vec<Dim>& p) {
      return phi.value(p) * osc.value(f, p) * osc.value(g, p);
    });
    const double err = std::abs(q.value - target);
    r.rows.push_back({eps, q.value, target, err, err / scale, q.error_estimate});
  }
  detail::finish(r, 1e-12 * scale);
  r.requirement = "decreasing, final relative error < " + std::to_string(tolerance);
  r.passed = r.decreasing && !r.rows.empty() && r.rows.back().relative_error < tolerance;
  return r;
}

/// L1 gap between coordinates-mode and pullback-mode oscillating tensors.
template <int Dim>
LadderReport tensor_mode_gap(const Ladder<Dim>& ladder, const TensorField<Dim>& a) {
  LadderReport r{"tensor-modes", a.name, {}, 0.0, false, false, {}};
  const auto& m = ladder.model();
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& osc = ladder[i];
    const double eps = osc.epsilon();
    const double gap = BaseQuadrature<Dim>{ladder.config().quadrature_n(eps)}.integrate(m, [&](const Vec<Dim>& q) {
      return (osc.tensor_value(a, q, TensorMode::Coordinates, false) - osc.tensor_value(a, q, TensorMode::Pullback, false))
          .norm();
    });
    r.rows.push_back({eps, gap, 0.0, gap, gap, 0.0});
  }
  detail::finish(r, 1e-13);
  r.requirement = "decreasing";
  r.passed = r.decreasing;
  return r;
}

// ---------------------------------------------------------------------------
// Presets used by the diagnostics

/// Named fiber fields: "sin-v1", "2+cos-v1", "one", "h-sin-v1", or an expression.
template <int Dim>
FiberField<Dim> fiber_preset(const std::string& name) {
  if (name == "one") return FiberField<Dim>::constant(1.0);
  if (name == "sin-v1") {
    FiberField<Dim> f;
    f.name = name;
    f.value = [](const Vec<Dim>&, const Vec<Dim>& v) { return std::sin(kTwoPi * v[0]); };
    f.fiber_partials = [](const Vec<Dim>&, const Vec<Dim>& v) {
      Vec<Dim> g = Vec<Dim>::Zero();
      g[0] = kTwoPi * std::cos(kTwoPi * v[0]);
      return g;
    };
    f.base_partials = [](const Vec<Dim>&, const Vec<Dim>&) { return Vec<Dim>::Zero(); };
    f.depends_on_base = false;
    return f;
  }
  if (name == "2+cos-v1") {
    FiberField<Dim> f;
    f.name = name;
    f.value = [](const Vec<Dim>&, const Vec<Dim>& v) { return 2.0 + std::cos(kTwoPi * v[0]); };
    f.fiber_partials = [](const Vec<Dim>&, const Vec<Dim>& v) {
      Vec<Dim> g = Vec<Dim>::Zero();
      g[0] = -kTwoPi * std::sin(kTwoPi * v[0]);
      return g;
    };
    f.base_partials = [](const Vec<Dim>&, const Vec<Dim>&) { return Vec<Dim>::Zero(); };
    f.depends_on_base = false;
    return f;
  }
  if (name == "h-sin-v1") {
    // (1 + 0.5 sin 2 pi x1) sin 2 pi v1
    FiberField<Dim> f;
    f.name = name;
    f.value = [](const Vec<Dim>& p, const Vec<Dim>& v) { return (1.0 + 0.5 * std::sin(kTwoPi * p[0])) * std::sin(kTwoPi * v[0]); };
    f.fiber_partials = [](const Vec<Dim>& p, const Vec<Dim>& v) {
      Vec<Dim> g = Vec<Dim>::Zero();
      g[0] = (1.0 + 0.5 * std::sin(kTwoPi * p[0])) * kTwoPi * std::cos(kTwoPi * v[0]);
      return g;
    };
    f.base_partials = [](const Vec<Dim>& p, const Vec<Dim>& v) {
      Vec<Dim> g = Vec<Dim>::Zero();
      g[0] = 0.5 * kTwoPi * std::cos(kTwoPi * p[0]) * std::sin(kTwoPi * v[0]);
      return g;
    };
    return f;
  }
  return FiberField<Dim>::from_expression(name);
}

/// Smooth periodic base functions used as u and phi in the diagnostics (2D).
inline std::vector<BaseFunction<2>> base_function_presets() {
  std::vector<BaseFunction<2>> out;
  out.push_back({"sin2pix1*cos2pix2", [](const Vec<2>& x) { return std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]); },
                 [](const Vec<2>& x) {
                   return Vec<2>(kTwoPi * std::cos(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]),
                                 -kTwoPi * std::sin(kTwoPi * x[0]) * std::sin(kTwoPi * x[1]));
                 }});
  out.push_back({"1+0.5cos2pix1", [](const Vec<2>& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); },
                 [](const Vec<2>& x) { return Vec<2>(-0.5 * kTwoPi * std::sin(kTwoPi * x[0]), 0.0); }});
  out.push_back({"sin2pi(x1+x2)", [](const Vec<2>& x) { return std::sin(kTwoPi * (x[0] + x[1])); },
                 [](const Vec<2>& x) {
                   const double c = kTwoPi * std::cos(kTwoPi * (x[0] + x[1]));
                   return Vec<2>(c, c);
                 }});
  return out;
}

/// The three (u, X) pairs of the by-parts diagnostic (2D): X constant in v,
/// X divergence-free in v, and a general X.
struct ByPartsCase {
  std::string name;
  BaseFunction<2> u;
  VerticalField<2> x;
};

inline std::vector<ByPartsCase> by_parts_presets() {
  auto field = [](std::string name, std::function<double(const Vec<2>&, const Vec<2>&)> f,
                  std::function<Vec<2>(const Vec<2>&, const Vec<2>&)> dv, bool base, bool fiber) {
    FiberField<2> out;
    out.name = std::move(name);
    out.value = std::move(f);
    out.fiber_partials = std::move(dv);
    out.depends_on_base = base;
    out.depends_on_fiber = fiber;
    return out;
  };
  const auto bases = base_function_presets();
  std::vector<ByPartsCase> out;
  // X = Y^up with Y = (0.5 + sin 2 pi x2, cos 2 pi x1)
  out.push_back({"constant-in-v",
                 bases[0],
                 {field("0.5+sin2pix2", [](const Vec<2>& p, const Vec<2>&) { return 0.5 + std::sin(kTwoPi * p[1]); },
                        [](const Vec<2>&, const Vec<2>&) { return Vec<2>::Zero(); }, true, false),
                  field("cos2pix1", [](const Vec<2>& p, const Vec<2>&) { return std::cos(kTwoPi * p[0]); },
                        [](const Vec<2>&, const Vec<2>&) { return Vec<2>::Zero(); }, true, false)}});
  // X = a(p) (d psi/dv2, -d psi/dv1), psi = cos 2 pi v1 cos 2 pi v2, a = 1 + 0.5 cos 2 pi x2
  out.push_back({"divergence-free",
                 bases[2],
                 {field("curl-x1",
                        [](const Vec<2>& p, const Vec<2>& v) {
                          return -(1.0 + 0.5 * std::cos(kTwoPi * p[1])) * kTwoPi * std::cos(kTwoPi * v[0]) * std::sin(kTwoPi * v[1]);
                        },
                        [](const Vec<2>& p, const Vec<2>& v) {
                          const double a = (1.0 + 0.5 * std::cos(kTwoPi * p[1])) * kTwoPi * kTwoPi;
                          return Vec<2>(a * std::sin(kTwoPi * v[0]) * std::sin(kTwoPi * v[1]),
                                        -a * std::cos(kTwoPi * v[0]) * std::cos(kTwoPi * v[1]));
                        },
                        true, true),
                  field("curl-x2",
                        [](const Vec<2>& p, const Vec<2>& v) {
                          return (1.0 + 0.5 * std::cos(kTwoPi * p[1])) * kTwoPi * std::sin(kTwoPi * v[0]) * std::cos(kTwoPi * v[1]);
                        },
                        [](const Vec<2>& p, const Vec<2>& v) {
                          const double a = (1.0 + 0.5 * std::cos(kTwoPi * p[1])) * kTwoPi * kTwoPi;
                          return Vec<2>(a * std::cos(kTwoPi * v[0]) * std::cos(kTwoPi * v[1]),
                                        -a * std::sin(kTwoPi * v[0]) * std::sin(kTwoPi * v[1]));
                        },
                        true, true)}});
  // X = (cos 2 pi v1 + sin 2 pi x2, (1 + 0.5 cos 2 pi x1) sin 2 pi v2)
  out.push_back({"general",
                 bases[1],
                 {field("cos2piv1+sin2pix2", [](const Vec<2>& p, const Vec<2>& v) { return std::cos(kTwoPi * v[0]) + std::sin(kTwoPi * p[1]); },
                        [](const Vec<2>&, const Vec<2>& v) { return Vec<2>(-kTwoPi * std::sin(kTwoPi * v[0]), 0.0); }, true, true),
                  field("(1+0.5cos2pix1)sin2piv2",
                        [](const Vec<2>& p, const Vec<2>& v) { return (1.0 + 0.5 * std::cos(kTwoPi * p[0])) * std::sin(kTwoPi * v[1]); },
                        [](const Vec<2>& p, const Vec<2>& v) {
                          return Vec<2>(0.0, (1.0 + 0.5 * std::cos(kTwoPi * p[0])) * kTwoPi * std::cos(kTwoPi * v[1]));
                        },
                        true, true)}});
  return out;
}

}  // namespace homog
