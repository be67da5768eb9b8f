#pragma once

// Refined partition of unity subordinate to a Voronoi decomposition:
//   phi_ik = H_delta(d(p_k, q) - d(p_i, q)),  phi_i = prod_{k in I(i)} phi_ik,
//   psi_i  = phi_i / sum_k phi_k,             delta = eps^alpha,
// on a maximal eps^beta-separated net.

#include "homog/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace homog {

enum class StepProfile { Quintic, Mollified };

inline const char* to_string(StepProfile p) { return p == StepProfile::Quintic ? "quintic" : "mollified"; }

inline StepProfile step_profile_from_string(const std::string& s) {
  if (s == "quintic") return StepProfile::Quintic;
  if (s == "mollified") return StepProfile::Mollified;
  throw Error(ErrorKind::InvalidConfig, "unknown step profile '" + s + "'");
}

/// H_delta(t): 0 for t <= -delta, 1 for t >= delta, increasing in between.
/// Quintic: S(u) = 6u^5 - 15u^4 + 10u^3 (C^2, sup H' = 15/(16 delta)).
/// Mollified: S(u) = f(u) / (f(u) + f(1-u)), f(u) = exp(-1/u) (C^inf, sup H' = 1/delta).
struct SmoothStep {
  double delta = 1.0;
  StepProfile profile = StepProfile::Quintic;

  double operator()(double t) const {
    const double u = (t + delta) / (2.0 * delta);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (profile == StepProfile::Quintic) return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
  }

  double derivative(double t) const {
    const double u = (t + delta) / (2.0 * delta);
    if (u <= 0.0 || u >= 1.0) return 0.0;
    if (profile == StepProfile::Quintic) {
      const double w = u * (1.0 - u);
      return 30.0 * w * w / (2.0 * delta);
    }
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    const double da = a / (u * u), db = b / ((1.0 - u) * (1.0 - u));
    return (da * b + a * db) / ((a + b) * (a + b)) / (2.0 * delta);
  }

  double max_derivative() const { return profile == StepProfile::Quintic ? 15.0 / (16.0 * delta) : 1.0 / delta; }
};

/// Throws ExponentOrderViolated unless 1/2 < beta < alpha < 1.
inline void check_exponents(double alpha, double beta) {
  if (!(0.5 < beta && beta < alpha && alpha < 1.0))
    throw Error(ErrorKind::ExponentOrderViolated, "need 1/2 < beta < alpha < 1, got alpha=" + std::to_string(alpha) +
                                                      ", beta=" + std::to_string(beta));
}

struct PartitionOptions {
  StepProfile profile = StepProfile::Quintic;
  /// Relative mismatch allowed between the net separation and eps^beta.
  double separation_tolerance = 1e-9;
  /// PartitionGap below this value of sum_k phi_k. The nearest site contributes
  /// at least 2^-m with m the number of sites within delta of the nearest
  /// distance; at a three-cell vertex the sum is 3/4, near four-cell vertices
  /// it dips just below 1/2.
  double min_denominator = 0.125;
};

/// Nonzero partition functions at one point.
template <int Dim>
struct PartitionSample {
  Vec<Dim> point;
  std::vector<int> sites;               // sorted site indices with psi > 0
  std::vector<double> values;           // psi_j(q)
  std::vector<Vec<Dim>> differentials;  // d psi_j (coordinate covector)
  std::vector<Vec<Dim>> logs;           // log_q(p_j)
  std::vector<double> distances;        // d(q, p_j)
  std::vector<int> nearby;              // every site within reach, any value
  std::vector<double> nearby_distances;
  double denominator = 1.0;             // sum_k phi_k(q)
  int nearest = -1;
  double nearest_distance = 0.0;
};

template <int Dim>
class PartitionOfUnity {
 public:
  PartitionOfUnity(const VoronoiDecomposition<Dim>& decomposition, double alpha, double beta, double epsilon,
                   PartitionOptions options = {})
      : model_(std::make_shared<const ManifoldModel<Dim>>(decomposition.model())),
        net_(std::make_shared<const Net<Dim>>(decomposition.net())),
        locator_(model_, net_),
        alpha_(alpha),
        beta_(beta),
        epsilon_(epsilon),
        step_{std::pow(epsilon, alpha), options.profile},
        min_denominator_(options.min_denominator) {
    check_exponents(alpha, beta);
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorKind::InvalidConfig, "epsilon must lie in (0,1)");
    const double s = std::pow(epsilon, beta);
    if (std::abs(net_->separation - s) > options.separation_tolerance * s)
      throw Error(ErrorKind::InvalidConfig, "net separation " + std::to_string(net_->separation) +
                                                " differs from eps^beta = " + std::to_string(s));
    covering_ = std::max(decomposition.covering_radius(), s);
    reach_ = covering_ + 2.0 * step_.delta;
    build_index_sets(decomposition);
  }

  const ManifoldModel<Dim>& model() const { return *model_; }
  const Net<Dim>& net() const { return *net_; }
  std::size_t size() const { return net_->size(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }
  double delta() const { return step_.delta; }
  double separation() const { return net_->separation; }
  const SmoothStep& step() const { return step_; }
  /// I(i): adjacent cells plus every site within 2 rho + 3 delta (rho = covering radius).
  /// Wherever phi_i can be nonzero (d_i < d_min + delta) every k with d_k - d_i < delta
  /// lies within that radius, so phi_i equals the product over all k != i.
  const std::vector<std::vector<int>>& index_sets() const { return index_sets_; }

  PartitionSample<Dim> evaluate_all(const Vec<Dim>& x) const {
    PartitionSample<Dim> out;
    const Vec<Dim> q = wrap01(x);
    out.point = q;
    Scratch& w = evaluate_core(q, true);
    out.nearby.assign(w.ids.begin(), w.ids.end());
    out.nearby_distances.assign(w.dist.begin(), w.dist.end());
    out.nearest = w.ids[w.imin];
    out.nearest_distance = w.dist[w.imin];
    out.denominator = w.denom;
    for (std::size_t r : w.order) {
      const std::size_t a = w.active[r];
      const double psi = w.phi[r] / w.denom;
      out.sites.push_back(w.ids[a]);
      out.values.push_back(psi);
      out.differentials.push_back((w.dphi[r] - psi * w.ddenom) / w.denom);
      out.logs.push_back(w.logs[a]);
      out.distances.push_back(w.dist[a]);
    }
    return out;
  }

  /// Calls fn(site, psi_j(q), log_q(p_j)) for every site with psi_j(q) > 0, in
  /// increasing site order; the value-only path used by oscillating evaluations.
  template <class Fn>
  void for_each_value(const Vec<Dim>& x, Fn&& fn) const {
    const Scratch& w = evaluate_core(wrap01(x), false);
    for (std::size_t r : w.order) {
      const std::size_t a = w.active[r];
      fn(w.ids[a], w.phi[r] / w.denom, w.logs[a]);
    }
  }

  double evaluate(int j, const Vec<Dim>& q) const {
    const auto s = evaluate_all(q);
    for (std::size_t r = 0; r < s.sites.size(); ++r)
      if (s.sites[r] == j) return s.values[r];
    return 0.0;
  }

  /// Coordinate partial derivatives of psi_j.
  Vec<Dim> differential(int j, const Vec<Dim>& q) const {
    const auto s = evaluate_all(q);
    for (std::size_t r = 0; r < s.sites.size(); ++r)
      if (s.sites[r] == j) return s.differentials[r];
    return Vec<Dim>::Zero();
  }

  /// Metric gradient (tangent vector) of psi_j.
  Vec<Dim> gradient(int j, const Vec<Dim>& q) const {
    return model_->inverse_metric(wrap01(q)) * differential(j, q);
  }

  double gradient_norm(const Vec<Dim>& q, const Vec<Dim>& differential) const {
    return std::sqrt(differential.dot(model_->inverse_metric(q) * differential));
  }

  bool euclidean() const { return locator_.euclidean(); }

 private:
  struct Scratch {
    std::vector<int> ids;
    std::vector<Vec<Dim>> logs;
    std::vector<double> dist;
    std::vector<double> phi;
    std::vector<Vec<Dim>> dphi;
    std::vector<std::size_t> active, order;
    std::size_t imin = 0;
    double denom = 0.0;
    Vec<Dim> ddenom = Vec<Dim>::Zero();
  };

  static Scratch& scratch() {
    thread_local Scratch s;
    return s;
  }

  /// phi_j (and, with gradients, d phi_j) for the sites near q, in thread-local
  /// scratch; q must already be wrapped.
  Scratch& evaluate_core(const Vec<Dim>& q, bool gradients) const {
    Scratch& w = scratch();
    collect_sites(q, w.ids, w.logs, w.dist);
    const auto& ids = w.ids;
    const auto& logs = w.logs;
    const auto& dist = w.dist;
    const std::size_t m = ids.size();
    if (m == 0) throw Error(ErrorKind::PartitionGap, "no net point within reach of the query point");
    std::size_t imin = 0;
    for (std::size_t a = 1; a < m; ++a)
      if (dist[a] < dist[imin] || (dist[a] == dist[imin] && ids[a] < ids[imin])) imin = a;
    w.imin = imin;
    const double dmin = dist[imin], delta = step_.delta;

    const Mat<Dim> g = (!gradients || euclidean()) ? Mat<Dim>::Identity() : model_->metric(q);
    auto dd = [&](std::size_t a) -> Vec<Dim> {
      if (dist[a] <= 0.0) return Vec<Dim>::Zero();
      return -(g * logs[a]) / dist[a];
    };

    w.phi.clear();
    w.dphi.clear();
    w.active.clear();
    for (std::size_t a = 0; a < m; ++a) {
      if (!(dist[a] < dmin + delta)) continue;
      const auto& set = index_sets_[static_cast<std::size_t>(ids[a])];
      // Factors below one: k in I(j) with d_k - d_j < delta (all such k were collected).
      double hs[64];
      double hp[64];
      std::size_t ks[64];
      std::size_t nf = 0;
      bool zero = false;
      for (std::size_t b = 0; b < m && !zero; ++b) {
        if (b == a) continue;
        const double t = dist[b] - dist[a];
        if (t >= delta) continue;
        if (!std::binary_search(set.begin(), set.end(), ids[b])) continue;
        const double h = step_(t);
        if (h == 0.0) zero = true;
        if (nf == 64) throw Error(ErrorKind::PartitionGap, "too many overlapping transition factors");
        hs[nf] = h;
        hp[nf] = gradients ? step_.derivative(t) : 0.0;
        ks[nf] = b;
        ++nf;
      }
      if (zero) continue;  // H' vanishes where H does, so the gradient is zero too
      double value = 1.0;
      for (std::size_t f = 0; f < nf; ++f) value *= hs[f];
      Vec<Dim> grad = Vec<Dim>::Zero();
      if (gradients && nf > 0) {
        const Vec<Dim> dj = dd(a);
        for (std::size_t f = 0; f < nf; ++f) {
          if (hp[f] == 0.0) continue;
          double rest = 1.0;
          for (std::size_t l = 0; l < nf; ++l)
            if (l != f) rest *= hs[l];
          grad += hp[f] * rest * (dd(ks[f]) - dj);
        }
      }
      w.active.push_back(a);
      w.phi.push_back(value);
      w.dphi.push_back(grad);
    }
    w.order.resize(w.active.size());
    for (std::size_t r = 0; r < w.order.size(); ++r) w.order[r] = r;
    std::sort(w.order.begin(), w.order.end(), [&](std::size_t u, std::size_t v) { return ids[w.active[u]] < ids[w.active[v]]; });

    w.denom = 0.0;
    w.ddenom = Vec<Dim>::Zero();
    for (std::size_t r : w.order) {
      w.denom += w.phi[r];
      w.ddenom += w.dphi[r];
    }
    if (w.denom < min_denominator_)
      throw Error(ErrorKind::PartitionGap, "sum of phi_k fell to " + std::to_string(w.denom));
    return w;
  }

  /// Every site that can enter a factor below one at q (all sites within
  /// reach_ on Euclidean charts), once, with log_q(p) and d(q, p).
  void collect_sites(const Vec<Dim>& q, std::vector<int>& ids, std::vector<Vec<Dim>>& logs,
                     std::vector<double>& dist) const {
    ids.clear();
    logs.clear();
    dist.clear();
    const double radius = reach_ / std::sqrt(model_->lambda_min()) + 1e-12;
    locator_.index().for_each_within(q, radius, [&](int j, const Vec<Dim>& delta) {
      if (euclidean()) {
        const double d = delta.norm();
        if (d > reach_) return;
        for (std::size_t a = 0; a < ids.size(); ++a)
          if (ids[a] == j) {
            if (d < dist[a]) {
              dist[a] = d;
              logs[a] = delta;
            }
            return;
          }
        ids.push_back(j);
        logs.push_back(delta);
        dist.push_back(d);
        return;
      }
      if (std::find(ids.begin(), ids.end(), j) != ids.end()) return;
      ids.push_back(j);
      logs.push_back(Vec<Dim>::Zero());
      dist.push_back(model_->approximate_distance(q, net_->points[static_cast<std::size_t>(j)]));
    });
    if (euclidean() || ids.empty()) return;
    // Exact distances in order of the midpoint-metric estimate, which stays
    // within a few percent of d at these lengths; d >= 0.8 * estimate is used
    // as the (conservative) stopping bound.
    std::vector<std::size_t> order(ids.size());
    for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    std::vector<int> kept_ids;
    std::vector<Vec<Dim>> kept_logs;
    std::vector<double> kept_dist;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t a : order) {
      const double bound = std::min(reach_, dmin + 2.0 * step_.delta);
      if (0.8 * dist[a] > bound) break;
      Vec<Dim> v;
      try {
        v = model_->log_map(q, net_->points[static_cast<std::size_t>(ids[a])]);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::RadiusExceeded) continue;
        throw;
      }
      const double d = model_->norm(q, v);
      if (d > reach_) continue;
      dmin = std::min(dmin, d);
      kept_ids.push_back(ids[a]);
      kept_logs.push_back(v);
      kept_dist.push_back(d);
    }
    // Sites beyond d_min + 2 delta never enter a factor below one.
    ids.clear();
    logs.clear();
    dist.clear();
    for (std::size_t a = 0; a < kept_ids.size(); ++a) {
      if (kept_dist[a] > dmin + 2.0 * step_.delta) continue;
      ids.push_back(kept_ids[a]);
      logs.push_back(kept_logs[a]);
      dist.push_back(kept_dist[a]);
    }
  }

  void build_index_sets(const VoronoiDecomposition<Dim>& decomposition) {
    const std::size_t n = net_->size();
    index_sets_.assign(n, {});
    const double radius = 2.0 * covering_ + 3.0 * step_.delta;
    parallel_for(n, [&](std::size_t i) {
      auto& set = index_sets_[i];
      set = decomposition.neighbors()[i];
      locator_.index().for_each_within(net_->points[i], radius / std::sqrt(model_->lambda_min()) + 1e-12,
                                       [&](int k, const Vec<Dim>&) {
                                         if (k == static_cast<int>(i)) return;
                                         double d = 0.0;
                                         try {
                                           d = locator_.distance(k, net_->points[i]);
                                         } catch (const Error& e) {
                                           if (e.kind() == ErrorKind::RadiusExceeded) return;
                                           throw;
                                         }
                                         if (d <= radius) set.push_back(k);
                                       });
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
    });
  }

  std::shared_ptr<const ManifoldModel<Dim>> model_;
  std::shared_ptr<const Net<Dim>> net_;
  NetLocator<Dim> locator_;
  double alpha_, beta_, epsilon_;
  SmoothStep step_;
  double min_denominator_;
  double covering_ = 0.0, reach_ = 0.0;
  std::vector<std::vector<int>> index_sets_;
};

/// Grid measurements of the partition (cell midpoints, sqrt(det g) weights).
struct PartitionDiagnostics {
  int grid_n = 0;
  double epsilon = 0.0, alpha = 0.0, beta = 0.0, delta = 0.0, separation = 0.0;
  std::size_t sites = 0;
  double max_sum_error = 0.0;          // max |sum_j psi_j - 1|
  double min_denominator = 0.0;        // min sum_k phi_k
  double max_gradient = 0.0;           // sup_j sup_q |grad psi_j|_g
  double scaled_gradient = 0.0;        // max_gradient * eps^alpha
  double gradient_support_union = 0.0; // vol(U_j supp grad psi_j)
  double gradient_support_sum = 0.0;   // sum_j vol{grad psi_j != 0}
  double gradient_support_max = 0.0;   // max_j vol{grad psi_j != 0}
  int max_transition_count = 0;        // max_q #{j : psi_j(q) not in {0,1}}
  double max_support_distance = 0.0;   // max d(q, p_j) over psi_j(q) > 0
  std::size_t locality_violations = 0; // psi_j(q) > 0 with d(q, p_j) > eps^beta + 2 eps^alpha
  std::size_t product_violations = 0;  // psi_j psi_l != 0 (j != l) where grad psi_j = 0
  std::size_t square_violations = 0;   // psi_j - psi_j^2 != 0 where grad psi_j = 0
  std::size_t inner_violations = 0;    // psi_j != 1 on D_j^-
};

/// grid_n = 0 picks a spacing of at most delta / 8 in the metric.
template <int Dim>
PartitionDiagnostics partition_diagnostics(const PartitionOfUnity<Dim>& pu, int grid_n = 0) {
  const auto& model = pu.model();
  PartitionDiagnostics r;
  r.epsilon = pu.epsilon();
  r.alpha = pu.alpha();
  r.beta = pu.beta();
  r.delta = pu.delta();
  r.separation = pu.separation();
  r.sites = pu.size();
  r.grid_n = grid_n > 0 ? grid_n : static_cast<int>(std::ceil(8.0 * std::sqrt(model.lambda_max()) / pu.delta()));
  const std::size_t total = GridIndex<Dim>::size(r.grid_n);
  const double cell = 1.0 / static_cast<double>(total);
  const double locality = pu.separation() + 2.0 * pu.delta();

  struct Local {
    double sum_err = 0.0, min_den = 1e300, max_grad = 0.0, union_vol = 0.0, max_dist = 0.0;
    int max_trans = 0;
    std::size_t loc = 0, prod = 0, sq = 0, inner = 0;
    std::vector<std::pair<int, double>> cell_vol;
  };
  const int workers = std::max(1, std::min<int>(thread_count(), static_cast<int>(total)));
  std::vector<Local> locals(static_cast<std::size_t>(workers));
  const std::size_t chunk = (total + workers - 1) / workers;
  parallel_for(static_cast<std::size_t>(workers), [&](std::size_t w) {
    Local& L = locals[w];
    const std::size_t lo = w * chunk, hi = std::min(total, lo + chunk);
    for (std::size_t c = lo; c < hi; ++c) {
      const Vec<Dim> q = GridIndex<Dim>::midpoint(c, r.grid_n);
      const auto s = pu.evaluate_all(q);
      const double weight = cell * model.volume_density(q);
      const Mat<Dim> ginv = model.inverse_metric(q);
      double sum = 0.0;
      int trans = 0, nonzero_grad = 0;
      std::vector<bool> has_grad(s.sites.size());
      for (std::size_t a = 0; a < s.sites.size(); ++a) {
        const double psi = s.values[a];
        sum += psi;
        const double gn = std::sqrt(s.differentials[a].dot(ginv * s.differentials[a]));
        has_grad[a] = gn > 0.0;
        L.max_grad = std::max(L.max_grad, gn);
        if (psi != 0.0 && psi != 1.0) ++trans;
        if (has_grad[a]) {
          ++nonzero_grad;
          L.cell_vol.emplace_back(s.sites[a], weight);
        } else if (psi != psi * psi) {
          ++L.sq;
        }
        if (psi > 0.0) {
          L.max_dist = std::max(L.max_dist, s.distances[a]);
          if (s.distances[a] > locality * (1.0 + 1e-12)) ++L.loc;
        }
      }
      for (std::size_t a = 0; a < s.sites.size(); ++a)
        if (!has_grad[a] && s.sites.size() > 1) ++L.prod;  // psi_a * psi_other != 0 with grad psi_a = 0
      if (nonzero_grad > 0) L.union_vol += weight;
      L.sum_err = std::max(L.sum_err, std::abs(sum - 1.0));
      L.min_den = std::min(L.min_den, s.denominator);
      L.max_trans = std::max(L.max_trans, trans);
      // D_j^- for the nearest site: d_j <= d_k - delta for every k in I(j).
      const auto& set = pu.index_sets()[static_cast<std::size_t>(s.nearest)];
      bool inside = true;
      for (int k : set) {
        const double dk = [&] {
          for (std::size_t a = 0; a < s.nearby.size(); ++a)
            if (s.nearby[a] == k) return s.nearby_distances[a];
          return std::numeric_limits<double>::infinity();  // beyond reach, hence beyond d_j + delta
        }();
        if (dk < s.nearest_distance + pu.delta()) {
          inside = false;
          break;
        }
      }
      if (inside) {
        double v = 0.0;
        for (std::size_t a = 0; a < s.sites.size(); ++a)
          if (s.sites[a] == s.nearest) v = s.values[a];
        if (v != 1.0) ++L.inner;
      }
    }
  });
  std::vector<double> per_site(pu.size(), 0.0);
  r.min_denominator = 1e300;
  for (const auto& L : locals) {
    r.max_sum_error = std::max(r.max_sum_error, L.sum_err);
    r.min_denominator = std::min(r.min_denominator, L.min_den);
    r.max_gradient = std::max(r.max_gradient, L.max_grad);
    r.gradient_support_union += L.union_vol;
    r.max_transition_count = std::max(r.max_transition_count, L.max_trans);
    r.max_support_distance = std::max(r.max_support_distance, L.max_dist);
    r.locality_violations += L.loc;
    r.product_violations += L.prod;
    r.square_violations += L.sq;
    r.inner_violations += L.inner;
    for (const auto& [j, v] : L.cell_vol) per_site[static_cast<std::size_t>(j)] += v;
  }
  for (double v : per_site) {
    r.gradient_support_sum += v;
    r.gradient_support_max = std::max(r.gradient_support_max, v);
  }
  r.scaled_gradient = r.max_gradient * std::pow(pu.epsilon(), pu.alpha());
  return r;
}

}  // namespace homog
