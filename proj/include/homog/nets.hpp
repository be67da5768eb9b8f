#pragma once

// Maximal separated nets on the chart torus, their Voronoi decomposition on a
// sample grid, adjacency, and the geometric diagnostics of the net: finite
// overlap, angles between adjacent directions and boundary tube volumes.

#include "homog/core.hpp"
#include "homog/geometry.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace homog {

template <int Dim>
struct Net {
  std::vector<Vec<Dim>> points;
  double separation = 0.0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double beta = 0.0;
  bool lattice_aligned = false;

  std::size_t size() const { return points.size(); }
};

enum class InsertionOrder { Farthest, Random };

struct NetOptions {
  /// Farthest-point insertion, or a seeded random candidate order (random
  /// sequential insertion), which gives irregular maximal nets.
  InsertionOrder order = InsertionOrder::Farthest;
  /// Candidate grid spacing is separation / density (in the metric); 0 picks
  /// 8 on flat models and 4 otherwise.
  double candidate_density = 0.0;
  /// Restrict candidates to the lattice epsilon * Z^n (flat models with the
  /// identity frame only), so that exp^{-1}_{p_j}(q)/epsilon = q/epsilon mod 1.
  bool lattice_aligned = false;
  double epsilon = 0.0;
  double beta = 0.0;
  /// Insert uncovered Voronoi vertices after the grid pass (flat, 2D), which
  /// makes the covering radius bound exact rather than grid-limited.
  bool refine_vertices = true;
};

/// Uniform bucket grid over [0,1)^Dim for periodic range queries.
template <int Dim>
class NetIndex {
 public:
  NetIndex() = default;

  NetIndex(const std::vector<Vec<Dim>>& points, double cell) { reset(cell, points.size()); for (const auto& p : points) insert(p); }

  void reset(double cell, std::size_t reserve = 0) {
    buckets_per_dim_ = std::clamp(static_cast<int>(std::floor(1.0 / std::max(cell, 1e-6))), 1, Dim == 2 ? 1024 : 128);
    buckets_.assign(GridIndex<Dim>::size(buckets_per_dim_), {});
    points_.clear();
    points_.reserve(reserve);
  }

  int insert(const Vec<Dim>& p) {
    const int id = static_cast<int>(points_.size());
    points_.push_back(wrap01(p));
    buckets_[bucket_of(points_.back())].push_back(id);
    return id;
  }

  std::size_t size() const { return points_.size(); }
  const Vec<Dim>& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  /// Calls f(j, delta) for every periodic image p_j + z (z in Z^n) with
  /// |p_j + z - q| <= radius in chart coordinates; delta = p_j + z - q.
  template <class F>
  void for_each_within(const Vec<Dim>& q, double radius, F&& f) const {
    const int nb = buckets_per_dim_;
    const double cell = 1.0 / nb;
    std::array<int, Dim> lo, hi;
    for (int d = 0; d < Dim; ++d) {
      lo[d] = static_cast<int>(std::floor((q[d] - radius) / cell));
      hi[d] = static_cast<int>(std::floor((q[d] + radius) / cell));
    }
    std::array<int, Dim> b = lo;
    const double r2 = radius * radius;
    for (;;) {
      std::array<int, Dim> wrapped;
      Vec<Dim> shift;
      for (int d = 0; d < Dim; ++d) {
        const int m = ((b[d] % nb) + nb) % nb;
        wrapped[d] = m;
        shift[d] = static_cast<double>((b[d] - m) / nb);
      }
      for (int id : buckets_[GridIndex<Dim>::flatten(wrapped, nb)]) {
        const Vec<Dim> delta = points_[static_cast<std::size_t>(id)] + shift - q;
        if (delta.squaredNorm() <= r2) f(id, delta);
      }
      int d = Dim - 1;
      while (d >= 0 && b[d] == hi[d]) {
        b[d] = lo[d];
        --d;
      }
      if (d < 0) break;
      ++b[d];
    }
  }

 private:
  std::size_t bucket_of(const Vec<Dim>& p) const {
    std::array<int, Dim> idx;
    for (int d = 0; d < Dim; ++d) idx[d] = std::min(static_cast<int>(p[d] * buckets_per_dim_), buckets_per_dim_ - 1);
    return GridIndex<Dim>::flatten(idx, buckets_per_dim_);
  }

  int buckets_per_dim_ = 1;
  std::vector<std::vector<int>> buckets_;
  std::vector<Vec<Dim>> points_;
};

namespace detail {

inline bool is_identity(const Mat<2>& m) { return (m - Mat<2>::Identity()).norm() == 0.0; }
inline bool is_identity(const Mat<3>& m) { return (m - Mat<3>::Identity()).norm() == 0.0; }

/// Distance that short-circuits the identity-metric case.
template <int Dim>
double site_distance(const ManifoldModel<Dim>& model, bool euclidean, const Vec<Dim>& q, const Vec<Dim>& p) {
  if (euclidean) return nearest_rep<Dim>(p - q).norm();
  return model.distance(q, p);
}

}  // namespace detail

/// Nearest-site queries against a fixed net.
template <int Dim>
class NetLocator {
 public:
  NetLocator(std::shared_ptr<const ManifoldModel<Dim>> model, std::shared_ptr<const Net<Dim>> net)
      : model_(std::move(model)),
        net_(std::move(net)),
        euclidean_(model_->is_flat() && detail::is_identity(model_->metric(Vec<Dim>::Zero()))),
        index_(net_->points, std::max(net_->separation, 1e-3) / std::sqrt(model_->lambda_min())) {}

  NetLocator(const ManifoldModel<Dim>& model, const Net<Dim>& net)
      : NetLocator(std::make_shared<const ManifoldModel<Dim>>(model), std::make_shared<const Net<Dim>>(net)) {}

  const NetIndex<Dim>& index() const { return index_; }
  bool euclidean() const { return euclidean_; }

  double distance(int j, const Vec<Dim>& q) const {
    return detail::site_distance(*model_, euclidean_, q, net_->points[static_cast<std::size_t>(j)]);
  }

  /// (index, distance) of the nearest site; ties go to the lowest index.
  std::pair<int, double> nearest(const Vec<Dim>& q) const {
    if (net_->points.empty()) throw Error(ErrorKind::InvalidConfig, "empty net");
    const double slack = std::sqrt(model_->lambda_min());
    double radius = std::max(net_->separation, 1e-3) / slack;
    for (;;) {
      // Approximate distances select the contenders; exact ones decide.
      std::vector<std::pair<double, int>> cand;
      double best_approx = std::numeric_limits<double>::infinity();
      index_.for_each_within(q, radius, [&](int j, const Vec<Dim>& delta) {
        const double a = euclidean_ ? delta.norm() : model_->approximate_distance(q, wrap01(Vec<Dim>(q + delta)));
        cand.emplace_back(a, j);
        best_approx = std::min(best_approx, a);
      });
      if (!cand.empty()) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        const double margin = euclidean_ || model_->is_flat() ? 0.0 : 0.05 * best_approx + 1e-12;
        std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.second != b.second ? a.second < b.second : a.first < b.first; });
        cand.erase(std::unique(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.second == b.second; }),
                   cand.end());
        for (const auto& [a, j] : cand) {
          if (a > best_approx + margin) continue;
          const double d = distance(j, q);
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        if (best_d <= slack * radius || radius > 1.0) return {best, best_d};
      }
      radius *= 2.0;
    }
  }

 private:
  std::shared_ptr<const ManifoldModel<Dim>> model_;
  std::shared_ptr<const Net<Dim>> net_;
  bool euclidean_;
  NetIndex<Dim> index_;
};

namespace detail {

/// Point equidistant (in the constant metric g) from 0 and the columns of
/// `rel`, relative to the first site. False for degenerate configurations.
template <int Dim>
bool circumcentre(const Mat<Dim>& g, const Mat<Dim>& rel, Vec<Dim>& out) {
  Mat<Dim> lhs;
  Vec<Dim> rhs;
  for (int k = 0; k < Dim; ++k) {
    lhs.row(k) = 2.0 * (g * rel.col(k)).transpose();
    rhs[k] = rel.col(k).dot(g * rel.col(k));
  }
  const double det = lhs.determinant();
  if (std::abs(det) < 1e-12 * std::pow(lhs.norm(), Dim)) return false;
  out = lhs.partialPivLu().solve(rhs);
  return true;
}

/// Newton refinement of a geodesic circumcentre: d(x, p_k) = d(x, p_0).
template <int Dim>
bool geodesic_circumcentre(const ManifoldModel<Dim>& model, const std::array<Vec<Dim>, Dim + 1>& sites, Vec<Dim>& x) {
  for (int it = 0; it < 20; ++it) {
    std::array<double, Dim + 1> d;
    std::array<Vec<Dim>, Dim + 1> cov;
    const Mat<Dim> g = model.metric(x);
    try {
      for (int k = 0; k <= Dim; ++k) {
        const Vec<Dim> v = model.log_map(wrap01(x), wrap01(sites[k]));
        d[k] = std::sqrt(v.dot(g * v));
        cov[k] = -(g * v) / d[k];
      }
    } catch (const Error&) {
      return false;
    }
    Mat<Dim> jac;
    Vec<Dim> r;
    for (int k = 0; k < Dim; ++k) {
      r[k] = d[k + 1] - d[0];
      jac.row(k) = (cov[k + 1] - cov[0]).transpose();
    }
    if (r.template lpNorm<Eigen::Infinity>() < 1e-13) return true;
    const Vec<Dim> step = jac.partialPivLu().solve(r);
    if (!step.allFinite()) return false;
    x -= step;
  }
  return false;
}

}  // namespace detail

/// Voronoi vertices as (radius, position): points equidistant from Dim + 1
/// sites with no closer site. Flat models use closed-form circumcentres;
/// curved 2D models refine chart circumcentres by Newton on the geodesic
/// distances. rho_bound must dominate the covering radius.
template <int Dim>
std::vector<std::pair<double, Vec<Dim>>> voronoi_vertices(const ManifoldModel<Dim>& model, const Net<Dim>& net,
                                                          double rho_bound) {
  const bool curved = !model.is_flat();
  if (curved && Dim != 2) throw Error(ErrorKind::InvalidConfig, "geodesic Voronoi vertices are implemented in 2D");
  const NetLocator<Dim> locator(model, net);
  const double lmin = std::sqrt(model.lambda_min());
  const auto& points = net.points;
  std::vector<std::vector<std::pair<double, Vec<Dim>>>> per_site(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    std::vector<std::pair<int, Vec<Dim>>> nbr;
    locator.index().for_each_within(points[i], 2.0 * rho_bound / lmin * (curved ? 1.1 : 1.0),
                                    [&](int j, const Vec<Dim>& delta) {
                                      if (delta.squaredNorm() > 0.0 && j >= static_cast<int>(i)) nbr.emplace_back(j, delta);
                                    });
    const Mat<Dim> g = model.metric(points[i]);
    const std::size_t m = nbr.size();
    std::array<std::size_t, Dim> pick{};
    for (int k = 0; k < Dim; ++k) pick[k] = static_cast<std::size_t>(k);
    if (m < static_cast<std::size_t>(Dim)) return;
    for (;;) {
      Mat<Dim> rel;
      for (int k = 0; k < Dim; ++k) rel.col(k) = nbr[pick[k]].second;
      Vec<Dim> c;
      if (detail::circumcentre<Dim>(g, rel, c)) {
        double r = std::sqrt(c.dot(g * c));
        bool ok = r <= rho_bound * (curved ? 1.1 : 1.0);
        Vec<Dim> x = points[i] + c;
        if (ok && curved) {
          if constexpr (Dim == 2) {
            std::array<Vec<Dim>, Dim + 1> sites{points[i], points[i] + rel.col(0), points[i] + rel.col(1)};
            ok = detail::geodesic_circumcentre<Dim>(model, sites, x);
            if (ok) r = model.distance(wrap01(x), points[i]);
            ok = ok && r <= rho_bound;
          }
        }
        if (ok) {
          const Vec<Dim> xw = wrap01(x);
          bool valid = true;
          if (curved) {
            valid = locator.nearest(xw).second >= r * (1.0 - 1e-9);
          } else {
            locator.index().for_each_within(xw, r / lmin + 1e-12, [&](int, const Vec<Dim>& delta) {
              if (valid && std::sqrt(delta.dot(g * delta)) < r * (1.0 - 1e-12)) valid = false;
            });
          }
          if (valid) per_site[i].emplace_back(r, xw);
        }
      }
      int k = Dim - 1;
      while (k >= 0 && pick[k] == m - static_cast<std::size_t>(Dim - k)) --k;
      if (k < 0) break;
      ++pick[k];
      for (int l = k + 1; l < Dim; ++l) pick[l] = pick[l - 1] + 1;
    }
  });
  std::vector<std::pair<double, Vec<Dim>>> out;
  for (auto& v : per_site) out.insert(out.end(), v.begin(), v.end());
  return out;
}

/// Greedy farthest-point insertion on a candidate grid, seeded start, until
/// every candidate lies within the separation of the net; on flat 2D models
/// uncovered Voronoi vertices are then inserted, so the covering radius is
/// at most the separation exactly.
template <int Dim>
Net<Dim> build_net(const ManifoldModel<Dim>& model, double separation, std::uint64_t seed, NetOptions options = {}) {
  if (!(separation > 0.0)) throw Error(ErrorKind::InvalidConfig, "separation must be positive");
  // Curved models need inj > 3 * separation for the ball and cell geometry;
  // on flat models distances are exact at every scale and only degenerate
  // separations (half the torus or more) are refused.
  const double limit = model.is_flat() ? model.injectivity_floor() : model.injectivity_floor() / 3.0;
  if (separation >= limit)
    throw Error(ErrorKind::SeparationTooLarge, model.is_flat() ? "separation must be below injectivity_floor"
                                                               : "separation must be below injectivity_floor / 3");
  const double lmin = std::sqrt(model.lambda_min()), lmax = std::sqrt(model.lambda_max());
  const bool euclidean = model.is_flat() && detail::is_identity(model.metric(Vec<Dim>::Zero()));

  int n = 0;
  if (options.lattice_aligned) {
    if (!model.is_flat() || !detail::is_identity(model.frame(Vec<Dim>::Zero())))
      throw Error(ErrorKind::InvalidConfig, "lattice-aligned nets need a flat model with the identity frame");
    const double inv = 1.0 / options.epsilon;
    n = static_cast<int>(std::lround(inv));
    if (!(options.epsilon > 0.0) || std::abs(inv - n) > 1e-9 * inv)
      throw Error(ErrorKind::InvalidConfig, "lattice-aligned nets need 1/epsilon to be an integer");
  } else {
    const double density = options.candidate_density > 0.0 ? options.candidate_density : (model.is_flat() ? 8.0 : 4.0);
    n = static_cast<int>(std::ceil(density * lmax / separation));
  }
  const std::size_t count = GridIndex<Dim>::size(n);
  const bool random_order = options.order == InsertionOrder::Random;
  const double cap = random_order      ? separation * (1.0 + 1e-12)
                     : model.is_flat() ? std::numeric_limits<double>::infinity()
                                       : 3.0 * separation;

  auto candidate = [n](std::size_t c) { return GridIndex<Dim>::node(c, n); };
  auto exact = [&](const Vec<Dim>& a, const Vec<Dim>& b) {
    return detail::site_distance(model, euclidean, a, b);
  };

  std::vector<double> dist(count, cap);
  using Entry = std::pair<double, std::int64_t>;  // (distance, -candidate) so ties pick the lowest index
  std::priority_queue<Entry> heap;
  std::mt19937_64 rng(seed);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);

  Net<Dim> net;
  net.separation = separation;
  net.seed = seed;
  net.epsilon = options.epsilon;
  net.beta = options.beta;
  net.lattice_aligned = options.lattice_aligned;

  auto insert = [&](const Vec<Dim>& p, double reach) {
    net.points.push_back(p);
    const double r = std::min(reach, 0.5 * Dim) / lmin;
    const int m = static_cast<int>(std::ceil(r * n)) + 1;
    const bool all = 2 * m + 1 >= n;
    std::array<int, Dim> centre;
    for (int d = 0; d < Dim; ++d) centre[d] = static_cast<int>(std::lround(p[d] * n));
    std::array<int, Dim> off;
    off.fill(all ? 0 : -m);
    const int lo = all ? 0 : -m, hi = all ? n - 1 : m;
    for (;;) {
      std::array<int, Dim> idx;
      for (int d = 0; d < Dim; ++d) idx[d] = all ? off[d] : (((centre[d] + off[d]) % n) + n) % n;
      const std::size_t c = GridIndex<Dim>::flatten(idx, n);
      const Vec<Dim> x = candidate(c);
      const Vec<Dim> delta = nearest_rep<Dim>(x - p);
      if (lmin * delta.norm() < dist[c]) {
        double d;
        if (euclidean || model.is_flat()) {
          d = exact(x, p);
        } else if (model.approximate_distance(p, x) > 1.05 * dist[c]) {
          d = dist[c];
        } else {
          try {
            d = exact(x, p);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::RadiusExceeded) throw;
            d = dist[c];
          }
        }
        if (d < dist[c]) {
          dist[c] = d;
          heap.emplace(d, -static_cast<std::int64_t>(c));
        }
      }
      int d = Dim - 1;
      while (d >= 0 && off[d] == hi) {
        off[d] = lo;
        --d;
      }
      if (d < 0) break;
      ++off[d];
    }
  };

  if (random_order) {
    std::vector<std::size_t> order(count);
    for (std::size_t c = 0; c < count; ++c) order[c] = c;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c : order)
      if (dist[c] >= separation) {
        dist[c] = 0.0;
        insert(candidate(c), cap);
      }
    while (!heap.empty()) heap.pop();
  } else {
    for (std::size_t c = 0; c < count; ++c) heap.emplace(dist[c], -static_cast<std::int64_t>(c));
    dist[start] = 0.0;
    insert(candidate(start), cap);
  }
  while (!heap.empty()) {
    const auto [d, negc] = heap.top();
    heap.pop();
    const std::size_t c = static_cast<std::size_t>(-negc);
    if (d != dist[c]) continue;
    if (d < separation) break;
    insert(candidate(c), d);
  }

  if (options.refine_vertices && !options.lattice_aligned && (model.is_flat() || Dim == 2)) {
    const double h = 1.0 / n;
    double grid_max = 0.0;
    for (double d : dist) grid_max = std::max(grid_max, d);
    const double rho_bound = (std::min(grid_max, separation) + lmax * h * std::sqrt(double(Dim)) * 0.5) * 1.01;
    for (int round = 0; round < 64; ++round) {
      auto vertices = voronoi_vertices(model, net, rho_bound);
      std::sort(vertices.begin(), vertices.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return std::lexicographical_compare(a.second.data(), a.second.data() + Dim, b.second.data(), b.second.data() + Dim);
      });
      NetIndex<Dim> index(net.points, separation / lmin);
      bool inserted = false;
      for (const auto& [r, x] : vertices) {
        if (r <= separation) break;
        bool far = true;
        index.for_each_within(x, separation / lmin, [&](int j, const Vec<Dim>&) {
          if (far && exact(x, index.point(j)) < separation) far = false;
        });
        if (far) {
          index.insert(x);
          net.points.push_back(x);
          inserted = true;
        }
      }
      if (!inserted) break;
    }
  }
  return net;
}

/// Labels on a sample grid, the adjacency graph and the covering radius.
template <int Dim>
class VoronoiDecomposition {
 public:
  /// grid_n = 0 picks a spacing of at most separation / 8 in the metric.
  VoronoiDecomposition(const ManifoldModel<Dim>& model, const Net<Dim>& net, int grid_n = 0)
      : model_(std::make_shared<const ManifoldModel<Dim>>(model)),
        net_(std::make_shared<const Net<Dim>>(net)),
        locator_(model_, net_) {
    const double lmax = std::sqrt(model_->lambda_max());
    grid_n_ = grid_n > 0 ? grid_n : static_cast<int>(std::ceil(8.0 * lmax / std::max(net_->separation, 1e-3)));
    const std::size_t total = GridIndex<Dim>::size(grid_n_);
    labels_.assign(total, 0);
    std::vector<double> nd(total, 0.0);
    parallel_for(total, [&](std::size_t c) {
      const auto [j, d] = locator_.nearest(GridIndex<Dim>::midpoint(c, grid_n_));
      labels_[c] = j;
      nd[c] = d;
    });
    grid_covering_ = *std::max_element(nd.begin(), nd.end());
    build_adjacency();
    covering_ = grid_covering_ + lmax * std::sqrt(static_cast<double>(Dim)) * 0.5 / grid_n_;
    if (model_->is_flat() || Dim == 2) {
      exact_covering_ = true;
      const auto vertices = voronoi_vertices(*model_, *net_, covering_ * 1.01 + 1e-12);
      double best = 0.0;
      for (const auto& v : vertices) best = std::max(best, v.first);
      covering_ = vertices.empty() ? covering_ : best;
    }
  }

  const ManifoldModel<Dim>& model() const { return *model_; }
  const Net<Dim>& net() const { return *net_; }
  const NetLocator<Dim>& locator() const { return locator_; }
  int grid_n() const { return grid_n_; }
  const std::vector<int>& labels() const { return labels_; }

  int assign(const Vec<Dim>& q) const { return locator_.nearest(wrap01(q)).first; }

  /// Sorted neighbour lists.
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  std::vector<std::pair<int, int>> adjacency_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < neighbors_.size(); ++i)
      for (int j : neighbors_[i])
        if (static_cast<int>(i) < j) out.emplace_back(static_cast<int>(i), j);
    return out;
  }

  /// Covering radius: the largest Voronoi vertex radius on flat models and on
  /// curved 2D models, otherwise the grid maximum plus the grid half-diagonal.
  double covering_radius() const { return covering_; }
  bool covering_is_exact() const { return exact_covering_; }
  double grid_covering_radius() const { return grid_covering_; }

 private:
  /// A labelled grid edge (i | k) proposes the pair; it is accepted once a
  /// point of the segment equidistant from p_i and p_k has no closer site.
  void build_adjacency() {
    neighbors_.assign(net_->size(), {});
    std::set<std::pair<int, int>> accepted, proposed;
    std::vector<std::tuple<int, int, Vec<Dim>, Vec<Dim>>> crossings;
    const std::size_t total = labels_.size();
    for (std::size_t c = 0; c < total; ++c) {
      const auto idx = GridIndex<Dim>::unflatten(c, grid_n_);
      for (int d = 0; d < Dim; ++d) {
        auto nb = idx;
        nb[d] = (nb[d] + 1) % grid_n_;
        const std::size_t c2 = GridIndex<Dim>::flatten(nb, grid_n_);
        int a = labels_[c], b = labels_[c2];
        if (a == b) continue;
        Vec<Dim> x1 = GridIndex<Dim>::midpoint(c, grid_n_);
        Vec<Dim> x2 = x1;
        x2[d] += 1.0 / grid_n_;
        crossings.emplace_back(a, b, x1, x2);
      }
    }
    for (const auto& [a, b, x1, x2] : crossings) {
      const auto key = std::minmax(a, b);
      if (accepted.count(key)) continue;
      if (verify_crossing(a, b, x1, x2)) accepted.insert(key);
    }
    for (const auto& [i, j] : accepted) {
      neighbors_[static_cast<std::size_t>(i)].push_back(j);
      neighbors_[static_cast<std::size_t>(j)].push_back(i);
    }
    for (auto& v : neighbors_) std::sort(v.begin(), v.end());
  }

  bool verify_crossing(int a, int b, const Vec<Dim>& x1, const Vec<Dim>& x2) const {
    auto f = [&](double t) {
      const Vec<Dim> x = wrap01(Vec<Dim>(x1 + t * (x2 - x1)));
      return locator_.distance(a, x) - locator_.distance(b, x);
    };
    // Illinois regula falsi on [0,1]; f(0) <= 0 <= f(1) by the labels.
    double t0 = 0.0, t1 = 1.0, f0 = f(t0), f1 = f(t1);
    if (f0 > 0.0 || f1 < 0.0) return false;
    double t = 0.5;
    int side = 0;
    for (int it = 0; it < 60; ++it) {
      t = (f1 - f0) != 0.0 ? (t0 * f1 - t1 * f0) / (f1 - f0) : 0.5 * (t0 + t1);
      const double ft = f(t);
      if (std::abs(ft) < 1e-14 || t1 - t0 < 1e-14) break;
      if (ft < 0.0) {
        t0 = t;
        f0 = ft;
        if (side == -1) f1 *= 0.5;
        side = -1;
      } else {
        t1 = t;
        f1 = ft;
        if (side == 1) f0 *= 0.5;
        side = 1;
      }
    }
    const Vec<Dim> m = wrap01(Vec<Dim>(x1 + t * (x2 - x1)));
    const double da = locator_.distance(a, m);
    const double tol = 1e-9 * std::max(da, 1e-12);
    const auto [j, dj] = locator_.nearest(m);
    (void)j;
    return dj >= da - tol;
  }

  std::shared_ptr<const ManifoldModel<Dim>> model_;
  std::shared_ptr<const Net<Dim>> net_;
  NetLocator<Dim> locator_;
  int grid_n_ = 0;
  std::vector<int> labels_;
  std::vector<std::vector<int>> neighbors_;
  double grid_covering_ = 0.0;
  double covering_ = 0.0;
  bool exact_covering_ = false;
};

/// argmin_j d(q, p_j), lowest index on ties.
template <int Dim>
int voronoi_assign(const VoronoiDecomposition<Dim>& decomposition, const Vec<Dim>& q) {
  return decomposition.assign(q);
}

/// Smallest pairwise distance in the net (periodic images included).
template <int Dim>
double min_pairwise_distance(const ManifoldModel<Dim>& model, const Net<Dim>& net) {
  const NetLocator<Dim> locator(model, net);
  const double lmin = std::sqrt(model.lambda_min());
  double best = std::numeric_limits<double>::infinity();
  const double reach = std::max(net.separation, 1e-3) * 1.5 / lmin;
  for (std::size_t i = 0; i < net.size(); ++i) {
    locator.index().for_each_within(net.points[i], reach, [&](int j, const Vec<Dim>& delta) {
      if (j == static_cast<int>(i) && delta.squaredNorm() == 0.0) return;
      if (static_cast<std::size_t>(j) < i) return;
      const double d = j == static_cast<int>(i) ? std::sqrt(delta.dot(model.metric(net.points[i]) * delta))
                                                : locator.distance(j, net.points[i]);
      best = std::min(best, d);
    });
  }
  return best;
}

/// max over grid samples of #{i : d(q, p_i) <= separation}.
template <int Dim>
int overlap_constant(const VoronoiDecomposition<Dim>& decomposition) {
  const auto& model = decomposition.model();
  const auto& net = decomposition.net();
  const auto& locator = decomposition.locator();
  const double s = net.separation;
  const double lmin = std::sqrt(model.lambda_min());
  const int n = decomposition.grid_n();
  std::vector<int> counts(GridIndex<Dim>::size(n), 0);
  parallel_for(counts.size(), [&](std::size_t c) {
    const Vec<Dim> q = GridIndex<Dim>::midpoint(c, n);
    std::set<int> hit;
    locator.index().for_each_within(q, s / lmin, [&](int j, const Vec<Dim>&) {
      if (!hit.count(j) && locator.distance(j, q) <= s) hit.insert(j);
    });
    counts[c] = static_cast<int>(hit.size());
  });
  return *std::max_element(counts.begin(), counts.end());
}

/// min over sites i and pairs of neighbours (j, k) of the g(p_i)-angle
/// between log_{p_i}(p_j) and log_{p_i}(p_k); pi when no such triple exists.
template <int Dim>
double min_adjacent_angle(const VoronoiDecomposition<Dim>& decomposition) {
  const auto& model = decomposition.model();
  const auto& net = decomposition.net();
  std::vector<double> per_site(net.size(), kPi);
  parallel_for(net.size(), [&](std::size_t i) {
    const auto& nb = decomposition.neighbors()[i];
    if (nb.size() < 2) return;
    const Vec<Dim>& p = net.points[i];
    const Mat<Dim> g = model.metric(p);
    std::vector<Vec<Dim>> dirs;
    for (int j : nb) dirs.push_back(model.log_map(p, net.points[static_cast<std::size_t>(j)]));
    double best = kPi;
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (std::size_t b = a + 1; b < dirs.size(); ++b) {
        const double c = dirs[a].dot(g * dirs[b]) /
                         std::sqrt(dirs[a].dot(g * dirs[a]) * dirs[b].dot(g * dirs[b]));
        best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)));
      }
    per_site[i] = best;
  });
  return *std::min_element(per_site.begin(), per_site.end());
}

/// Grid estimate of vol{q : d(q, boundary of D_i) < delta}. The boundary is
/// sampled by the exact equidistance points on labelled grid edges of a
/// local grid with spacing min(delta, separation) / 8.
template <int Dim>
double boundary_tube_volume(const VoronoiDecomposition<Dim>& decomposition, int cell, double delta) {
  const auto& model = decomposition.model();
  const auto& net = decomposition.net();
  const auto& locator = decomposition.locator();
  const double lmin = std::sqrt(model.lambda_min());
  const Vec<Dim> pi = net.points[static_cast<std::size_t>(cell)];
  const double half = std::min(0.5, (decomposition.covering_radius() + delta) / lmin * 1.05 + 1e-9);
  const bool whole = half >= 0.5;
  const double h = std::min(delta, std::max(net.separation, 1e-3)) / 8.0;
  const int m = whole ? static_cast<int>(std::ceil(1.0 / h)) : static_cast<int>(std::ceil(2.0 * half / h));
  const double step = whole ? 1.0 / m : 2.0 * half / m;
  auto position = [&](const std::array<int, Dim>& idx) {
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = whole ? (idx[d] + 0.5) * step : pi[d] - half + (idx[d] + 0.5) * step;
    return x;  // unwrapped chart coordinates
  };
  const std::size_t total = GridIndex<Dim>::size(m);
  std::vector<int> label(total);
  parallel_for(total, [&](std::size_t c) { label[c] = locator.nearest(wrap01(position(GridIndex<Dim>::unflatten(c, m)))).first; });

  std::vector<Vec<Dim>> boundary;
  for (std::size_t c = 0; c < total; ++c) {
    const auto idx = GridIndex<Dim>::unflatten(c, m);
    for (int d = 0; d < Dim; ++d) {
      auto nb = idx;
      Vec<Dim> x2 = position(idx);
      if (nb[d] + 1 == m) {
        if (!whole) continue;
        nb[d] = 0;
      } else {
        ++nb[d];
      }
      x2[d] += step;
      const int a = label[c], b = label[GridIndex<Dim>::flatten(nb, m)];
      if ((a == cell) == (b == cell)) continue;
      const int other = a == cell ? b : a;
      const Vec<Dim> x1 = position(idx);
      auto f = [&](double t) {
        const Vec<Dim> x = wrap01(Vec<Dim>(x1 + t * (x2 - x1)));
        return locator.distance(cell, x) - locator.distance(other, x);
      };
      double t0 = 0.0, t1 = 1.0, f0 = f(0.0), f1 = f(1.0);
      if (f0 * f1 > 0.0) {
        boundary.push_back(0.5 * (x1 + x2));
        continue;
      }
      for (int it = 0; it < 40 && t1 - t0 > 1e-12; ++it) {
        const double t = 0.5 * (t0 + t1), ft = f(t);
        if ((ft <= 0.0) == (f0 <= 0.0)) {
          t0 = t;
          f0 = ft;
        } else {
          t1 = t;
        }
      }
      boundary.push_back(x1 + 0.5 * (t0 + t1) * (x2 - x1));
    }
  }
  if (boundary.empty()) return 0.0;
  NetIndex<Dim> bindex(boundary, delta);
  std::vector<double> weight(total, 0.0);
  parallel_for(total, [&](std::size_t c) {
    const Vec<Dim> x = position(GridIndex<Dim>::unflatten(c, m));
    const Mat<Dim> g = model.metric(x);
    bool near = false;
    bindex.for_each_within(wrap01(x), delta / lmin, [&](int, const Vec<Dim>& dlt) {
      if (!near && std::sqrt(dlt.dot(g * dlt)) < delta) near = true;
    });
    if (near) weight[c] = model.volume_density(x);
  });
  double cellvol = 1.0;
  for (int d = 0; d < Dim; ++d) cellvol *= step;
  return pairwise_sum(weight) * cellvol;
}

/// J * separation^n / vol(M), the constant in J <= C vol(M) separation^{-n}.
template <int Dim>
double packing_constant(const ManifoldModel<Dim>& model, const Net<Dim>& net) {
  return static_cast<double>(net.size()) * std::pow(net.separation, Dim) / model.volume();
}

}  // namespace homog
