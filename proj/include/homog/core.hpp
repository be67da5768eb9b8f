#pragma once

// Shared vocabulary: fixed-size Eigen types, the error type, periodic
// reductions and a reproducible summation.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <exception>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace homog {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorKind {
  StepSizeUnderflow,
  RadiusExceeded,
  NewtonDivergence,
  SeparationTooLarge,
  ExponentOrderViolated,
  PartitionGap,
  ZeroMode,
  ScaleOrderViolated,
  NotElliptic,
  NoConvergence,
  SingularAssembly,
  InvalidConfig,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorKind::RadiusExceeded: return "RadiusExceeded";
    case ErrorKind::NewtonDivergence: return "NewtonDivergence";
    case ErrorKind::SeparationTooLarge: return "SeparationTooLarge";
    case ErrorKind::ExponentOrderViolated: return "ExponentOrderViolated";
    case ErrorKind::PartitionGap: return "PartitionGap";
    case ErrorKind::ZeroMode: return "ZeroMode";
    case ErrorKind::ScaleOrderViolated: return "ScaleOrderViolated";
    case ErrorKind::NotElliptic: return "NotElliptic";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularAssembly: return "SingularAssembly";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Worker count: HOMOG_THREADS if set (>= 1), otherwise the hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("HOMOG_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, n) on contiguous blocks, one block per worker.
/// Bodies write to disjoint slots, so results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Reduces a coordinate into [0,1).
inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

template <int Dim>
Vec<Dim> wrap01(const Vec<Dim>& x) {
  Vec<Dim> r;
  for (int i = 0; i < Dim; ++i) r[i] = wrap01(x[i]);
  return r;
}

/// Representative of d modulo 1 closest to zero, in (-1/2, 1/2].
inline double nearest_rep(double d) { return d - std::ceil(d - 0.5); }

template <int Dim>
Vec<Dim> nearest_rep(const Vec<Dim>& d) {
  Vec<Dim> r;
  for (int i = 0; i < Dim; ++i) r[i] = nearest_rep(d[i]);
  return r;
}

/// Pairwise summation; the result depends only on the order of `values`.
inline double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Multi-index iteration over {0..n-1}^Dim, row-major with the last index fastest.
template <int Dim>
struct GridIndex {
  static std::size_t size(int n) {
    std::size_t s = 1;
    for (int i = 0; i < Dim; ++i) s *= static_cast<std::size_t>(n);
    return s;
  }

  static std::array<int, Dim> unflatten(std::size_t flat, int n) {
    std::array<int, Dim> idx{};
    for (int d = Dim - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % static_cast<std::size_t>(n));
      flat /= static_cast<std::size_t>(n);
    }
    return idx;
  }

  static std::size_t flatten(const std::array<int, Dim>& idx, int n) {
    std::size_t flat = 0;
    for (int d = 0; d < Dim; ++d) flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx[d]);
    return flat;
  }

  /// Midpoint of cell `flat` on the uniform n^Dim grid of [0,1)^Dim.
  static Vec<Dim> midpoint(std::size_t flat, int n) {
    const auto idx = unflatten(flat, n);
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = (idx[d] + 0.5) / n;
    return x;
  }

  /// Node `flat` of the uniform n^Dim grid of [0,1)^Dim (origin at 0).
  static Vec<Dim> node(std::size_t flat, int n) {
    const auto idx = unflatten(flat, n);
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = static_cast<double>(idx[d]) / n;
    return x;
  }
};

}  // namespace homog
