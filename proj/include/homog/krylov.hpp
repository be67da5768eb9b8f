#pragma once

// Matrix-free Krylov iterations shared by the fiber cell solver and the
// finite element solver. Operators and preconditioners are callables
// (const Eigen::VectorXd& in, Eigen::VectorXd& out).

#include "homog/core.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace homog {

struct KrylovOptions {
  double tolerance = 1e-12;  // on ||r|| / ||b||
  int max_iterations = 1000;
};

struct KrylovResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// operators; x holds the initial guess on entry.
template <class Op, class Prec>
KrylovResult pcg(const Op& apply, const Prec& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                 const KrylovOptions& options) {
  KrylovResult res;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero(b.size());
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r(b.size()), z(b.size()), p(b.size()), q(b.size());
  apply(x, q);
  r = b - q;
  precondition(r, z);
  p = z;
  double rz = r.dot(z);
  res.relative_residual = r.norm() / bnorm;
  while (res.relative_residual > options.tolerance && res.iterations < options.max_iterations) {
    apply(p, q);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) break;
    const double a = rz / pq;
    x += a * p;
    r -= a * q;
    ++res.iterations;
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= options.tolerance) break;
    precondition(r, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.converged = res.relative_residual <= options.tolerance;
  return res;
}

/// Right-preconditioned BiCGSTAB for nonsymmetric operators.
template <class Op, class Prec>
KrylovResult bicgstab(const Op& apply, const Prec& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                      const KrylovOptions& options) {
  KrylovResult res;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero(b.size());
    res.converged = true;
    return res;
  }
  const Eigen::Index n = b.size();
  Eigen::VectorXd r(n), rhat(n), p = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n), s(n), t(n), y(n), z(n);
  apply(x, t);
  r = b - t;
  rhat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  res.relative_residual = r.norm() / bnorm;
  while (res.relative_residual > options.tolerance && res.iterations < options.max_iterations) {
    const double rho_new = rhat.dot(r);
    if (rho_new == 0.0) break;
    p = r + (rho_new / rho) * (alpha / omega) * (p - omega * v);
    rho = rho_new;
    precondition(p, y);
    apply(y, v);
    alpha = rho / rhat.dot(v);
    s = r - alpha * v;
    x += alpha * y;
    ++res.iterations;
    if (s.norm() / bnorm <= options.tolerance) {
      res.relative_residual = s.norm() / bnorm;
      break;
    }
    precondition(s, z);
    apply(z, t);
    const double tt = t.dot(t);
    omega = tt > 0.0 ? t.dot(s) / tt : 0.0;
    x += omega * z;
    r = s - omega * t;
    res.relative_residual = r.norm() / bnorm;
    if (omega == 0.0) break;
  }
  res.converged = res.relative_residual <= options.tolerance;
  return res;
}

}  // namespace homog
