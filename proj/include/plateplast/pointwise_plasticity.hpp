#pragma once

// Per-quadrature-point plastic update: minimize
//   Q2(E - p') + B(p) + H_D(p - p_prev)
// over symmetric trace-free p.

#include "plateplast/errors.hpp"
#include "plateplast/forms.hpp"
#include "plateplast/tensors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace plateplast {

/// Material data and stopping rule for the local problem. The smooth part
/// g(p) = Q2(E - p') + B(p) is quadratic; its Hessian in orthonormal
/// deviatoric coordinates is assembled once here.
class LocalProblem {
 public:
  LocalProblem(IsotropicElasticity el, HardeningForm h, DissipationDensity d,
               double tol = 1e-10, int max_iter = 10000)
      : el_(el), h_(std::move(h)), d_(std::move(d)), tol_(tol),
        max_iter_(max_iter) {
    if (!(tol > 0.0)) throw InvalidArgument("local tol must be > 0");
    if (max_iter < 1) throw InvalidArgument("local max_iter must be >= 1");
    for (int j = 0; j < 5; ++j) {
      const DeviatoricTensor pj = DeviatoricTensor::from_coords(Vec5::Unit(j));
      hessian_.col(j) = smooth_gradient_matrix_coords(Sym2(), pj);
    }
    hessian_ = 0.5 * (hessian_ + hessian_.transpose());
    Eigen::SelfAdjointEigenSolver<Mat5> eig(hessian_);
    lipschitz_ = eig.eigenvalues().maxCoeff();
    strong_convexity_ = eig.eigenvalues().minCoeff();
  }

  const IsotropicElasticity& elasticity() const { return el_; }
  const HardeningForm& hardening() const { return h_; }
  const DissipationDensity& dissipation() const { return d_; }
  double tol() const { return tol_; }
  int max_iter() const { return max_iter_; }

  /// Hessian of the smooth part in deviatoric coordinates.
  const Mat5& hessian() const { return hessian_; }
  /// Largest eigenvalue of hessian(); the proximal step is 1 / lipschitz().
  double lipschitz() const { return lipschitz_; }
  double strong_convexity() const { return strong_convexity_; }

  /// Linear term: the smooth part is 1/2 x^T H x - b(E)^T x + const.
  Vec5 linear_term(const Sym2& e) const {
    return -smooth_gradient_matrix_coords(e, DeviatoricTensor());
  }

  /// Deviatoric coordinates of grad_p [Q2(E - p') + B(p)].
  Vec5 smooth_gradient_matrix_coords(const Sym2& e,
                                     const DeviatoricTensor& p) const {
    const Sym3 stress = apply_C2(el_, e - p.minor2());
    const Mat3 grad = -embed(stress.block2()) + B_grad(h_, p).matrix();
    return deviatoric_coords(grad);
  }

 private:
  IsotropicElasticity el_;
  HardeningForm h_;
  DissipationDensity d_;
  double tol_;
  int max_iter_;
  Mat5 hessian_ = Mat5::Zero();
  double lipschitz_ = 0.0;
  double strong_convexity_ = 0.0;
};

struct LocalResult {
  DeviatoricTensor p;
  double residual = 0.0;
  int iters = 0;
};

inline double incremental_density(const LocalProblem& lp, const Sym2& e,
                                  const DeviatoricTensor& p,
                                  const DeviatoricTensor& p_prev) {
  return Q2(lp.elasticity(), e - p.minor2()) + B_eval(lp.hardening(), p) +
         H_eval(lp.dissipation(), p - p_prev);
}

namespace detail {

inline void require_frobenius(const LocalProblem& lp) {
  if (lp.dissipation().mode() != DissipationDensity::Mode::Frobenius)
    throw InvalidArgument(
        "local plastic update supports the Frobenius dissipation mode only");
}

// First-order certificate given the deviatoric gradient of the smooth part.
inline double residual_from_gradient(const Vec5& g, const Vec5& step,
                                     double sigma) {
  const double n = step.norm();
  if (n > 0.0) return (g + sigma * step / n).norm();
  return std::max(g.norm() - sigma, 0.0);
}

}  // namespace detail

/// Zero iff p satisfies the first-order condition of the local problem.
inline double optimality_residual(const LocalProblem& lp, const Sym2& e,
                                  const DeviatoricTensor& p,
                                  const DeviatoricTensor& p_prev) {
  detail::require_frobenius(lp);
  const Vec5 g = lp.smooth_gradient_matrix_coords(e, p);
  return detail::residual_from_gradient(g, (p - p_prev).coords(),
                                        lp.dissipation().sigma_y());
}

/// Accelerated proximal gradient with fixed step 1/L and the exact
/// Frobenius-ball shrinkage around p_prev. Momentum is reset whenever the
/// objective would increase, so accepted iterates are monotone and start at
/// p_prev. A converged iterate off p_prev is refined by a few Newton steps.
/// sigma_y = 0 reduces to a 5x5 linear solve.
inline LocalResult prox_update(const LocalProblem& lp, const Sym2& e,
                               const DeviatoricTensor& p_prev) {
  detail::require_frobenius(lp);
  const double sigma = lp.dissipation().sigma_y();
  const Mat5& hm = lp.hessian();
  const Vec5 b = lp.linear_term(e);
  const Vec5 x_prev = p_prev.coords();

  LocalResult out;
  if (sigma == 0.0) {
    const Vec5 x = hm.ldlt().solve(b);
    out.p = DeviatoricTensor::from_coords(x);
    out.iters = 1;
    out.residual = optimality_residual(lp, e, out.p, p_prev);
    if (out.residual > lp.tol())
      throw NonConvergence("prox_update: linear solve residual " +
                           std::to_string(out.residual));
    return out;
  }

  // Iterates are kept as stored tensors so that p - p_prev, which fixes the
  // subgradient direction in the certificate, is an exact difference even
  // when p lies within rounding of p_prev.
  const double step = 1.0 / lp.lipschitz();
  auto objective = [&](const DeviatoricTensor& p) {
    const Vec5 x = p.coords();
    return 0.5 * x.dot(hm * x) - b.dot(x) + sigma * (p - p_prev).coords().norm();
  };
  auto prox_step = [&](const DeviatoricTensor& y) {
    const Vec5 xy = y.coords();
    const Vec5 z = xy - step * (hm * xy - b) - x_prev;
    const double n = z.norm();
    const double shrink = sigma * step;
    if (n <= shrink) return p_prev;
    return p_prev + DeviatoricTensor::from_coords((1.0 - shrink / n) * z);
  };

  // Subgradient certificate, or the proximal-gradient mapping norm where
  // the step direction is lost to rounding next to p_prev.
  auto residual = [&](const DeviatoricTensor& p) {
    const double r = detail::residual_from_gradient(hm * p.coords() - b,
                                                    (p - p_prev).coords(), sigma);
    return std::min(r, lp.lipschitz() * (p - prox_step(p)).norm());
  };

  DeviatoricTensor x = p_prev;
  DeviatoricTensor y = p_prev;
  double fx = objective(x);
  double t = 1.0;
  int it = 0;
  double res = residual(x);
  // Iterate to half the tolerance so the final re-evaluation has margin.
  while (res > 0.5 * lp.tol() && it < lp.max_iter()) {
    ++it;
    const DeviatoricTensor x_new = prox_step(y);
    const double f_new = objective(x_new);
    if (f_new > fx && !(y == x)) {
      // Restart from the last accepted iterate; a plain proximal step
      // from there cannot increase the objective beyond rounding.
      t = 1.0;
      y = x;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + (x_new - x) * ((t - 1.0) / t_new);
    x = x_new;
    fx = f_new;
    t = t_new;
    res = residual(x);
  }

  // Off p_prev the first-order condition is smooth with an SPD Jacobian;
  // Newton steps drive the subgradient certificate to rounding level.
  const bool converged = res <= 0.5 * lp.tol();
  for (int k = 0; converged && k < 4 && !(x == p_prev); ++k) {
    const Vec5 d = (x - p_prev).coords();
    const double r = d.norm();
    const Vec5 nd = d / r;
    const Vec5 g = hm * x.coords() - b + sigma * nd;
    if (g.norm() <= 1e-3 * lp.tol()) break;
    const Mat5 jac = hm + (sigma / r) * (Mat5::Identity() - nd * nd.transpose());
    const DeviatoricTensor x_try = x - DeviatoricTensor::from_coords(jac.ldlt().solve(g));
    if (x_try == p_prev) break;
    const double g_try = detail::residual_from_gradient(
        hm * x_try.coords() - b, (x_try - p_prev).coords(), sigma);
    if (!(g_try < g.norm())) break;
    x = x_try;
  }

  out.p = x;
  out.iters = it;
  out.residual = optimality_residual(lp, e, out.p, p_prev);
  if (std::min(out.residual, residual(x)) > lp.tol()) {
    std::ostringstream msg;
    msg << "prox_update: residual " << out.residual << " after " << it << " iterations";
    throw NonConvergence(msg.str());
  }
  return out;
}

}  // namespace plateplast
