#pragma once

// Upper bounds on the dissipation distance
//   D(Id, F) = inf { int_0^1 H(c' c^{-1}) dt : c(0) = Id, c(1) = F }
// over piecewise one-parameter-subgroup paths
//   c = exp(t q_n) ... exp(q_1),  q_k symmetric trace-free,
// whose cost is exactly sum_k H(q_k). The endpoint constraint is handled
// by a quadratic penalty with continuation followed by a Gauss-Newton
// feasibility polish.

#include "plateplast/errors.hpp"
#include "plateplast/forms.hpp"
#include "plateplast/tensors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace plateplast {

/// 3x3 matrix with unit determinant. Inputs within 1e-10 are kept as
/// given; other positive determinants are rescaled by det^(-1/3) and the
/// rescaling is reported through warning().
class SL3Matrix {
 public:
  explicit SL3Matrix(const Mat3& m) : m_(m) {
    const double det = m.determinant();
    if (!std::isfinite(det) || !(det > 0.0))
      throw InvalidArgument("SL(3) input must have positive determinant");
    if (std::abs(det - 1.0) > 1e-10) {
      m_ /= std::cbrt(det);
      warning_ = "determinant " + std::to_string(det) + " renormalized to 1";
    }
  }

  static SL3Matrix identity() { return SL3Matrix(Mat3::Identity()); }

  const Mat3& matrix() const { return m_; }
  double det() const { return m_.determinant(); }
  const std::string& warning() const { return warning_; }
  SL3Matrix inverse() const { return SL3Matrix(m_.inverse()); }
  SL3Matrix operator*(const SL3Matrix& o) const { return SL3Matrix(m_ * o.m_); }

 private:
  Mat3 m_;
  std::string warning_;
};

inline Mat3 mat_exp(const Mat3& q) { return q.exp(); }

/// Principal logarithm for matrices with |F - Id| < 1 (Frobenius).
inline Mat3 mat_log(const Mat3& f) {
  if (!((f - Mat3::Identity()).norm() < 1.0))
    throw LogOutOfDomain("mat_log requires |F - Id| < 1");
  return f.log();
}

inline Mat3 mat_log(const SL3Matrix& f) { return mat_log(f.matrix()); }

/// Frechet derivative of exp at x in direction e, from the block identity
/// exp([[x, e], [0, x]]) = [[exp x, L(x, e)], [0, exp x]].
inline Mat3 exp_frechet(const Mat3& x, const Mat3& e) {
  Eigen::Matrix<double, 6, 6> b = Eigen::Matrix<double, 6, 6>::Zero();
  b.topLeftCorner<3, 3>() = x;
  b.bottomRightCorner<3, 3>() = x;
  b.topRightCorner<3, 3>() = e;
  const Eigen::Matrix<double, 6, 6> eb = b.exp();
  return eb.topRightCorner<3, 3>();
}

/// |F| + |F^{-1}| <= c_k: membership in the compact set K through its
/// constant only.
inline bool in_compact_set(const SL3Matrix& f, double c_k) {
  return f.matrix().norm() + f.matrix().inverse().norm() <= c_k;
}

/// H(log F) when log F is symmetric trace-free, otherwise +infinity.
inline double d_upper_one_segment(const DissipationDensity& d, const SL3Matrix& f) {
  const Eigen::EigenSolver<Mat3> eig(f.matrix());
  for (int i = 0; i < 3; ++i) {
    const auto lam = eig.eigenvalues()(i);
    if (std::abs(lam.imag()) < 1e-14 && lam.real() <= 0.0)
      return std::numeric_limits<double>::infinity();
  }
  const Mat3 l = f.matrix().log();
  if (!l.allFinite()) return std::numeric_limits<double>::infinity();
  if ((l - l.transpose()).norm() > 1e-8 || std::abs(l.trace()) > 1e-8)
    return std::numeric_limits<double>::infinity();
  return H_eval(d, DeviatoricTensor::project(l));
}

struct PathPlan {
  int n_segments = 2;
  int max_evals = 100000;
  double penalty = 10.0;
  int restarts = 8;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_segments < 1) throw InvalidArgument("n_segments must be >= 1");
    if (max_evals < 1) throw InvalidArgument("max_evals must be >= 1");
    if (!(penalty > 0.0)) throw InvalidArgument("penalty must be > 0");
    if (restarts < 0) throw InvalidArgument("restarts must be >= 0");
  }
};

struct PathBound {
  /// Sum of H(q_k) over the best feasible path, +infinity if none.
  double value = std::numeric_limits<double>::infinity();
  bool feasible = false;
  /// The evaluation budget ran out; value is the best bound found so far.
  bool budget_exceeded = false;
  double endpoint_error = std::numeric_limits<double>::infinity();
  std::vector<Vec5> path;  // q_1 .. q_n in orthonormal deviatoric coordinates
  int evaluations = 0;
};

namespace detail {

inline Mat3 coords_matrix(const double* x) {
  const auto& b = deviatoric_basis();
  Mat3 m = Mat3::Zero();
  for (int j = 0; j < 5; ++j) m += x[j] * b[j];
  return m;
}

inline double path_cost(const DissipationDensity& d, const std::vector<double>& x) {
  double c = 0.0;
  for (std::size_t k = 0; k * 5 < x.size(); ++k)
    c += H_eval(d, DeviatoricTensor::from_coords(Eigen::Map<const Vec5>(&x[5 * k])));
  return c;
}

// Segment exponentials and the endpoint residual exp(q_n)...exp(q_1) - F.
struct PathProduct {
  std::vector<Mat3> seg;     // exp(q_k)
  std::vector<Mat3> left;    // exp(q_n) ... exp(q_{k+1})
  std::vector<Mat3> right;   // exp(q_{k-1}) ... exp(q_1)
  Mat3 residual;

  PathProduct(const double* x, int n, const Mat3& f) : seg(n), left(n), right(n) {
    for (int k = 0; k < n; ++k) seg[k] = mat_exp(coords_matrix(x + 5 * k));
    Mat3 acc = Mat3::Identity();
    for (int k = 0; k < n; ++k) {
      right[k] = acc;
      acc = seg[k] * acc;
    }
    residual = acc - f;
    acc = Mat3::Identity();
    for (int k = n - 1; k >= 0; --k) {
      left[k] = acc;
      acc = acc * seg[k];
    }
  }
};

// Augmented Lagrangian of the path problem: smoothed sum of H(q_k) plus
// <lambda, R> + rho/2 |R|^2 for the endpoint residual R.
class PenaltyObjective : public ceres::FirstOrderFunction {
 public:
  PenaltyObjective(const DissipationDensity& d, const Mat3& f, int n, double rho, double eta,
                   int* evals, const Mat3& lambda = Mat3::Zero())
      : d_(d), f_(f), lambda_(lambda), n_(n), rho_(rho), eta_(eta), evals_(evals) {}

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    ++*evals_;
    const PathProduct pp(x, n_, f_);
    *cost = 0.5 * rho_ * pp.residual.squaredNorm() + frobenius_dot(lambda_, pp.residual);
    const Mat3 dr = lambda_ + rho_ * pp.residual;
    const auto& basis = deviatoric_basis();
    for (int k = 0; k < n_; ++k) {
      const Eigen::Map<const Vec5> xk(x + 5 * k);
      Vec5 gh;
      *cost += smoothed_h(xk, gradient ? &gh : nullptr);
      if (!gradient) continue;
      const Mat3 g = pp.left[k].transpose() * dr * pp.right[k].transpose();
      const Mat3 lg = exp_frechet(coords_matrix(x + 5 * k).transpose(), g);
      for (int j = 0; j < 5; ++j) gradient[5 * k + j] = gh(j) + frobenius_dot(lg, basis[j]);
    }
    return std::isfinite(*cost);
  }

  int NumParameters() const override { return 5 * n_; }

 private:
  double smoothed_h(const Vec5& x, Vec5* grad) const {
    const double s = d_.sigma_y();
    if (d_.mode() == DissipationDensity::Mode::Frobenius) {
      const double r = std::sqrt(x.squaredNorm() + eta_ * eta_);
      if (grad) *grad = s * x / r;
      return s * r;
    }
    // Log-sum-exp over +-<d_i, x>.
    const auto& dirs = d_.directions();
    std::vector<double> a;
    a.reserve(2 * dirs.size());
    for (const auto& di : dirs) {
      a.push_back(di.dot(x) / eta_);
      a.push_back(-di.dot(x) / eta_);
    }
    const double amax = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    for (double ai : a) z += std::exp(ai - amax);
    if (grad) {
      grad->setZero();
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        const double wp = std::exp(a[2 * i] - amax) / z;
        const double wm = std::exp(a[2 * i + 1] - amax) / z;
        *grad += s * (wp - wm) * dirs[i];
      }
    }
    return s * eta_ * (amax + std::log(z));
  }

  const DissipationDensity& d_;
  Mat3 f_;
  Mat3 lambda_;
  int n_;
  double rho_;
  double eta_;
  int* evals_;
};

// Minimum-norm Gauss-Newton steps on the nine endpoint equations.
inline double polish(std::vector<double>& x, int n, const Mat3& f, int* evals) {
  const auto& basis = deviatoric_basis();
  double err = PathProduct(x.data(), n, f).residual.norm();
  for (int it = 0; it < 30 && err > 1e-13; ++it) {
    const PathProduct pp(x.data(), n, f);
    ++*evals;
    Eigen::Matrix<double, 9, Eigen::Dynamic> jac(9, 5 * n);
    for (int k = 0; k < n; ++k) {
      const Mat3 qk = coords_matrix(x.data() + 5 * k);
      for (int j = 0; j < 5; ++j) {
        const Mat3 col = pp.left[k] * exp_frechet(qk, basis[j]) * pp.right[k];
        jac.col(5 * k + j) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(col.data());
      }
    }
    const Eigen::Matrix<double, 9, 1> r =
        Eigen::Map<const Eigen::Matrix<double, 9, 1>>(pp.residual.data());
    const Eigen::VectorXd dx = jac.completeOrthogonalDecomposition().solve(-r);
    std::vector<double> trial = x;
    double step = 1.0;
    double trial_err = err;
    for (int ls = 0; ls < 20; ++ls) {
      for (int i = 0; i < 5 * n; ++i) trial[i] = x[i] + step * dx(i);
      trial_err = PathProduct(trial.data(), n, f).residual.norm();
      ++*evals;
      if (trial_err < err) break;
      step *= 0.5;
    }
    if (!(trial_err < err)) break;
    x = trial;
    err = trial_err;
  }
  return err;
}

constexpr double kFeasibleEndpoint = 1e-6;

// Raises the glog threshold to ERROR once. Curvature failures of the
// quasi-Newton update are routine on this nonconvex objective and are
// handled by the line search.
inline void quiet_optimizer_log() {
  static const bool done = [] {
    FLAGS_minloglevel = std::max(FLAGS_minloglevel, google::GLOG_ERROR);
    return true;
  }();
  (void)done;
}

// Feasibility polish, augmented Lagrangian rounds with multiplier updates
// and a penalty increase whenever the residual stalls, then a final polish.
inline std::vector<double> optimize_path(const DissipationDensity& d, const Mat3& f, int n,
                                         std::vector<double> x, const PathPlan& plan,
                                         int* evals) {
  polish(x, n, f, evals);
  double rho = plan.penalty * std::max(d.sigma_y(), 1e-3);
  double eta = 1e-2;
  Mat3 lambda = Mat3::Zero();
  double prev = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 25 && *evals < plan.max_evals; ++round) {
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.logging_type = ceres::SILENT;
    opts.minimizer_progress_to_stdout = false;
    opts.max_num_iterations = 300;
    opts.function_tolerance = 1e-15;
    opts.gradient_tolerance = 1e-13;
    opts.parameter_tolerance = 1e-15;
    ceres::GradientProblem problem(new PenaltyObjective(d, f, n, rho, eta, evals, lambda));
    ceres::GradientProblemSolver::Summary summary;
    const std::vector<double> before = x;
    ceres::Solve(opts, problem, x.data(), &summary);
    const Mat3 r = PathProduct(x.data(), n, f).residual;
    const double err = r.norm();
    lambda += rho * r;
    if (err > 0.25 * prev) rho *= 10.0;
    prev = err;
    double step = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) step = std::max(step, std::abs(x[i] - before[i]));
    if (eta <= 1e-8 && err < 1e-10 && step < 1e-10) break;
    eta = std::max(eta * 0.2, 1e-9);
  }
  polish(x, n, f, evals);
  return x;
}

}  // namespace detail

/// Upper bounds for 1 .. n_segments segments, each warm-started from the
/// previous best path with a zero segment appended, so the sequence is
/// non-increasing.
inline std::vector<PathBound> d_upper_chain(const DissipationDensity& d, const SL3Matrix& f,
                                            const PathPlan& plan) {
  plan.validate();
  detail::quiet_optimizer_log();
  const Mat3& fm = f.matrix();
  std::vector<PathBound> out;
  int evals = 0;

  // Symmetric trace-free generator guess: the log of the polar stretch.
  const Eigen::SelfAdjointEigenSolver<Mat3> polar(fm.transpose() * fm);
  const Mat3 log_u = polar.eigenvectors() *
                     (0.5 * polar.eigenvalues().array().log()).matrix().asDiagonal() *
                     polar.eigenvectors().transpose();
  Vec5 guess = deviatoric_coords(log_u);
  bool exact_one_segment = false;
  if ((fm - Mat3::Identity()).norm() < 1.0) {
    const Mat3 l = mat_log(fm);
    if ((l - l.transpose()).norm() <= 1e-8) {
      guess = deviatoric_coords(l);
      exact_one_segment = true;
    }
  }

  std::mt19937_64 rng(plan.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise = std::max(0.05, 0.3 * guess.norm());

  PathBound best;
  auto consider = [&](std::vector<double> x, int n) {
    const double err = detail::PathProduct(x.data(), n, fm).residual.norm();
    if (!(err <= detail::kFeasibleEndpoint)) return;
    const double cost = detail::path_cost(d, x);
    if (!best.feasible || cost < best.value) {
      best.value = cost;
      best.feasible = true;
      best.endpoint_error = err;
      best.path.clear();
      for (int k = 0; k < n; ++k) best.path.push_back(Eigen::Map<const Vec5>(&x[5 * k]));
    }
  };

  for (int n = 1; n <= plan.n_segments; ++n) {
    if (best.feasible) {
      std::vector<double> warm;
      for (const auto& q : best.path) warm.insert(warm.end(), q.data(), q.data() + 5);
      warm.resize(5 * static_cast<std::size_t>(n), 0.0);
      consider(warm, n);
      if (evals < plan.max_evals) consider(detail::optimize_path(d, fm, n, warm, plan, &evals), n);
    }
    std::vector<double> split(5 * static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < 5; ++j) split[5 * k + j] = guess(j) / n;
    if (exact_one_segment) consider(split, n);
    if ((fm - Mat3::Identity()).norm() == 0.0) consider(std::vector<double>(split.size(), 0.0), n);
    if (evals < plan.max_evals) consider(detail::optimize_path(d, fm, n, split, plan, &evals), n);
    for (int r = 0; r < plan.restarts && evals < plan.max_evals; ++r) {
      std::vector<double> x = split;
      for (double& xi : x) xi += noise * normal(rng) / std::sqrt(static_cast<double>(n));
      consider(detail::optimize_path(d, fm, n, x, plan, &evals), n);
    }
    PathBound row = best;
    row.evaluations = evals;
    row.budget_exceeded = evals >= plan.max_evals;
    out.push_back(row);
  }
  return out;
}

inline PathBound d_upper(const DissipationDensity& d, const SL3Matrix& f, const PathPlan& plan) {
  return d_upper_chain(d, f, plan).back();
}

/// D(F1, F2) = D(Id, F2 F1^{-1}), bounded from above.
inline PathBound dissipation_distance(const DissipationDensity& d, const SL3Matrix& f1,
                                      const SL3Matrix& f2, const PathPlan& plan) {
  return d_upper(d, SL3Matrix(f2.matrix() * f1.matrix().inverse()), plan);
}

}  // namespace plateplast
