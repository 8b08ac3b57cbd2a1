#pragma once

// Minimization of the plate energy over (u, v) with the plastic field
// frozen. Linear variant: one factorization of the constant stiffness,
// reused for every call. Von Karman variant: damped Newton with an Armijo
// line search.

#include "plateplast/errors.hpp"
#include "plateplast/forms.hpp"
#include "plateplast/plate_fields.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace plateplast {

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

struct ElasticResult {
  int iterations = 0;
  double gradient_norm = 0.0;
  double energy = 0.0;
};

class ElasticSolver {
 public:
  using SpMat = Eigen::SparseMatrix<double>;
  static constexpr int kLocalDofs = 24;
  using LocalVec = Eigen::Matrix<double, kLocalDofs, 1>;
  using LocalMat = Eigen::Matrix<double, kLocalDofs, kLocalDofs>;
  using StrainJac = Eigen::Matrix<double, 3, kLocalDofs>;

  ElasticSolver(const Discretization& disc, const IsotropicElasticity& el,
                Alpha alpha, NewtonOptions opts = {})
      : disc_(disc), el_(el), alpha_(alpha), opts_(opts),
        d_(plane_stiffness(el)) {
    if (!(opts.tol > 0.0)) throw InvalidArgument("newton_tol must be > 0");
    if (opts.max_iter < 1) throw InvalidArgument("newton_max must be >= 1");
    const Grid& g = disc_.grid();
    const int n = g.num_nodes();
    n_dofs_ = 6 * n;
    free_index_.assign(static_cast<std::size_t>(n_dofs_), -1);
    std::vector<bool> clamped(static_cast<std::size_t>(n), false);
    for (int node : gamma_d_nodes(g)) clamped[node] = true;
    int next = 0;
    for (int node = 0; node < n; ++node) {
      if (clamped[node]) continue;
      for (int k = 0; k < 2; ++k) free_index_[2 * node + k] = next++;
    }
    for (int node = 0; node < n; ++node) {
      if (clamped[node]) continue;
      for (int m = 0; m < 4; ++m) free_index_[2 * n + 4 * node + m] = next++;
    }
    n_free_ = next;
    const auto& lr = g.layer_rule();
    for (std::size_t l = 0; l < lr.points.size(); ++l) {
      m0_ += lr.weights[l];
      m1_ += lr.weights[l] * lr.points[l];
      m2_ += lr.weights[l] * lr.points[l] * lr.points[l];
    }
  }

  const Discretization& discretization() const { return disc_; }
  const Grid& grid() const { return disc_.grid(); }
  Alpha alpha() const { return alpha_; }
  const IsotropicElasticity& elasticity() const { return el_; }
  const Eigen::Matrix3d& plane_matrix() const { return d_; }
  int num_free() const { return n_free_; }
  int num_dofs() const { return n_dofs_; }
  /// Free-DOF index of global DOF k (u block then v block), or -1.
  int free_index(int k) const { return free_index_[k]; }

  std::array<int, kLocalDofs> local_dofs(int ci, int cj) const {
    const auto nodes = disc_.cell_nodes(ci, cj);
    const int n = grid().num_nodes();
    std::array<int, kLocalDofs> out{};
    for (int c = 0; c < 4; ++c) {
      out[2 * c] = 2 * nodes[c];
      out[2 * c + 1] = 2 * nodes[c] + 1;
      for (int m = 0; m < 4; ++m) out[8 + 4 * c + m] = 2 * n + 4 * nodes[c] + m;
    }
    return out;
  }

  /// Derivatives of the Voigt driving strain (e11, e22, 2 e12) with respect
  /// to the local DOFs: membrane part (including the Von Karman term at
  /// grad v) and the bending part, which multiplies x3.
  void strain_jacobians(int gp, const Vec2& grad_v, StrainJac& a, StrainJac& k) const {
    const PointBasis& b = disc_.basis(gp);
    const double l = l_alpha(alpha_);
    a.setZero();
    k.setZero();
    for (int c = 0; c < 4; ++c) {
      a(0, 2 * c) = b.n_x[c];
      a(2, 2 * c) = b.n_y[c];
      a(1, 2 * c + 1) = b.n_y[c];
      a(2, 2 * c + 1) = b.n_x[c];
    }
    for (int j = 0; j < 16; ++j) {
      a(0, 8 + j) = l * grad_v(0) * b.w_x[j];
      a(1, 8 + j) = l * grad_v(1) * b.w_y[j];
      a(2, 8 + j) = l * (grad_v(0) * b.w_y[j] + grad_v(1) * b.w_x[j]);
      k(0, 8 + j) = -b.w_xx[j];
      k(1, 8 + j) = -b.w_yy[j];
      k(2, 8 + j) = -2.0 * b.w_xy[j];
    }
  }

  double energy(const PlateState& s) const {
    return elastic_energy(disc_, s, d_, alpha_);
  }

  /// Gradient of the elastic energy with respect to all DOFs.
  Eigen::VectorXd gradient(const PlateState& s) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_dofs_);
    assemble(s, &grad, nullptr);
    return grad;
  }

  Eigen::VectorXd free_part(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(n_free_);
    for (int k = 0; k < n_dofs_; ++k)
      if (free_index_[k] >= 0) out(free_index_[k]) = full(k);
    return out;
  }

  SpMat hessian(const PlateState& s) const {
    std::vector<Eigen::Triplet<double>> trip;
    assemble(s, nullptr, &trip);
    SpMat h(n_free_, n_free_);
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  }

  /// Minimizes the elastic energy over the free DOFs of (u, v) with p and
  /// the clamped DOFs held fixed.
  ElasticResult minimize(PlateState& s) const {
    return alpha_ == Alpha::Linear ? minimize_linear(s) : minimize_newton(s);
  }

 private:
  void add_free(PlateState& s, const Eigen::VectorXd& dz, double scale) const {
    const int n = grid().num_nodes();
    for (int k = 0; k < n_dofs_; ++k) {
      const int f = free_index_[k];
      if (f < 0) continue;
      if (k < 2 * n)
        s.u(k) += scale * dz(f);
      else
        s.v(k - 2 * n) += scale * dz(f);
    }
  }

  void assemble(const PlateState& s, Eigen::VectorXd* grad,
                std::vector<Eigen::Triplet<double>>* trip) const {
    const Grid& g = grid();
    const double l = l_alpha(alpha_);
    if (trip) trip->reserve(static_cast<std::size_t>(g.num_cells()) * kLocalDofs * kLocalDofs);
    StrainJac a, k;
    for (int cj = 0; cj < g.ny(); ++cj)
      for (int ci = 0; ci < g.nx(); ++ci) {
        LocalVec lg = LocalVec::Zero();
        LocalMat lh = LocalMat::Zero();
        for (int gp = 0; gp < g.points_per_cell(); ++gp) {
          const PointKinematics kin = point_kinematics(disc_, s.u, s.v, ci, cj, gp);
          strain_jacobians(gp, kin.grad_v, a, k);
          const double wa = g.gp_weight(gp);
          Eigen::Vector3d s0 = Eigen::Vector3d::Zero();  // sum w_l sigma_l
          Eigen::Vector3d s1 = Eigen::Vector3d::Zero();  // sum w_l x3_l sigma_l
          for (int layer = 0; layer < g.nz(); ++layer) {
            const double x3 = g.layer_x3(layer);
            const double wl = g.layer_weight(layer);
            const DeviatoricTensor& p = s.p[g.point_index(g.cell(ci, cj), gp, layer)];
            const Sym2 e = driving_strain(kin, l, x3) - p.minor2();
            const Eigen::Vector3d sig = d_ * Eigen::Vector3d(e(0, 0), e(1, 1), 2.0 * e(0, 1));
            s0 += wl * sig;
            s1 += wl * x3 * sig;
          }
          if (grad) lg += wa * (a.transpose() * s0 + k.transpose() * s1);
          if (trip) {
            const Eigen::Matrix<double, 3, kLocalDofs> da = d_ * a;
            const Eigen::Matrix<double, 3, kLocalDofs> dk = d_ * k;
            lh += wa * (m0_ * a.transpose() * da +
                        m1_ * (a.transpose() * dk + k.transpose() * da) +
                        m2_ * k.transpose() * dk);
            if (l != 0.0) {
              const PointBasis& b = disc_.basis(gp);
              for (int i = 0; i < 16; ++i)
                for (int j = 0; j < 16; ++j)
                  lh(8 + i, 8 + j) +=
                      wa * l *
                      (s0(0) * b.w_x[i] * b.w_x[j] + s0(1) * b.w_y[i] * b.w_y[j] +
                       s0(2) * (b.w_x[i] * b.w_y[j] + b.w_y[i] * b.w_x[j]));
            }
          }
        }
        const auto dofs = local_dofs(ci, cj);
        if (grad)
          for (int i = 0; i < kLocalDofs; ++i) (*grad)(dofs[i]) += lg(i);
        if (trip)
          for (int i = 0; i < kLocalDofs; ++i) {
            const int fi = free_index_[dofs[i]];
            if (fi < 0) continue;
            for (int j = 0; j < kLocalDofs; ++j) {
              const int fj = free_index_[dofs[j]];
              if (fj < 0) continue;
              trip->emplace_back(fi, fj, lh(i, j));
            }
          }
      }
  }

  const Eigen::SimplicialLDLT<SpMat>& linear_factor(const PlateState& s) const {
    if (!linear_factor_) {
      auto f = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
      f->compute(hessian(s));
      if (f->info() != Eigen::Success)
        throw InternalError("elastic stiffness factorization failed");
      linear_factor_ = std::move(f);
    }
    return *linear_factor_;
  }

  ElasticResult minimize_linear(PlateState& s) const {
    ElasticResult r;
    if (n_free_ == 0) {
      r.energy = energy(s);
      return r;
    }
    const auto& factor = linear_factor(s);
    Eigen::VectorXd g = free_part(gradient(s));
    const double g0 = g.norm();
    for (int it = 0; it < opts_.max_iter; ++it) {
      r.gradient_norm = g.norm();
      if (r.gradient_norm <= opts_.tol * (1.0 + g0) && it > 0) break;
      if (r.gradient_norm == 0.0) break;
      const Eigen::VectorXd dz = factor.solve(g);
      add_free(s, dz, -1.0);
      g = free_part(gradient(s));
      r.iterations = it + 1;
      r.gradient_norm = g.norm();
    }
    r.energy = energy(s);
    return r;
  }

  ElasticResult minimize_newton(PlateState& s) const {
    try {
      return newton_iterations(s);
    } catch (const NewtonStall&) {
      // One retry from a slightly perturbed iterate.
      std::mt19937_64 rng(12345);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Eigen::VectorXd kick(n_free_);
      for (int i = 0; i < n_free_; ++i) kick(i) = u(rng);
      add_free(s, kick, 1e-6);
      return newton_iterations(s);
    }
  }

  ElasticResult newton_iterations(PlateState& s) const {
    ElasticResult r;
    if (n_free_ == 0) {
      r.energy = energy(s);
      return r;
    }
    double e0 = energy(s);
    Eigen::VectorXd g = free_part(gradient(s));
    const double g_init = g.norm();
    for (int it = 0; it < opts_.max_iter; ++it) {
      r.gradient_norm = g.norm();
      if (r.gradient_norm <= opts_.tol * (1.0 + g_init)) {
        r.iterations = it;
        r.energy = e0;
        return r;
      }
      SpMat h = hessian(s);
      Eigen::VectorXd dir;
      double shift = 0.0;
      const double diag_scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 30; ++attempt) {
        SpMat hs = h;
        if (shift > 0.0) {
          SpMat id(n_free_, n_free_);
          id.setIdentity();
          hs += shift * id;
        }
        Eigen::SimplicialLDLT<SpMat> f(hs);
        if (f.info() == Eigen::Success && f.vectorD().minCoeff() > 0.0) {
          dir = -f.solve(g);
          break;
        }
        shift = shift == 0.0 ? 1e-10 * diag_scale : 10.0 * shift;
      }
      if (dir.size() == 0 || !(g.dot(dir) < 0.0)) dir = -g;

      const double slope = g.dot(dir);
      double step = 1.0;
      bool accepted = false;
      PlateState trial = s;
      for (int ls = 0; ls < 60; ++ls) {
        trial.u = s.u;
        trial.v = s.v;
        add_free(trial, dir, step);
        const double e1 = energy(trial);
        if (e1 <= e0 + 1e-4 * step * slope) {
          accepted = true;
          e0 = e1;
          break;
        }
        // Energy differences below rounding: accept if the gradient drops.
        if (std::abs(e1 - e0) <= 1e-14 * std::max(1.0, std::abs(e0))) {
          const Eigen::VectorXd g1 = free_part(gradient(trial));
          if (g1.norm() < r.gradient_norm) {
            accepted = true;
            e0 = e1;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted)
        throw NewtonStall("line search could not decrease the elastic energy");
      s.u = trial.u;
      s.v = trial.v;
      g = free_part(gradient(s));
      r.iterations = it + 1;
    }
    r.gradient_norm = g.norm();
    r.energy = e0;
    if (r.gradient_norm > opts_.tol * (1.0 + g_init))
      throw NewtonStall("Newton iteration cap reached with gradient norm " +
                        std::to_string(r.gradient_norm));
    return r;
  }

  Discretization disc_;
  IsotropicElasticity el_;
  Alpha alpha_;
  NewtonOptions opts_;
  Eigen::Matrix3d d_;
  int n_dofs_ = 0;
  int n_free_ = 0;
  std::vector<int> free_index_;
  double m0_ = 0.0, m1_ = 0.0, m2_ = 0.0;
  mutable std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> linear_factor_;
};

}  // namespace plateplast
