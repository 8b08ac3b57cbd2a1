#pragma once

// Discrete plate fields on a uniform rectangular grid of omega x (-1/2, 1/2).
//
//   u  bilinear, two nodal DOFs (u1, u2) per node
//   v  Bogner-Fox-Schmit bicubic Hermite, four nodal DOFs per node
//      (v, dv/dx1, dv/dx2, d2v/dx1dx2), so v is C^1 and the clamped
//      condition on v and grad v is a plain DOF constraint
//   p  one deviatoric tensor per (cell, in-plane Gauss point, layer)
//
// In-plane integration uses an n x n Gauss rule per cell, through-thickness
// integration an nz-point Gauss rule on (-1/2, 1/2).

#include "plateplast/errors.hpp"
#include "plateplast/forms.hpp"
#include "plateplast/loading.hpp"
#include "plateplast/quadrature.hpp"
#include "plateplast/tensors.hpp"

#include <array>
#include <string>
#include <vector>

namespace plateplast {

enum Edge : unsigned { kLeft = 1u, kRight = 2u, kBottom = 4u, kTop = 8u };

enum class Alpha { Linear, VonKarman };

/// L_alpha: 1 for the Von Karman model, 0 for the linearized model.
inline double l_alpha(Alpha a) { return a == Alpha::VonKarman ? 1.0 : 0.0; }

class Grid {
 public:
  Grid(double lx, double ly, int nx, int ny, int nz, unsigned gamma_d,
       int inplane_order = 3)
      : lx_(lx), ly_(ly), nx_(nx), ny_(ny), nz_(nz), gamma_d_(gamma_d),
        order_(inplane_order) {
    if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("Lx, Ly must be > 0");
    if (nx < 4 || ny < 4) throw InvalidArgument("nx, ny must be >= 4");
    if (nz < 2) throw InvalidArgument("nz must be >= 2");
    if ((gamma_d & 15u) == 0u || (gamma_d & ~15u) != 0u)
      throw InvalidArgument("gamma_d must be a nonempty set of edges");
    if (inplane_order < 2 || inplane_order > 5)
      throw InvalidArgument("in-plane Gauss order must be in [2, 5]");
    inplane_ = gauss_legendre(order_, 0.0, 1.0);
    layers_ = gauss_legendre(nz_, -0.5, 0.5);
  }

  double lx() const { return lx_; }
  double ly() const { return ly_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  unsigned gamma_d() const { return gamma_d_; }
  int inplane_order() const { return order_; }
  double hx() const { return lx_ / nx_; }
  double hy() const { return ly_ / ny_; }

  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int node(int i, int j) const { return j * (nx_ + 1) + i; }
  int num_cells() const { return nx_ * ny_; }
  int cell(int i, int j) const { return j * nx_ + i; }
  int points_per_cell() const { return order_ * order_; }
  int num_points() const { return num_cells() * points_per_cell() * nz_; }
  int point_index(int cell, int gp, int layer) const {
    return (cell * points_per_cell() + gp) * nz_ + layer;
  }

  const QuadratureRule& inplane_rule() const { return inplane_; }
  const QuadratureRule& layer_rule() const { return layers_; }

  /// Reference coordinates in [0,1]^2 of in-plane point gp.
  std::pair<double, double> gp_local(int gp) const {
    return {inplane_.points[gp % order_], inplane_.points[gp / order_]};
  }
  double gp_weight(int gp) const {
    return inplane_.weights[gp % order_] * inplane_.weights[gp / order_] * hx() * hy();
  }
  std::pair<double, double> gp_position(int ci, int cj, int gp) const {
    const auto [xi, eta] = gp_local(gp);
    return {(ci + xi) * hx(), (cj + eta) * hy()};
  }
  double layer_x3(int layer) const { return layers_.points[layer]; }
  double layer_weight(int layer) const { return layers_.weights[layer]; }

  bool node_on_gamma_d(int i, int j) const {
    return ((gamma_d_ & kLeft) && i == 0) || ((gamma_d_ & kRight) && i == nx_) ||
           ((gamma_d_ & kBottom) && j == 0) || ((gamma_d_ & kTop) && j == ny_);
  }

  /// The clamped part meets the rest of the boundary in exactly two points
  /// only when it is a single edge.
  bool single_edge_gamma_d() const {
    const unsigned g = gamma_d_;
    return g == kLeft || g == kRight || g == kBottom || g == kTop;
  }

  bool operator==(const Grid& o) const {
    return lx_ == o.lx_ && ly_ == o.ly_ && nx_ == o.nx_ && ny_ == o.ny_ &&
           nz_ == o.nz_ && gamma_d_ == o.gamma_d_ && order_ == o.order_;
  }

 private:
  double lx_, ly_;
  int nx_, ny_, nz_;
  unsigned gamma_d_;
  int order_;
  QuadratureRule inplane_;
  QuadratureRule layers_;
};

/// (u, v, p) on a grid. u holds (u1, u2) per node, v holds
/// (v, v_1, v_2, v_12) per node.
struct PlateState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  std::vector<DeviatoricTensor> p;

  static PlateState zero(const Grid& g) {
    PlateState s;
    s.u = Eigen::VectorXd::Zero(2 * g.num_nodes());
    s.v = Eigen::VectorXd::Zero(4 * g.num_nodes());
    s.p.assign(static_cast<std::size_t>(g.num_points()), DeviatoricTensor());
    return s;
  }

  bool compatible_with(const Grid& g) const {
    return u.size() == 2 * g.num_nodes() && v.size() == 4 * g.num_nodes() &&
           p.size() == static_cast<std::size_t>(g.num_points());
  }

  bool operator==(const PlateState& o) const {
    return u == o.u && v == o.v && p == o.p;
  }
};

// ---------------------------------------------------------------------------
// Shape functions

/// Shape function values and physical derivatives at one in-plane point of
/// a cell. u-local DOF 2c+k is component k at corner c; v-local DOF 4c+m is
/// Hermite DOF m at corner c. Corners: 0 = (i,j), 1 = (i+1,j), 2 = (i,j+1),
/// 3 = (i+1,j+1).
struct PointBasis {
  std::array<double, 4> n{};
  std::array<double, 4> n_x{};
  std::array<double, 4> n_y{};
  std::array<double, 16> w{};
  std::array<double, 16> w_x{};
  std::array<double, 16> w_y{};
  std::array<double, 16> w_xx{};
  std::array<double, 16> w_yy{};
  std::array<double, 16> w_xy{};
};

namespace detail {

// Cubic Hermite functions on [0,1] for a corner at side a in {0,1}:
// value function (d = 0) or slope function (d = 1) scaled by h, and their
// derivatives of order k with respect to xi.
inline double hermite(int a, int d, int k, double xi, double h) {
  if (a == 0 && d == 0) {
    const double v[3] = {1 - 3 * xi * xi + 2 * xi * xi * xi, -6 * xi + 6 * xi * xi,
                         -6 + 12 * xi};
    return v[k];
  }
  if (a == 1 && d == 0) {
    const double v[3] = {3 * xi * xi - 2 * xi * xi * xi, 6 * xi - 6 * xi * xi,
                         6 - 12 * xi};
    return v[k];
  }
  if (a == 0) {
    const double v[3] = {xi - 2 * xi * xi + xi * xi * xi, 1 - 4 * xi + 3 * xi * xi,
                         -4 + 6 * xi};
    return h * v[k];
  }
  const double v[3] = {-xi * xi + xi * xi * xi, -2 * xi + 3 * xi * xi, -2 + 6 * xi};
  return h * v[k];
}

}  // namespace detail

inline PointBasis point_basis(double xi, double eta, double hx, double hy) {
  PointBasis b;
  for (int c = 0; c < 4; ++c) {
    const int a = c & 1;
    const int bb = (c >> 1) & 1;
    const double fx = a ? xi : 1 - xi;
    const double fy = bb ? eta : 1 - eta;
    const double dfx = (a ? 1.0 : -1.0) / hx;
    const double dfy = (bb ? 1.0 : -1.0) / hy;
    b.n[c] = fx * fy;
    b.n_x[c] = dfx * fy;
    b.n_y[c] = fx * dfy;

    // Hermite DOF m: 0 value, 1 d/dx, 2 d/dy, 3 d2/dxdy.
    for (int m = 0; m < 4; ++m) {
      const int dx = m & 1;
      const int dy = (m >> 1) & 1;
      auto hxk = [&](int k) { return detail::hermite(a, dx, k, xi, hx) / std::pow(hx, k); };
      auto hyk = [&](int k) { return detail::hermite(bb, dy, k, eta, hy) / std::pow(hy, k); };
      const int l = 4 * c + m;
      b.w[l] = hxk(0) * hyk(0);
      b.w_x[l] = hxk(1) * hyk(0);
      b.w_y[l] = hxk(0) * hyk(1);
      b.w_xx[l] = hxk(2) * hyk(0);
      b.w_yy[l] = hxk(0) * hyk(2);
      b.w_xy[l] = hxk(1) * hyk(1);
    }
  }
  return b;
}

/// Shape data for every in-plane point of the reference cell (the grid is
/// uniform, so all cells share it) plus cell-to-node DOF maps.
class Discretization {
 public:
  explicit Discretization(const Grid& g) : grid_(g) {
    for (int gp = 0; gp < g.points_per_cell(); ++gp) {
      const auto [xi, eta] = g.gp_local(gp);
      basis_.push_back(point_basis(xi, eta, g.hx(), g.hy()));
    }
  }

  const Grid& grid() const { return grid_; }
  const PointBasis& basis(int gp) const { return basis_[gp]; }

  std::array<int, 4> cell_nodes(int ci, int cj) const {
    return {grid_.node(ci, cj), grid_.node(ci + 1, cj), grid_.node(ci, cj + 1),
            grid_.node(ci + 1, cj + 1)};
  }

 private:
  Grid grid_;
  std::vector<PointBasis> basis_;
};

/// Kinematic quantities of (u, v) at one in-plane point.
struct PointKinematics {
  Sym2 sym_grad_u;
  Vec2 grad_v;
  Sym2 hess_v;
};

inline PointKinematics point_kinematics(const Discretization& disc,
                                        const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& v, int ci, int cj,
                                        int gp) {
  const PointBasis& b = disc.basis(gp);
  const auto nodes = disc.cell_nodes(ci, cj);
  double ux = 0, uy = 0, vx = 0, vy = 0;  // du1/dx, du2/dy, du1/dy, du2/dx
  double gx = 0, gy = 0, kxx = 0, kyy = 0, kxy = 0;
  for (int c = 0; c < 4; ++c) {
    const double u1 = u(2 * nodes[c]);
    const double u2 = u(2 * nodes[c] + 1);
    ux += b.n_x[c] * u1;
    uy += b.n_y[c] * u1;
    vx += b.n_x[c] * u2;
    vy += b.n_y[c] * u2;
    for (int m = 0; m < 4; ++m) {
      const double d = v(4 * nodes[c] + m);
      const int l = 4 * c + m;
      gx += b.w_x[l] * d;
      gy += b.w_y[l] * d;
      kxx += b.w_xx[l] * d;
      kyy += b.w_yy[l] * d;
      kxy += b.w_xy[l] * d;
    }
  }
  PointKinematics k;
  k.sym_grad_u = Sym2(ux, vy, 0.5 * (uy + vx));
  k.grad_v = Vec2(gx, gy);
  k.hess_v = Sym2(kxx, kyy, kxy);
  return k;
}

/// Driving strain sym grad u + (L/2) grad v (x) grad v - x3 hess v.
inline Sym2 driving_strain(const PointKinematics& k, double l, double x3) {
  const Vec2& g = k.grad_v;
  const Sym2 vk(0.5 * l * g(0) * g(0), 0.5 * l * g(1) * g(1), 0.5 * l * g(0) * g(1));
  return k.sym_grad_u + vk - k.hess_v * x3;
}

/// Iterates over (cell, in-plane point) pairs in storage order.
template <class F>
void for_each_inplane_point(const Grid& g, F&& f) {
  for (int cj = 0; cj < g.ny(); ++cj)
    for (int ci = 0; ci < g.nx(); ++ci)
      for (int gp = 0; gp < g.points_per_cell(); ++gp) f(ci, cj, gp);
}

// ---------------------------------------------------------------------------
// Operations

/// Driving strain (without p') at every (cell, point, layer), indexed like
/// PlateState::p.
inline std::vector<Sym2> assemble_strain(const Discretization& disc,
                                         const PlateState& s, Alpha alpha) {
  const Grid& g = disc.grid();
  std::vector<Sym2> out(static_cast<std::size_t>(g.num_points()));
  const double l = l_alpha(alpha);
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const PointKinematics k = point_kinematics(disc, s.u, s.v, ci, cj, gp);
    for (int layer = 0; layer < g.nz(); ++layer)
      out[g.point_index(g.cell(ci, cj), gp, layer)] =
          driving_strain(k, l, g.layer_x3(layer));
  });
  return out;
}

struct EnergyParts {
  double elastic = 0.0;
  double hardening = 0.0;
  double total() const { return elastic + hardening; }
};

inline double plane_energy(const Eigen::Matrix3d& d, const Sym2& e) {
  const Eigen::Vector3d v(e(0, 0), e(1, 1), 2.0 * e(0, 1));
  return 0.5 * v.dot(d * v);
}

/// Sum of w Q2(E - p') over all quadrature points.
inline double elastic_energy(const Discretization& disc, const PlateState& s,
                             const Eigen::Matrix3d& plane_d, Alpha alpha) {
  const Grid& g = disc.grid();
  const double l = l_alpha(alpha);
  double sum = 0.0;
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const PointKinematics k = point_kinematics(disc, s.u, s.v, ci, cj, gp);
    const double wa = g.gp_weight(gp);
    for (int layer = 0; layer < g.nz(); ++layer) {
      const DeviatoricTensor& p = s.p[g.point_index(g.cell(ci, cj), gp, layer)];
      sum += wa * g.layer_weight(layer) *
             plane_energy(plane_d, driving_strain(k, l, g.layer_x3(layer)) - p.minor2());
    }
  });
  return sum;
}

inline double hardening_energy(const Grid& g, const std::vector<DeviatoricTensor>& p,
                               const HardeningForm& h) {
  double sum = 0.0;
  for (int c = 0; c < g.num_cells(); ++c)
    for (int gp = 0; gp < g.points_per_cell(); ++gp)
      for (int layer = 0; layer < g.nz(); ++layer)
        sum += g.gp_weight(gp) * g.layer_weight(layer) *
               B_eval(h, p[g.point_index(c, gp, layer)]);
  return sum;
}

/// Elastic part sum w Q2(E - p') and hardening part sum w B(p).
inline EnergyParts total_energy(const Discretization& disc, const PlateState& s,
                                const IsotropicElasticity& el,
                                const HardeningForm& h, Alpha alpha) {
  return {elastic_energy(disc, s, plane_stiffness(el), alpha),
          hardening_energy(disc.grid(), s.p, h)};
}

/// Sum of w H_D(p_new - p_old): one term of the discrete H_D-dissipation.
inline double dissipation_increment(const Grid& g,
                                    const std::vector<DeviatoricTensor>& p_new,
                                    const std::vector<DeviatoricTensor>& p_old,
                                    const DissipationDensity& d) {
  const auto n = static_cast<std::size_t>(g.num_points());
  if (p_new.size() != n || p_old.size() != n)
    throw GridMismatch("dissipation_increment: plastic fields do not match grid");
  double sum = 0.0;
  for (int c = 0; c < g.num_cells(); ++c)
    for (int gp = 0; gp < g.points_per_cell(); ++gp)
      for (int layer = 0; layer < g.nz(); ++layer) {
        const int i = g.point_index(c, gp, layer);
        sum += g.gp_weight(gp) * g.layer_weight(layer) * H_eval(d, p_new[i] - p_old[i]);
      }
  return sum;
}

/// Nodal interpolant of the unscaled boundary data (u0(x'), v0(x')) on the
/// whole grid. Scaled by s(t) it is the lifting of the Dirichlet data.
struct Lifting {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

inline Lifting interpolate_data(const Grid& g, const BoundaryTrajectory& traj) {
  Lifting out{Eigen::VectorXd::Zero(2 * g.num_nodes()),
              Eigen::VectorXd::Zero(4 * g.num_nodes())};
  for (int j = 0; j <= g.ny(); ++j)
    for (int i = 0; i <= g.nx(); ++i) {
      const int n = g.node(i, j);
      const double x1 = i * g.hx(), x2 = j * g.hy();
      out.u(2 * n) = traj.u1().value(x1, x2);
      out.u(2 * n + 1) = traj.u2().value(x1, x2);
      out.v(4 * n) = traj.v().value(x1, x2);
      out.v(4 * n + 1) = traj.v().derivative(1, 0, x1, x2);
      out.v(4 * n + 2) = traj.v().derivative(0, 1, x1, x2);
      out.v(4 * n + 3) = traj.v().derivative(1, 1, x1, x2);
    }
  return out;
}

/// Nodes on the clamped edges, in node order.
inline std::vector<int> gamma_d_nodes(const Grid& g) {
  std::vector<int> out;
  for (int j = 0; j <= g.ny(); ++j)
    for (int i = 0; i <= g.nx(); ++i)
      if (g.node_on_gamma_d(i, j)) out.push_back(g.node(i, j));
  return out;
}

/// Sets u, v and all Hermite derivative DOFs at clamped nodes to the data
/// at time t. Other DOFs are left alone.
inline PlateState apply_boundary(const Grid& g, PlateState s,
                                 const BoundaryTrajectory& traj, double t) {
  const double st = traj.s(t);
  for (int j = 0; j <= g.ny(); ++j)
    for (int i = 0; i <= g.nx(); ++i) {
      if (!g.node_on_gamma_d(i, j)) continue;
      const int n = g.node(i, j);
      const double x1 = i * g.hx(), x2 = j * g.hy();
      s.u(2 * n) = st * traj.u1().value(x1, x2);
      s.u(2 * n + 1) = st * traj.u2().value(x1, x2);
      s.v(4 * n) = st * traj.v().value(x1, x2);
      s.v(4 * n + 1) = st * traj.v().derivative(1, 0, x1, x2);
      s.v(4 * n + 2) = st * traj.v().derivative(0, 1, x1, x2);
      s.v(4 * n + 3) = st * traj.v().derivative(1, 1, x1, x2);
    }
  return s;
}

/// Power of the boundary loading: sum of w C2(E - p') : [grad du0/dt +
/// L grad dv0/dt (x) grad v - x3 hess dv0/dt], with the data rate taken
/// from the given side of t. Only the plane block enters since the third
/// row and column of C2(.) vanish.
inline double work_rate(const Discretization& disc, const PlateState& s,
                        const BoundaryTrajectory& traj, const Lifting& lift,
                        const IsotropicElasticity& el, Alpha alpha, double t,
                        Side side) {
  const double rate = traj.s_rate(t, side);
  if (rate == 0.0) return 0.0;
  const Grid& g = disc.grid();
  const Eigen::Matrix3d d = plane_stiffness(el);
  const double l = l_alpha(alpha);
  double sum = 0.0;
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const PointKinematics k = point_kinematics(disc, s.u, s.v, ci, cj, gp);
    const PointKinematics kd = point_kinematics(disc, lift.u, lift.v, ci, cj, gp);
    const Vec2& gv = k.grad_v;
    const Vec2& gd = kd.grad_v;
    const Sym2 vk(l * gd(0) * gv(0), l * gd(1) * gv(1),
                  0.5 * l * (gd(0) * gv(1) + gd(1) * gv(0)));
    const double wa = g.gp_weight(gp);
    for (int layer = 0; layer < g.nz(); ++layer) {
      const double x3 = g.layer_x3(layer);
      const DeviatoricTensor& p = s.p[g.point_index(g.cell(ci, cj), gp, layer)];
      const Sym2 e = driving_strain(k, l, x3) - p.minor2();
      const Eigen::Vector3d ev(e(0, 0), e(1, 1), 2.0 * e(0, 1));
      const Eigen::Vector3d stress = d * ev;  // (s11, s22, s12)
      const Sym2 rate_strain = (kd.sym_grad_u + vk - kd.hess_v * x3) * rate;
      sum += wa * g.layer_weight(layer) *
             (stress(0) * rate_strain(0, 0) + stress(1) * rate_strain(1, 1) +
              2.0 * stress(2) * rate_strain(0, 1));
    }
  });
  return sum;
}

}  // namespace plateplast
