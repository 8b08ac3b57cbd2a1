#pragma once

// Constitutive layer: elasticity tensor C and its quadratic form Q, the
// relaxation of the out-of-plane strain components (A, Q2, C2), the
// hardening form B and the dissipation density H_D.

#include "plateplast/errors.hpp"
#include "plateplast/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace plateplast {

/// Isotropic elasticity, C F = 2 mu sym F + lam tr(F) Id.
class IsotropicElasticity {
 public:
  IsotropicElasticity(double lam, double mu) : lam_(lam), mu_(mu) {
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw InvalidArgument("mu must be > 0");
    if (!(lam > 0.0) || !std::isfinite(lam))
      throw InvalidArgument("lam must be > 0");
  }

  double lam() const { return lam_; }
  double mu() const { return mu_; }

  /// Sharp constants with r |sym F|^2 <= Q(F) <= R |sym F|^2.
  double r_C() const { return mu_; }
  double R_C() const { return mu_ + 1.5 * lam_; }

 private:
  double lam_;
  double mu_;
};

inline Sym3 apply_C(const IsotropicElasticity& el, const Mat3& f) {
  const Mat3 s = 0.5 * (f + f.transpose());
  return Sym3(2.0 * el.mu() * s + el.lam() * f.trace() * Mat3::Identity());
}

inline double Q(const IsotropicElasticity& el, const Mat3& f) {
  return 0.5 * apply_C(el, f).dot(f);
}

/// Symmetric 3x3 matrix with upper-left block sym F whose third row and
/// column minimize Q. Solved through the 3x3 stationarity system
///   C(A F) : G = 0  for G in span{e1(x)e3 + e3(x)e1, e2(x)e3 + e3(x)e2, e3(x)e3},
/// so only apply_C is needed.
inline Sym3 relax_A(const IsotropicElasticity& el, const Mat2& f) {
  std::array<Mat3, 3> g;
  for (auto& m : g) m.setZero();
  g[0](0, 2) = g[0](2, 0) = 1.0;
  g[1](1, 2) = g[1](2, 1) = 1.0;
  g[2](2, 2) = 1.0;

  const Mat3 base = embed(Mat2(0.5 * (f + f.transpose())));
  const Sym3 c_base = apply_C(el, base);
  Eigen::Matrix3d system;
  Eigen::Vector3d rhs;
  for (int k = 0; k < 3; ++k) {
    rhs(k) = -c_base.dot(g[k]);
    for (int j = 0; j < 3; ++j) system(k, j) = apply_C(el, g[j]).dot(g[k]);
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(system);
  if (!lu.isInvertible())
    throw InternalError("relax_A: singular minimization system");
  const Eigen::Vector3d lambda = lu.solve(rhs);

  Mat3 out = base;
  for (int j = 0; j < 3; ++j) out += lambda(j) * g[j];
  return Sym3(out);
}

inline double Q2(const IsotropicElasticity& el, const Mat2& f) {
  return Q(el, relax_A(el, f).matrix());
}

inline double Q2(const IsotropicElasticity& el, const Sym2& f) {
  return Q2(el, f.matrix());
}

inline Sym3 apply_C2(const IsotropicElasticity& el, const Mat2& f) {
  return apply_C(el, relax_A(el, f).matrix());
}

inline Sym3 apply_C2(const IsotropicElasticity& el, const Sym2& f) {
  return apply_C2(el, f.matrix());
}

/// Q2 in engineering-Voigt form: Q2(e) = 1/2 v^T D v with
/// v = (e11, e22, 2 e12). Columns are built from apply_C2 so the matrix
/// follows whatever C is in use.
inline Eigen::Matrix3d plane_stiffness(const IsotropicElasticity& el) {
  // Unit engineering strains: e11 = 1; e22 = 1; 2 e12 = 1.
  const std::array<Sym2, 3> unit = {Sym2(1.0, 0.0, 0.0), Sym2(0.0, 1.0, 0.0),
                                    Sym2(0.0, 0.0, 0.5)};
  Eigen::Matrix3d d;
  for (int j = 0; j < 3; ++j) {
    const Sym3 s = apply_C2(el, unit[j]);
    d(0, j) = s(0, 0);
    d(1, j) = s(1, 1);
    d(2, j) = s(0, 1);
  }
  return 0.5 * (d + d.transpose());
}

// ---------------------------------------------------------------------------
// Hardening

/// Mandel coordinates (m11, m22, m33, s m23, s m13, s m12), s = sqrt 2.
inline Eigen::Matrix<double, 6, 1> mandel(const Mat3& m) {
  const double s = std::sqrt(2.0);
  Eigen::Matrix<double, 6, 1> v;
  v << m(0, 0), m(1, 1), m(2, 2), s * 0.5 * (m(1, 2) + m(2, 1)),
      s * 0.5 * (m(0, 2) + m(2, 0)), s * 0.5 * (m(0, 1) + m(1, 0));
  return v;
}

inline Mat3 from_mandel(const Eigen::Matrix<double, 6, 1>& v) {
  const double s = std::sqrt(2.0);
  Mat3 m;
  m << v(0), v(5) / s, v(4) / s,
       v(5) / s, v(1), v(3) / s,
       v(4) / s, v(3) / s, v(2);
  return m;
}

/// B(F) = 1/2 BB F : F. Isotropic mode BB = k Id; tensor mode takes a
/// symmetric positive definite 6x6 matrix in Mandel coordinates.
class HardeningForm {
 public:
  using Mat6 = Eigen::Matrix<double, 6, 6>;

  static HardeningForm isotropic(double k) {
    if (!(k > 0.0) || !std::isfinite(k))
      throw InvalidArgument("k must be > 0");
    return HardeningForm(k, std::nullopt, k);
  }

  static HardeningForm tensor(const Mat6& bb) {
    if (!bb.allFinite()) throw InvalidArgument("hardening tensor not finite");
    if ((bb - bb.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, bb.cwiseAbs().maxCoeff()))
      throw InvalidArgument("hardening tensor must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat6> eig(bb);
    const double c6 = eig.eigenvalues().minCoeff();
    if (!(c6 > 0.0))
      throw InvalidArgument("hardening tensor must be positive definite");
    return HardeningForm(0.0, bb, c6);
  }

  bool is_isotropic() const { return !tensor_.has_value(); }
  double k() const { return k_; }
  /// Smallest eigenvalue of BB; B(F) >= (c6/2)|F|^2.
  double c6() const { return c6_; }
  const std::optional<Mat6>& tensor_matrix() const { return tensor_; }

 private:
  HardeningForm(double k, std::optional<Mat6> t, double c6)
      : k_(k), tensor_(std::move(t)), c6_(c6) {}

  double k_;
  std::optional<Mat6> tensor_;
  double c6_;
};

inline Sym3 B_grad(const HardeningForm& h, const Mat3& f) {
  if (h.is_isotropic()) return Sym3(h.k() * f);
  return Sym3(from_mandel(*h.tensor_matrix() * mandel(f)));
}

inline double B_eval(const HardeningForm& h, const Mat3& f) {
  if (h.is_isotropic()) return 0.5 * h.k() * f.squaredNorm();
  const auto v = mandel(f);
  return 0.5 * v.dot(*h.tensor_matrix() * v);
}

inline double B_eval(const HardeningForm& h, const DeviatoricTensor& p) {
  if (h.is_isotropic()) return 0.5 * h.k() * p.norm_sq();
  return B_eval(h, p.matrix());
}

inline Sym3 B_grad(const HardeningForm& h, const DeviatoricTensor& p) {
  return B_grad(h, p.matrix());
}

// ---------------------------------------------------------------------------
// Dissipation

/// H_D on symmetric trace-free matrices. Frobenius mode is the von Mises
/// choice sigma_y |q|. Gauge mode is sigma_y max_i |<d_i, q>| for unit
/// directions d_i given in the orthonormal deviatoric coordinates; they
/// must span the five-dimensional space.
class DissipationDensity {
 public:
  enum class Mode { Frobenius, Gauge };

  static DissipationDensity frobenius(double sigma_y) {
    check_sigma(sigma_y);
    return DissipationDensity(sigma_y, {});
  }

  static DissipationDensity gauge(double sigma_y, std::vector<Vec5> dirs) {
    check_sigma(sigma_y);
    if (dirs.size() < 5)
      throw InvalidArgument("gauge mode needs at least 5 directions");
    Eigen::MatrixXd d(static_cast<Eigen::Index>(dirs.size()), 5);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const double n = dirs[i].norm();
      if (!(n > 0.0) || !std::isfinite(n))
        throw InvalidArgument("gauge direction must be nonzero");
      dirs[i] /= n;
      d.row(static_cast<Eigen::Index>(i)) = dirs[i].transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
    const double smin = svd.singularValues()(4);
    if (!(smin > 1e-10))
      throw InvalidArgument("gauge directions must span the deviatoric space");
    DissipationDensity out(sigma_y, std::move(dirs));
    out.gauge_smin_ = smin;
    return out;
  }

  Mode mode() const { return dirs_.empty() ? Mode::Frobenius : Mode::Gauge; }
  double sigma_y() const { return sigma_y_; }
  const std::vector<Vec5>& directions() const { return dirs_; }

  /// r_K |q| <= H_D(q) <= R_K |q|.
  double r_K() const {
    if (mode() == Mode::Frobenius) return sigma_y_;
    return sigma_y_ * gauge_smin_ /
           std::sqrt(static_cast<double>(dirs_.size()));
  }
  double R_K() const { return sigma_y_; }

 private:
  DissipationDensity(double s, std::vector<Vec5> dirs)
      : sigma_y_(s), dirs_(std::move(dirs)) {}

  // sigma_y = 0 is allowed: it is the rigid-plastic-free limit used by the
  // closed-form checks of the local solver.
  static void check_sigma(double s) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw InvalidArgument("sigma_y must be >= 0");
  }

  double sigma_y_;
  std::vector<Vec5> dirs_;
  double gauge_smin_ = 0.0;
};

inline double H_eval(const DissipationDensity& d, const DeviatoricTensor& q) {
  if (d.mode() == DissipationDensity::Mode::Frobenius)
    return d.sigma_y() * q.norm();
  const Vec5 x = q.coords();
  double m = 0.0;
  for (const auto& dir : d.directions()) m = std::max(m, std::abs(dir.dot(x)));
  return d.sigma_y() * m;
}

}  // namespace plateplast
