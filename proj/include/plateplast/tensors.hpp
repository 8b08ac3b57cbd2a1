#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace plateplast {

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Symmetric 2x2 matrix. Symmetry holds exactly: the only way in is through
/// symmetrization, and (a + b) / 2 is commutative in IEEE arithmetic.
class Sym2 {
 public:
  Sym2() : m_(Mat2::Zero()) {}
  explicit Sym2(const Mat2& m) : m_(0.5 * (m + m.transpose())) {}
  Sym2(double a11, double a22, double a12) {
    m_ << a11, a12, a12, a22;
  }

  static Sym2 identity() { return Sym2(1.0, 1.0, 0.0); }

  const Mat2& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  double norm() const { return m_.norm(); }
  double dot(const Sym2& o) const { return (m_.array() * o.m_.array()).sum(); }

  Sym2 operator+(const Sym2& o) const { return Sym2(m_ + o.m_); }
  Sym2 operator-(const Sym2& o) const { return Sym2(m_ - o.m_); }
  Sym2 operator*(double c) const { return Sym2(c * m_); }
  friend Sym2 operator*(double c, const Sym2& s) { return s * c; }

 private:
  Mat2 m_;
};

class Sym3 {
 public:
  Sym3() : m_(Mat3::Zero()) {}
  explicit Sym3(const Mat3& m) : m_(0.5 * (m + m.transpose())) {}

  static Sym3 identity() { return Sym3(Mat3::Identity()); }

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  double norm() const { return m_.norm(); }
  double dot(const Mat3& o) const { return (m_.array() * o.array()).sum(); }

  /// Upper-left 2x2 block.
  Sym2 block2() const { return Sym2(Mat2(m_.topLeftCorner<2, 2>())); }

  Sym3 operator+(const Sym3& o) const { return Sym3(m_ + o.m_); }
  Sym3 operator-(const Sym3& o) const { return Sym3(m_ - o.m_); }
  Sym3 operator*(double c) const { return Sym3(c * m_); }
  friend Sym3 operator*(double c, const Sym3& s) { return s * c; }

 private:
  Mat3 m_;
};

/// Pads a 2x2 matrix with zeros in the third row and column.
inline Mat3 embed(const Mat2& f) {
  Mat3 out = Mat3::Zero();
  out.topLeftCorner<2, 2>() = f;
  return out;
}

inline Mat3 embed(const Sym2& f) { return embed(f.matrix()); }

inline double frobenius_dot(const Mat3& a, const Mat3& b) {
  return (a.array() * b.array()).sum();
}

/// Symmetric trace-free 3x3 matrix stored as (p11, p22, p12, p13, p23).
/// p33 is reconstructed as -(p11 + p22), so the trace vanishes by type.
class DeviatoricTensor {
 public:
  DeviatoricTensor() : c_{0.0, 0.0, 0.0, 0.0, 0.0} {}
  DeviatoricTensor(double p11, double p22, double p12, double p13, double p23)
      : c_{p11, p22, p12, p13, p23} {}

  /// Deviatoric part of sym(m).
  static DeviatoricTensor project(const Mat3& m) {
    const Mat3 s = 0.5 * (m + m.transpose());
    const double mean = s.trace() / 3.0;
    return {s(0, 0) - mean, s(1, 1) - mean, s(0, 1), s(0, 2), s(1, 2)};
  }

  double p11() const { return c_[0]; }
  double p22() const { return c_[1]; }
  double p12() const { return c_[2]; }
  double p13() const { return c_[3]; }
  double p23() const { return c_[4]; }
  double p33() const { return -(c_[0] + c_[1]); }
  const std::array<double, 5>& components() const { return c_; }

  Mat3 matrix() const {
    Mat3 m;
    m << c_[0], c_[2], c_[3],
         c_[2], c_[1], c_[4],
         c_[3], c_[4], p33();
    return m;
  }

  /// p', the upper-left 2x2 minor.
  Sym2 minor2() const { return Sym2(c_[0], c_[1], c_[2]); }

  double norm_sq() const {
    const double p33v = p33();
    return c_[0] * c_[0] + c_[1] * c_[1] + p33v * p33v +
           2.0 * (c_[2] * c_[2] + c_[3] * c_[3] + c_[4] * c_[4]);
  }
  double norm() const { return std::sqrt(norm_sq()); }

  /// Coordinates in an orthonormal basis of the deviatoric subspace
  /// (Frobenius inner product), see deviatoric_basis().
  Vec5 coords() const {
    const double s2 = std::sqrt(2.0);
    const double s6 = std::sqrt(6.0);
    Vec5 x;
    // p11 = x0/s2 + x1/s6, p22 = -x0/s2 + x1/s6, p33 = -2 x1/s6
    x(0) = (c_[0] - c_[1]) / s2;
    x(1) = 3.0 * (c_[0] + c_[1]) / s6;
    x(2) = s2 * c_[2];
    x(3) = s2 * c_[3];
    x(4) = s2 * c_[4];
    return x;
  }

  static DeviatoricTensor from_coords(const Vec5& x) {
    const double s2 = std::sqrt(2.0);
    const double s6 = std::sqrt(6.0);
    return {x(0) / s2 + x(1) / s6, -x(0) / s2 + x(1) / s6, x(2) / s2,
            x(3) / s2, x(4) / s2};
  }

  DeviatoricTensor operator+(const DeviatoricTensor& o) const {
    return {c_[0] + o.c_[0], c_[1] + o.c_[1], c_[2] + o.c_[2],
            c_[3] + o.c_[3], c_[4] + o.c_[4]};
  }
  DeviatoricTensor operator-(const DeviatoricTensor& o) const {
    return {c_[0] - o.c_[0], c_[1] - o.c_[1], c_[2] - o.c_[2],
            c_[3] - o.c_[3], c_[4] - o.c_[4]};
  }
  DeviatoricTensor operator*(double s) const {
    return {s * c_[0], s * c_[1], s * c_[2], s * c_[3], s * c_[4]};
  }
  friend DeviatoricTensor operator*(double s, const DeviatoricTensor& p) {
    return p * s;
  }
  bool operator==(const DeviatoricTensor& o) const { return c_ == o.c_; }

 private:
  std::array<double, 5> c_;
};

/// Orthonormal basis of the symmetric trace-free 3x3 matrices, matching
/// DeviatoricTensor::coords().
inline const std::array<Mat3, 5>& deviatoric_basis() {
  static const std::array<Mat3, 5> basis = [] {
    std::array<Mat3, 5> b;
    const double s2 = std::sqrt(2.0);
    const double s6 = std::sqrt(6.0);
    for (auto& m : b) m.setZero();
    b[0](0, 0) = 1.0 / s2;
    b[0](1, 1) = -1.0 / s2;
    b[1](0, 0) = 1.0 / s6;
    b[1](1, 1) = 1.0 / s6;
    b[1](2, 2) = -2.0 / s6;
    b[2](0, 1) = b[2](1, 0) = 1.0 / s2;
    b[3](0, 2) = b[3](2, 0) = 1.0 / s2;
    b[4](1, 2) = b[4](2, 1) = 1.0 / s2;
    return b;
  }();
  return basis;
}

/// Orthonormal coordinates of the deviatoric projection of a 3x3 matrix.
inline Vec5 deviatoric_coords(const Mat3& m) {
  const auto& b = deviatoric_basis();
  Vec5 x;
  for (int i = 0; i < 5; ++i) x(i) = frobenius_dot(m, b[i]);
  return x;
}

}  // namespace plateplast
