#pragma once

// Dirichlet data on the clamped edges: polynomial fields in x' scaled by a
// scalar time profile s(t).

#include "plateplast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace plateplast {

/// Polynomial in (x1, x2): sum of c * x1^i * x2^j.
class Poly2D {
 public:
  struct Term {
    double coef;
    int i;
    int j;
  };

  Poly2D() = default;
  explicit Poly2D(std::vector<Term> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_)
      if (t.i < 0 || t.j < 0 || !std::isfinite(t.coef))
        throw InvalidArgument("polynomial term with negative power or bad coefficient");
  }

  static Poly2D monomial(double c, int i, int j) { return Poly2D({{c, i, j}}); }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const Term& t) { return t.coef == 0.0; });
  }

  /// Partial derivative of order (a, b) at (x1, x2).
  double derivative(int a, int b, double x1, double x2) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
      if (t.i < a || t.j < b) continue;
      double c = t.coef;
      for (int k = 0; k < a; ++k) c *= (t.i - k);
      for (int k = 0; k < b; ++k) c *= (t.j - k);
      sum += c * std::pow(x1, t.i - a) * std::pow(x2, t.j - b);
    }
    return sum;
  }

  double value(double x1, double x2) const { return derivative(0, 0, x1, x2); }

 private:
  std::vector<Term> terms_;
};

enum class Side { Left, Right };

/// Scalar time profile s(t) on [0, T].
class TimeProfile {
 public:
  enum class Kind { Linear, RampHold, PiecewiseLinear };

  /// s(t) = t / T.
  static TimeProfile linear(double T) {
    check_horizon(T);
    return TimeProfile(Kind::Linear, T, T, {});
  }

  /// s(t) = min(t / t_ramp, 1).
  static TimeProfile ramp_hold(double T, double t_ramp) {
    check_horizon(T);
    if (!(t_ramp > 0.0) || !(t_ramp <= T))
      throw InvalidArgument("t_ramp must lie in (0, T]");
    return TimeProfile(Kind::RampHold, T, t_ramp, {});
  }

  /// Linear interpolation through (t_k, s_k); t_0 = 0, last t_k = T.
  static TimeProfile piecewise_linear(std::vector<std::pair<double, double>> bp) {
    if (bp.size() < 2) throw InvalidArgument("need at least two breakpoints");
    if (bp.front().first != 0.0)
      throw InvalidArgument("first breakpoint must be at t = 0");
    for (std::size_t i = 1; i < bp.size(); ++i)
      if (!(bp[i].first > bp[i - 1].first))
        throw InvalidArgument("breakpoint times must increase strictly");
    const double T = bp.back().first;
    return TimeProfile(Kind::PiecewiseLinear, T, T, std::move(bp));
  }

  Kind kind() const { return kind_; }
  double horizon() const { return T_; }
  double t_ramp() const { return t_ramp_; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return bp_; }

  double value(double t) const {
    switch (kind_) {
      case Kind::Linear:
        return t / T_;
      case Kind::RampHold:
        return t >= t_ramp_ ? 1.0 : t / t_ramp_;
      case Kind::PiecewiseLinear: {
        if (t <= bp_.front().first) return bp_.front().second;
        if (t >= bp_.back().first) return bp_.back().second;
        const std::size_t k = segment(t, Side::Right);
        const auto& [t0, s0] = bp_[k];
        const auto& [t1, s1] = bp_[k + 1];
        return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
      }
    }
    return 0.0;
  }

  /// One-sided derivative; Side::Left uses the interval ending at t.
  double rate(double t, Side side) const {
    switch (kind_) {
      case Kind::Linear:
        return 1.0 / T_;
      case Kind::RampHold:
        if (t < t_ramp_ || (t == t_ramp_ && side == Side::Left))
          return 1.0 / t_ramp_;
        return 0.0;
      case Kind::PiecewiseLinear: {
        const std::size_t k = segment(t, side);
        const auto& [t0, s0] = bp_[k];
        const auto& [t1, s1] = bp_[k + 1];
        return (s1 - s0) / (t1 - t0);
      }
    }
    return 0.0;
  }

 private:
  TimeProfile(Kind k, double T, double tr, std::vector<std::pair<double, double>> bp)
      : kind_(k), T_(T), t_ramp_(tr), bp_(std::move(bp)) {}

  static void check_horizon(double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be > 0");
  }

  // Index k of the interval [t_k, t_{k+1}] used at t from the given side.
  std::size_t segment(double t, Side side) const {
    const std::size_t last = bp_.size() - 2;
    for (std::size_t k = 0; k <= last; ++k) {
      const double t1 = bp_[k + 1].first;
      if (t < t1 || (t == t1 && side == Side::Left)) return k;
    }
    return last;
  }

  Kind kind_;
  double T_;
  double t_ramp_;
  std::vector<std::pair<double, double>> bp_;
};

/// Strictly increasing C^1 bijections of [0, T] used to test rate
/// independence.
enum class Reparam { None, Square, SmoothStep };

inline double reparam_value(Reparam r, double t, double T) {
  const double x = t / T;
  switch (r) {
    case Reparam::None:
      return t;
    case Reparam::Square:
      return T * x * x;
    case Reparam::SmoothStep:
      return T * x * x * (3.0 - 2.0 * x);
  }
  return t;
}

inline double reparam_rate(Reparam r, double t, double T) {
  const double x = t / T;
  switch (r) {
    case Reparam::None:
      return 1.0;
    case Reparam::Square:
      return 2.0 * x;
    case Reparam::SmoothStep:
      return 6.0 * x * (1.0 - x);
  }
  return 1.0;
}

enum class LoadingFamily { Stretch, Bend, MixedPoly };

/// u0(t, x') = s(t) u0(x'), v0(t, x') = s(t) v0(x'), optionally with the
/// time argument reparametrized: s(phi(t)).
class BoundaryTrajectory {
 public:
  BoundaryTrajectory(LoadingFamily family, Poly2D u1, Poly2D u2, Poly2D v,
                     TimeProfile profile, Reparam reparam = Reparam::None)
      : family_(family), u1_(std::move(u1)), u2_(std::move(u2)),
        v_(std::move(v)), profile_(std::move(profile)), reparam_(reparam) {}

  /// u0 = (a x1, 0), v0 = 0.
  static BoundaryTrajectory stretch(double a, TimeProfile profile) {
    return BoundaryTrajectory(LoadingFamily::Stretch, Poly2D::monomial(a, 1, 0),
                              Poly2D(), Poly2D(), std::move(profile));
  }

  /// u0 = 0, v0 = b x1^2.
  static BoundaryTrajectory bend(double b, TimeProfile profile) {
    return BoundaryTrajectory(LoadingFamily::Bend, Poly2D(), Poly2D(),
                              Poly2D::monomial(b, 2, 0), std::move(profile));
  }

  static BoundaryTrajectory zero(double T) {
    return BoundaryTrajectory(LoadingFamily::MixedPoly, Poly2D(), Poly2D(),
                              Poly2D(), TimeProfile::linear(T));
  }

  BoundaryTrajectory with_reparam(Reparam r) const {
    BoundaryTrajectory out = *this;
    out.reparam_ = r;
    return out;
  }

  LoadingFamily family() const { return family_; }
  const Poly2D& u1() const { return u1_; }
  const Poly2D& u2() const { return u2_; }
  const Poly2D& v() const { return v_; }
  const TimeProfile& profile() const { return profile_; }
  Reparam reparam() const { return reparam_; }
  double horizon() const { return profile_.horizon(); }

  double s(double t) const {
    return profile_.value(reparam_value(reparam_, t, horizon()));
  }

  double s_rate(double t, Side side) const {
    const double T = horizon();
    return profile_.rate(reparam_value(reparam_, t, T), side) *
           reparam_rate(reparam_, t, T);
  }

  bool is_zero() const { return u1_.is_zero() && u2_.is_zero() && v_.is_zero(); }

 private:
  LoadingFamily family_;
  Poly2D u1_;
  Poly2D u2_;
  Poly2D v_;
  TimeProfile profile_;
  Reparam reparam_;
};

}  // namespace plateplast
