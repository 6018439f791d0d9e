#pragma once

#include <array>
#include <cstddef>

#include "latsta/error.hpp"

namespace latsta {

/// Boundary data for a quintic: value, first and second time derivative at
/// t = 0 and t = t_f.
struct BoundaryValues {
  double f0 = 0.0;
  double f1 = 0.0;
  double df0 = 0.0;
  double df1 = 0.0;
  double ddf0 = 0.0;
  double ddf1 = 0.0;
};

/// Polynomial in scaled time s = t / t_f, ascending coefficients.
class AuxiliaryPolynomial {
 public:
  static constexpr std::size_t max_terms = 6;

  AuxiliaryPolynomial() = default;
  AuxiliaryPolynomial(std::array<double, max_terms> coefficients, double t_f)
      : c_(coefficients), t_f_(t_f) {
    if (!(t_f > 0.0)) throw Error(ErrorKind::SingularSystem, "t_f must be positive");
  }

  static AuxiliaryPolynomial constant(double value, double t_f) {
    return AuxiliaryPolynomial({value, 0, 0, 0, 0, 0}, t_f);
  }

  const std::array<double, max_terms>& coefficients() const { return c_; }
  double t_f() const { return t_f_; }

  int degree() const {
    for (int k = static_cast<int>(max_terms) - 1; k > 0; --k) {
      if (c_[k] != 0.0) return k;
    }
    return 0;
  }

  /// d^order p / ds^order at scaled time s.
  double at_s(double s, int order = 0) const {
    double acc = 0.0;
    for (int k = static_cast<int>(max_terms) - 1; k >= order; --k) {
      double fall = 1.0;
      for (int j = 0; j < order; ++j) fall *= static_cast<double>(k - j);
      acc = acc * s + fall * c_[k];
    }
    return acc;
  }

  /// Time derivatives at physical time t.
  double value(double t) const { return at_s(t / t_f_, 0); }
  double d1(double t) const { return at_s(t / t_f_, 1) / t_f_; }
  double d2(double t) const { return at_s(t / t_f_, 2) / (t_f_ * t_f_); }
  double d3(double t) const { return at_s(t / t_f_, 3) / (t_f_ * t_f_ * t_f_); }

 private:
  std::array<double, max_terms> c_{};
  double t_f_ = 1.0;
};

/// Unique degree <= 5 polynomial meeting the six boundary conditions.
inline AuxiliaryPolynomial minimal_polynomial(const BoundaryValues& bc, double t_f) {
  if (!(t_f > 0.0)) throw Error(ErrorKind::SingularSystem, "t_f must be positive");
  // Derivatives with respect to s.
  const double v0 = bc.df0 * t_f;
  const double v1 = bc.df1 * t_f;
  const double w0 = bc.ddf0 * t_f * t_f;
  const double w1 = bc.ddf1 * t_f * t_f;

  const double a0 = bc.f0;
  const double a1 = v0;
  const double a2 = 0.5 * w0;
  const double A = bc.f1 - a0 - a1 - a2;
  const double B = v1 - a1 - 2.0 * a2;
  const double C = w1 - 2.0 * a2;
  const double a3 = 10.0 * A - 4.0 * B + 0.5 * C;
  const double a4 = -15.0 * A + 7.0 * B - C;
  const double a5 = 6.0 * A - 3.0 * B + 0.5 * C;
  return AuxiliaryPolynomial({a0, a1, a2, a3, a4, a5}, t_f);
}

}  // namespace latsta
