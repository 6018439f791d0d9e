#pragma once

// Lattice + external harmonic trap model and the maps between the real trap
// controls (omega, q0) and the virtual harmonic trap (omega_tilde, x_min).

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "latsta/error.hpp"

namespace latsta {

inline constexpr double pi = std::numbers::pi;

/// Lattice and particle constants. Defaults use hbar = m = sigma = 1.
struct ModelParams {
  double hbar = 1.0;
  double mass = 1.0;
  double sigma = 1.0;
  double U0 = 1.0;

  /// Parameter point fixed by the lattice depth in units of hbar*Omega,
  /// with hbar = m = sigma = 1 (then Omega = 2*ratio and U0 = 2*ratio^2).
  static ModelParams from_depth_ratio(double depth_ratio) {
    if (!(depth_ratio > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "depth ratio must be positive");
    }
    ModelParams p;
    p.U0 = 2.0 * depth_ratio * depth_ratio;
    return p;
  }

  void validate() const {
    if (!(hbar > 0.0) || !(mass > 0.0) || !(sigma > 0.0) || !(U0 > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "hbar, mass, sigma and U0 must all be positive");
    }
  }

  /// Harmonic frequency of a single lattice well.
  double Omega() const { return std::sqrt(2.0 * U0 / (sigma * sigma * mass)); }
  /// Time unit T = 1/Omega.
  double T() const { return 1.0 / Omega(); }
  /// Lattice period (distance between neighbouring wells).
  double site_spacing() const { return pi * sigma; }
  /// Interaction unit hbar*Omega*sigma.
  double g_unit() const { return hbar * Omega() * sigma; }
  double depth_ratio() const { return U0 / (hbar * Omega()); }
};

inline double lattice_frequency(const ModelParams& params) {
  params.validate();
  return params.Omega();
}

/// Real and virtual trap parameters at one instant.
struct TrapState {
  double omega = 0.0;
  double q0 = 0.0;
  double omega_tilde = 0.0;
  double x_min = 0.0;
};

/// V(x) for a signed squared trap frequency; negative values describe an
/// expulsive (inverted) harmonic term.
inline double full_potential_sq(double x, double omega_sq, double q0, const ModelParams& params) {
  const double s = std::sin(x / params.sigma);
  const double d = x - q0;
  return 0.5 * params.mass * omega_sq * d * d + params.U0 * s * s;
}

inline double full_potential(double x, const TrapState& trap, const ModelParams& params) {
  return full_potential_sq(x, trap.omega * trap.omega, trap.q0, params);
}

/// dV/dx and d2V/dx2 of the full potential.
inline double full_potential_slope(double x, double omega_sq, double q0, const ModelParams& p) {
  return p.mass * omega_sq * (x - q0) + p.U0 / p.sigma * std::sin(2.0 * x / p.sigma);
}

inline double full_potential_curvature(double x, double omega_sq, const ModelParams& p) {
  return p.mass * omega_sq + 2.0 * p.U0 / (p.sigma * p.sigma) * std::cos(2.0 * x / p.sigma);
}

/// Squared real trap frequency for a virtual trap (omega_tilde^2, x_min).
/// Signed: negative means the virtual trap is unreachable with a confining beam.
inline double real_omega_sq(double omega_tilde_sq, double x_min, const ModelParams& params) {
  const double Om = params.Omega();
  return omega_tilde_sq - Om * Om * std::cos(2.0 * x_min / params.sigma);
}

/// Real trap centre that puts the potential minimum at x_min for the given
/// (signed) squared real frequency.
inline double real_center(double omega_sq, double x_min, const ModelParams& params) {
  const double Om = params.Omega();
  const double u = x_min / params.sigma;
  const double sc = std::sin(u) * std::cos(u);
  if (omega_sq == 0.0) {
    if (std::abs(sc) > 1e-12) {
      throw Error(ErrorKind::DegenerateCenter,
                  "trap frequency vanishes away from a lattice extremum; q0 undefined");
    }
    return x_min;
  }
  return x_min + params.sigma * (Om * Om / omega_sq) * sc;
}

inline TrapState real_from_virtual(double omega_tilde, double x_min, const ModelParams& params) {
  params.validate();
  const double w2 = real_omega_sq(omega_tilde * omega_tilde, x_min, params);
  const double Om = params.Omega();
  if (w2 < -1e-12 * Om * Om) {
    throw Error(ErrorKind::UnreachableControl, "virtual trap needs a negative squared real frequency");
  }
  const double w2c = std::max(w2, 0.0);
  const double q0 = real_center(w2c, x_min, params);
  return TrapState{std::sqrt(w2c), q0, omega_tilde, x_min};
}

namespace detail {

// Golden-section search for a minimum of f on [a, b].
template <class F>
double golden_section(F&& f, double a, double b, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (std::abs(b - a) > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Locate the potential minimum belonging to the trap at q0 and return the
/// virtual trap parameters. The minimum is searched within half a lattice
/// period of q0; in strict mode more than one local minimum there is an error.
inline std::pair<double, double> virtual_from_real(const TrapState& trap, const ModelParams& params,
                                                   bool strict = false) {
  params.validate();
  const double w2 = trap.omega * trap.omega;
  const double half = 0.5 * pi * params.sigma;
  const double lo = trap.q0 - half;
  const double hi = trap.q0 + half;

  // Coarse scan for sign changes of the slope; each - to + change is a minimum.
  constexpr int n_scan = 4096;
  std::vector<std::pair<double, double>> brackets;
  double x_prev = lo;
  double s_prev = full_potential_slope(x_prev, w2, trap.q0, params);
  for (int i = 1; i <= n_scan; ++i) {
    const double x = lo + (hi - lo) * i / n_scan;
    const double s = full_potential_slope(x, w2, trap.q0, params);
    if (s_prev < 0.0 && s >= 0.0) brackets.emplace_back(x_prev, x);
    x_prev = x;
    s_prev = s;
  }
  if (brackets.empty()) {
    throw Error(ErrorKind::NoUniqueMinimum, "no local minimum within half a period of q0");
  }
  if (strict && brackets.size() > 1) {
    throw Error(ErrorKind::NoUniqueMinimum, "trap too weak: several wells near q0");
  }
  // Seeded at q0: take the bracket closest to the trap centre.
  auto best = brackets.front();
  for (const auto& b : brackets) {
    const double mb = 0.5 * (b.first + b.second);
    const double mbest = 0.5 * (best.first + best.second);
    if (std::abs(mb - trap.q0) < std::abs(mbest - trap.q0)) best = b;
  }
  auto V = [&](double x) { return full_potential_sq(x, w2, trap.q0, params); };
  double x = detail::golden_section(V, best.first, best.second, 1e-7 * params.sigma);
  // Newton polish on the slope; function values alone cannot resolve the
  // minimum below ~sqrt(machine eps).
  for (int it = 0; it < 50; ++it) {
    const double c = full_potential_curvature(x, w2, params);
    if (!(c > 0.0)) break;
    const double step = full_potential_slope(x, w2, trap.q0, params) / c;
    x -= step;
    if (std::abs(step) <= 1e-15 * params.sigma * (1.0 + std::abs(x / params.sigma))) break;
  }
  const double curv = full_potential_curvature(x, w2, params);
  if (!(curv > 0.0)) {
    throw Error(ErrorKind::NoUniqueMinimum, "located extremum is not a minimum");
  }
  return {std::sqrt(curv / params.mass), x};
}

}  // namespace latsta
