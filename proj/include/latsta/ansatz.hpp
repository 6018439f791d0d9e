#pragma once

// Scaling ansatz for the harmonic-approximation GPE:
//   psi(x,t) = exp(-i a2 x^2 + i a1 x - beta - i mu tau) phi((x - q_c)/rho)
// with phi the stationary state of the initial virtual trap.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "latsta/error.hpp"
#include "latsta/grid.hpp"
#include "latsta/model.hpp"
#include "latsta/polynomial.hpp"
#include "latsta/protocol.hpp"
#include "latsta/stationary.hpp"

namespace latsta {

struct AnsatzPoint {
  double alpha_1 = 0.0;
  double alpha_2 = 0.0;
  double beta = 0.0;
  double tau = 0.0;
};

class AnsatzParams {
 public:
  using PathFn = std::function<double(double)>;

  AnsatzParams(AuxiliaryPolynomial rho, AuxiliaryPolynomial qc, double mu, PathFn x0_path,
               const ModelParams& params)
      : rho_(std::move(rho)), qc_(std::move(qc)), mu_(mu), x0_(std::move(x0_path)), p_(params) {
    if (mu_ == 0.0) throw Error(ErrorKind::InvalidArgument, "chemical potential must be non-zero");
    const double tf = rho_.t_f();
    for (int i = 0; i <= 1024; ++i) {
      if (!(rho_.value(tf * i / 1024.0) > 0.0)) throw Error(ErrorKind::RhoVanishes, "rho(t) <= 0");
    }
  }

  double mu() const { return mu_; }
  const AuxiliaryPolynomial& rho() const { return rho_; }
  const AuxiliaryPolynomial& qc() const { return qc_; }
  double x0(double t) const { return x0_(t); }

  double alpha_1(double t) const {
    const double r = rho_.value(t);
    return p_.mass / (p_.hbar * r) * (qc_.d1(t) * r - qc_.value(t) * rho_.d1(t));
  }
  double alpha_2(double t) const { return -p_.mass * rho_.d1(t) / (2.0 * rho_.value(t) * p_.hbar); }
  double beta(double t) const { return 0.5 * std::log(rho_.value(t)); }

  double alpha_1_rate(double t) const {
    const double r = rho_.value(t), rd = rho_.d1(t), rdd = rho_.d2(t);
    const double q = qc_.value(t), qd = qc_.d1(t), qdd = qc_.d2(t);
    return p_.mass / p_.hbar * (qdd - (qd * rd + q * rdd) / r + q * rd * rd / (r * r));
  }
  double alpha_2_rate(double t) const {
    const double r = rho_.value(t), rd = rho_.d1(t);
    return -p_.mass / (2.0 * p_.hbar) * (rho_.d2(t) / r - rd * rd / (r * r));
  }
  double beta_rate(double t) const { return 0.5 * rho_.d1(t) / rho_.value(t); }

  /// d tau / dt, the integrand of the phase time.
  double tau_rate(double t) const {
    const double m = p_.mass;
    const double r = rho_.value(t), rd = rho_.d1(t), rdd = rho_.d2(t);
    const double q = qc_.value(t), qd = qc_.d1(t), qdd = qc_.d2(t);
    const double x0 = x0_(t);
    const double bracket = 2.0 * mu_ + m * q * q * rd * rd - 2.0 * m * r * q * rd * qd + m * r * r * qd * qd -
                           m * r * q * q * rdd + m * r * r * q * qdd + m * r * r * x0 * qdd;
    return bracket / (2.0 * p_.hbar * mu_ * r * r);
  }

  double tau(double t) const {
    if (t == 0.0) return 0.0;
    auto f = [this](double s) { return tau_rate(s); };
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, t, 15, 1e-13);
  }

  AnsatzPoint at(double t) const { return {alpha_1(t), alpha_2(t), beta(t), tau(t)}; }

 private:
  AuxiliaryPolynomial rho_;
  AuxiliaryPolynomial qc_;
  double mu_;
  PathFn x0_;
  ModelParams p_;
};

inline AnsatzParams ansatz_params(const AuxiliaryPolynomial& rho, const AuxiliaryPolynomial& qc, double mu,
                                  AnsatzParams::PathFn x0_path, const ModelParams& params) {
  return AnsatzParams(rho, qc, mu, std::move(x0_path), params);
}

struct AnsatzResidualOptions {
  int probes = 10;
  std::size_t n_points = 4096;
  /// Half width of the scaled-coordinate grid in harmonic lengths.
  double half_width = 40.0;
};

/// Maximum relative L2 residual of the harmonic GPE evaluated on the ansatz
/// at evenly spaced probe times. The ansatz is sampled on a grid that follows
/// x = q_c + rho * x~. Writing psi = exp(i theta) A with the quadratic phase
/// theta, derivatives of the envelope A are spectral and those of theta are
/// exact; the time derivative is analytic.
inline double ansatz_residual(const ControlProtocol& protocol, const AuxiliaryPolynomial& rho,
                              const AuxiliaryPolynomial& qc, const ModelParams& params, double g0,
                              const AnsatzResidualOptions& opt = {}) {
  if (!protocol.has_virtual()) {
    throw Error(ErrorKind::InvalidArgument, "ansatz residual needs the harmonic (virtual) trap");
  }
  if (opt.probes < 1 || opt.n_points < 64) throw Error(ErrorKind::InvalidArgument, "bad residual options");
  const double m = params.mass, hb = params.hbar;
  const double w02 = protocol.virtual_at(0.0).omega_tilde_sq;
  if (!(w02 > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial virtual trap must be confining");
  const double ell = std::sqrt(hb / (m * std::sqrt(w02)));
  const Grid base{-opt.half_width * ell, opt.half_width * ell, opt.n_points};
  GroundStateOptions gso;
  gso.require_localized = false;
  const auto phi = ground_state([&](double x) { return 0.5 * m * w02 * x * x; }, g0, base, 0.0, params, gso);

  const std::size_t n = base.n_points;
  FftBuffer buf(n);
  std::vector<cplx> dphi(n);
  {
    buf.load(phi.psi.amplitudes());
    buf.forward();
    for (std::size_t j = 0; j < n; ++j) buf[j] *= cplx(0.0, base.k(j)) / static_cast<double>(n);
    buf.backward();
    buf.store(dphi);
  }
  std::vector<cplx> ddphi(n);
  {
    buf.load(phi.psi.amplitudes());
    buf.forward();
    for (std::size_t j = 0; j < n; ++j) buf[j] *= -base.k(j) * base.k(j) / static_cast<double>(n);
    buf.backward();
    buf.store(ddphi);
  }

  const AnsatzParams ap(rho, qc, phi.mu, [&protocol](double t) { return protocol.virtual_at(t).x_min; },
                        params);
  const double tf = protocol.t_f();
  double worst = 0.0;
  for (int k = 0; k < opt.probes; ++k) {
    const double t = opt.probes == 1 ? 0.0 : tf * k / (opt.probes - 1);
    const double r = rho.value(t), rd = rho.d1(t);
    const double q = qc.value(t), qd = qc.d1(t);
    const double a1 = ap.alpha_1(t), a2 = ap.alpha_2(t), b = ap.beta(t);
    const double a1d = ap.alpha_1_rate(t), a2d = ap.alpha_2_rate(t), bd = ap.beta_rate(t);
    const double tau = ap.tau(t), taud = ap.tau_rate(t);
    const auto v = protocol.virtual_at(t);
    const double g = protocol.at(t).g;
    const double amp = std::exp(-b);

    double res2 = 0.0, norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xt = base.x(j);
      const double x = q + r * xt;
      const cplx e = std::exp(cplx(0.0, -a2 * x * x + a1 * x - phi.mu * tau));
      // Envelope A(x) = exp(-beta) phi((x - q_c) / rho) and its x derivatives.
      const cplx A = amp * phi.psi[j];
      const cplx A1 = amp * dphi[j] / r;
      const cplx A2 = amp * ddphi[j] / (r * r);
      const double th1 = -2.0 * a2 * x + a1;
      const double th2 = -2.0 * a2;
      const cplx psi = e * A;
      const cplx lap = e * (A2 + 2.0 * cplx(0.0, th1) * A1 + (cplx(0.0, th2) - th1 * th1) * A);

      const double theta_t = -a2d * x * x + a1d * x - phi.mu * taud;
      const double xt_t = -qd / r - xt * rd / r;
      const cplx psi_t = cplx(-bd, theta_t) * psi + e * amp * dphi[j] * xt_t;

      const double d = x - v.x_min;
      const double pot = 0.5 * m * v.omega_tilde_sq * d * d + g * std::norm(psi);
      const cplx h = -hb * hb / (2.0 * m) * lap + pot * psi;
      res2 += std::norm(cplx(0.0, hb) * psi_t - h);
      norm2 += std::norm(psi);
    }
    const double rel = std::sqrt(res2 / norm2) / (std::abs(phi.mu) / (r * r));
    if (!std::isfinite(rel)) throw Error(ErrorKind::NanDetected, "ansatz residual is not finite");
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace latsta
