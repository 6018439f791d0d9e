#pragma once

// Inverse engineering of the transport controls from the auxiliary
// functions rho(t) and q_c(t), plus the adiabatic reference ramps.

#include <cmath>
#include <functional>

#include "latsta/error.hpp"
#include "latsta/model.hpp"
#include "latsta/polynomial.hpp"
#include "latsta/protocol.hpp"

namespace latsta {

using TimeFunction = std::function<double(double)>;

inline AuxiliaryPolynomial rho_profile(double omega_tilde_0, double omega_tilde_f, double t_f) {
  if (!(omega_tilde_0 > 0.0) || !(omega_tilde_f > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "virtual frequencies must be positive");
  }
  if (omega_tilde_0 == omega_tilde_f) return AuxiliaryPolynomial::constant(1.0, t_f);
  BoundaryValues bc;
  bc.f0 = 1.0;
  bc.f1 = std::sqrt(omega_tilde_0 / omega_tilde_f);
  return minimal_polynomial(bc, t_f);
}

/// Signed omega_tilde(t)^2 = -rho''/rho + omega_tilde_0^2 / rho^4.
inline TimeFunction omega_tilde_from_rho(const AuxiliaryPolynomial& rho, double omega_tilde_0,
                                         std::size_t check_points = 4096) {
  const double tf = rho.t_f();
  for (std::size_t i = 0; i < check_points; ++i) {
    const double t = tf * static_cast<double>(i) / (check_points - 1);
    if (!(rho.value(t) > 0.0)) {
      throw Error(ErrorKind::RhoVanishes, "rho(t) <= 0 at t = " + std::to_string(t));
    }
  }
  const double w02 = omega_tilde_0 * omega_tilde_0;
  return [rho, w02](double t) {
    const double r = rho.value(t);
    if (!(r > 0.0)) throw Error(ErrorKind::RhoVanishes, "rho(t) <= 0");
    const double r2 = r * r;
    return -rho.d2(t) / r + w02 / (r2 * r2);
  };
}

inline AuxiliaryPolynomial qc_profile(double displacement_length, double t_f, double origin = 0.0) {
  if (!(t_f > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_f must be positive");
  if (displacement_length == 0.0) return AuxiliaryPolynomial::constant(origin, t_f);
  BoundaryValues bc;
  bc.f0 = origin;
  bc.f1 = origin + displacement_length;
  return minimal_polynomial(bc, t_f);
}

/// x_min(t) = q_c(t) + q_c''(t) / omega_tilde(t)^2.
inline TimeFunction xmin_from_qc(const AuxiliaryPolynomial& qc, TimeFunction omega_tilde_sq) {
  return [qc, w2 = std::move(omega_tilde_sq)](double t) {
    const double acc = qc.d2(t);
    if (acc == 0.0) return qc.value(t);
    const double w = w2(t);
    if (w == 0.0) {
      throw Error(ErrorKind::DivisionByZeroCurvature,
                  "virtual trap curvature vanishes while the centre accelerates");
    }
    return qc.value(t) + acc / w;
  };
}

inline TimeFunction g_schedule(double g_0, const AuxiliaryPolynomial& rho) {
  return [g_0, rho](double t) {
    const double r = rho.value(t);
    if (!(r > 0.0)) throw Error(ErrorKind::RhoVanishes, "rho(t) <= 0");
    return g_0 / r;
  };
}

namespace detail {

inline void require_kind(const BuildingBlockSpec& spec, BlockKind kind) {
  spec.validate();
  if (spec.kind != kind) {
    throw Error(ErrorKind::InvalidArgument,
                "block spec is '" + std::string(block_name(spec.kind)) + "', expected '" +
                    std::string(block_name(kind)) + "'");
  }
}

inline ControlProtocol::FrameFn static_frame(double x) {
  return [x](double) { return FramePoint{x, 0.0, 0.0}; };
}

inline void check_endpoint_frequency(const ControlProtocol& p, const ModelParams& params) {
  const double tol = 1e-9 * params.Omega() * params.Omega();
  if (p.endpoints().start.omega_sq < -tol || p.endpoints().end.omega_sq < -tol) {
    throw Error(ErrorKind::NegativeRealFrequency, "negative squared trap frequency at an endpoint");
  }
}

// Loading evaluator shared by the shortcut and constant-g variants.
struct LoadingSynthesis {
  AuxiliaryPolynomial rho;
  TimeFunction omega_tilde_sq;
  double g_0 = 0.0;
  double site_x = 0.0;
};

inline LoadingSynthesis synthesize_loading(double omega_f, double g_f, int site, double t_f,
                                           const ModelParams& params) {
  params.validate();
  const double Om = params.Omega();
  const double wt0 = Om;
  const double wtf = std::sqrt(omega_f * omega_f + Om * Om);
  LoadingSynthesis s{rho_profile(wt0, wtf, t_f), {}, 0.0, site * params.site_spacing()};
  s.omega_tilde_sq = omega_tilde_from_rho(s.rho, wt0);
  s.g_0 = g_f * s.rho.value(t_f);
  return s;
}

inline ControlProtocol loading_like(Scheme scheme, double omega_f, double g_f, int site, double t_f,
                                    bool constant_g, const ModelParams& params) {
  const LoadingSynthesis s = synthesize_loading(omega_f, g_f, site, t_f, params);
  const double x0 = s.site_x;
  TimeFunction g = constant_g ? TimeFunction([g_f](double) { return g_f; }) : g_schedule(s.g_0, s.rho);
  auto w2 = s.omega_tilde_sq;
  auto control = [w2, g, x0, params](double t) {
    return ControlPoint{real_omega_sq(w2(t), x0, params), x0, g(t)};
  };
  auto virt = [w2, x0](double t) { return VirtualPoint{w2(t), x0}; };
  ControlProtocol p(scheme, t_f, control, static_frame(x0), virt);
  check_endpoint_frequency(p, params);
  return p;
}

// Time reversal t -> t_f - t of a protocol with a static frame.
inline ControlProtocol reversed(Scheme scheme, const ControlProtocol& fwd) {
  const double tf = fwd.t_f();
  auto c = fwd.control_fn();
  auto f = fwd.frame_fn();
  auto v = fwd.virtual_fn();
  auto control = [c, tf](double t) { return c(tf - t); };
  auto frame = [f, tf](double t) {
    FramePoint p = f(tf - t);
    p.velocity = -p.velocity;
    return p;
  };
  ControlProtocol::VirtualFn virt;
  if (v) virt = [v, tf](double t) { return v(tf - t); };
  return ControlProtocol(scheme, tf, control, frame, virt);
}

inline double ramp_up(double t, double t_f) {
  const double s = std::sin(pi * t / (2.0 * t_f));
  return s * s;
}

}  // namespace detail

inline ControlProtocol loading_protocol(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Load);
  return detail::loading_like(Scheme::LoadingShortcut, spec.omega_f, spec.g_f, spec.origin_site, spec.t_f,
                              false, params);
}

inline ControlProtocol const_g_loading(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Load);
  return detail::loading_like(Scheme::LoadingConstG, spec.omega_f, spec.g_f, spec.origin_site, spec.t_f,
                              true, params);
}

/// Direct reverse of the loading that ends at (omega_0, g_0).
inline ControlProtocol unloading_protocol(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Unload);
  const ControlProtocol fwd = detail::loading_like(Scheme::LoadingShortcut, spec.omega_0, spec.g_0,
                                                   spec.origin_site, spec.t_f, false, params);
  return detail::reversed(Scheme::UnloadingShortcut, fwd);
}

inline ControlProtocol const_g_unloading(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Unload);
  const ControlProtocol fwd = detail::loading_like(Scheme::LoadingConstG, spec.omega_0, spec.g_0,
                                                   spec.origin_site, spec.t_f, true, params);
  return detail::reversed(Scheme::UnloadingConstG, fwd);
}

namespace detail {

struct ShiftSynthesis {
  AuxiliaryPolynomial qc;
  double omega_tilde_sq = 0.0;
  TimeFunction x_min;
};

inline ShiftSynthesis synthesize_shift(const BuildingBlockSpec& spec, const ModelParams& params) {
  require_kind(spec, BlockKind::Shift);
  params.validate();
  const double Om = params.Omega();
  const double d = params.site_spacing();
  ShiftSynthesis s;
  s.qc = qc_profile(spec.displacement * d, spec.t_f, spec.origin_site * d);
  s.omega_tilde_sq = spec.omega_0 * spec.omega_0 + Om * Om;
  const double w2 = s.omega_tilde_sq;
  s.x_min = xmin_from_qc(s.qc, [w2](double) { return w2; });
  return s;
}

inline ControlProtocol::FrameFn polynomial_frame(const AuxiliaryPolynomial& qc) {
  return [qc](double t) { return FramePoint{qc.value(t), qc.d1(t), qc.d2(t)}; };
}

}  // namespace detail

inline ControlProtocol shift_variable_frequency(const BuildingBlockSpec& spec, const ModelParams& params) {
  const auto s = detail::synthesize_shift(spec, params);
  const double w2t = s.omega_tilde_sq;
  const double g = spec.g_0;
  auto xm = s.x_min;
  auto control = [xm, w2t, g, params](double t) {
    const double x = xm(t);
    const double w2 = real_omega_sq(w2t, x, params);
    return ControlPoint{w2, real_center(w2, x, params), g};
  };
  auto virt = [xm, w2t](double t) { return VirtualPoint{w2t, xm(t)}; };
  return ControlProtocol(Scheme::ShiftVariableFreq, spec.t_f, control, detail::polynomial_frame(s.qc), virt);
}

/// Same centre trajectory as the variable-frequency scheme at fixed omega_0.
inline ControlProtocol shift_const_freq_1(const BuildingBlockSpec& spec, const ModelParams& params) {
  const auto s = detail::synthesize_shift(spec, params);
  const double w2t = s.omega_tilde_sq;
  const double w02 = spec.omega_0 * spec.omega_0;
  const double g = spec.g_0;
  auto xm = s.x_min;
  auto control = [xm, w2t, w02, g, params](double t) {
    const double x = xm(t);
    return ControlPoint{w02, real_center(real_omega_sq(w2t, x, params), x, params), g};
  };
  return ControlProtocol(Scheme::ShiftConstFreq1, spec.t_f, control, detail::polynomial_frame(s.qc));
}

/// q0 = q_c + q_c'' / omega_0^2 at fixed omega_0.
inline ControlProtocol shift_const_freq_2(const BuildingBlockSpec& spec, const ModelParams& params) {
  const auto s = detail::synthesize_shift(spec, params);
  const double w02 = spec.omega_0 * spec.omega_0;
  const double g = spec.g_0;
  auto qc = s.qc;
  auto control = [qc, w02, g](double t) { return ControlPoint{w02, qc.value(t) + qc.d2(t) / w02, g}; };
  return ControlProtocol(Scheme::ShiftConstFreq2, spec.t_f, control, detail::polynomial_frame(s.qc));
}

inline ControlProtocol adiabatic_loading(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Load);
  const double tf = spec.t_f;
  const double wf = spec.omega_f;
  const double g = spec.g_f;
  const double x0 = spec.origin_site * params.site_spacing();
  auto control = [tf, wf, g, x0](double t) {
    const double w = wf * detail::ramp_up(t, tf);
    return ControlPoint{w * w, x0, g};
  };
  return ControlProtocol(Scheme::LoadingAdiabatic, tf, control, detail::static_frame(x0));
}

inline ControlProtocol adiabatic_unloading(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Unload);
  const double tf = spec.t_f;
  const double w0 = spec.omega_0;
  const double g = spec.g_0;
  const double x0 = spec.origin_site * params.site_spacing();
  auto control = [tf, w0, g, x0](double t) {
    const double w = w0 * (1.0 - detail::ramp_up(t, tf));
    return ControlPoint{w * w, x0, g};
  };
  return ControlProtocol(Scheme::UnloadingAdiabatic, tf, control, detail::static_frame(x0));
}

inline ControlProtocol adiabatic_shift(const BuildingBlockSpec& spec, const ModelParams& params) {
  detail::require_kind(spec, BlockKind::Shift);
  const double tf = spec.t_f;
  const double w02 = spec.omega_0 * spec.omega_0;
  const double g = spec.g_0;
  const double x0 = spec.origin_site * params.site_spacing();
  const double D = spec.displacement * params.site_spacing();
  auto control = [tf, w02, g, x0, D](double t) {
    return ControlPoint{w02, x0 + D * detail::ramp_up(t, tf), g};
  };
  // X = x0 + D (1 - cos(pi t / t_f)) / 2
  auto frame = [tf, x0, D](double t) {
    const double k = pi / tf;
    return FramePoint{x0 + D * detail::ramp_up(t, tf), 0.5 * D * k * std::sin(k * t),
                      0.5 * D * k * k * std::cos(k * t)};
  };
  return ControlProtocol(Scheme::ShiftAdiabatic, tf, control, frame);
}

inline ControlProtocol make_protocol(Scheme scheme, const BuildingBlockSpec& spec, const ModelParams& params) {
  switch (scheme) {
    case Scheme::LoadingShortcut: return loading_protocol(spec, params);
    case Scheme::LoadingAdiabatic: return adiabatic_loading(spec, params);
    case Scheme::LoadingConstG: return const_g_loading(spec, params);
    case Scheme::ShiftVariableFreq: return shift_variable_frequency(spec, params);
    case Scheme::ShiftConstFreq1: return shift_const_freq_1(spec, params);
    case Scheme::ShiftConstFreq2: return shift_const_freq_2(spec, params);
    case Scheme::ShiftAdiabatic: return adiabatic_shift(spec, params);
    case Scheme::UnloadingShortcut: return unloading_protocol(spec, params);
    case Scheme::UnloadingAdiabatic: return adiabatic_unloading(spec, params);
    case Scheme::UnloadingConstG: return const_g_unloading(spec, params);
    case Scheme::Composite: break;
  }
  throw Error(ErrorKind::InvalidArgument, "composite protocols are built with concat_protocols");
}

}  // namespace latsta
