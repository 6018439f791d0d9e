#pragma once

// Real-time split-step propagation under a control protocol.
//
// The state is carried in a frame that follows the protocol's reference
// trajectory X(t): with x = y + X(t) and psi(x) = exp(i m X' y / hbar) phi(y),
//   i hbar phi_t = [-hbar^2/(2m) d_y^2 + V(y + X, t) + m X'' y + g|phi|^2] phi,
// so a fast transport never pushes the momentum distribution off the grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "latsta/error.hpp"
#include "latsta/grid.hpp"
#include "latsta/model.hpp"
#include "latsta/protocol.hpp"

namespace latsta {

enum class PotentialModel {
  /// Lattice plus harmonic trap.
  Full,
  /// Virtual harmonic trap 1/2 m omega_tilde^2 (x - x_min)^2 only.
  VirtualHarmonic,
};

enum class StabilityPolicy { Refine, Reject, Ignore };

struct PropagationConfig {
  double dt = 0.0;
  std::size_t store_every = 0;
  double norm_tolerance = 1e-10;
  PotentialModel model = PotentialModel::Full;
  StabilityPolicy stability = StabilityPolicy::Refine;
  /// Bound on dt * (energy scale) / hbar.
  double stability_limit = 0.1;

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    if (!(norm_tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "norm tolerance must be positive");
  }
};

struct TrajectoryPoint {
  double t = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  double mean_x = 0.0;
  /// Fidelity to the target state; NaN when no target was given.
  double fidelity = std::numeric_limits<double>::quiet_NaN();
};

struct EvolutionResult {
  Wavefunction psi;
  std::vector<TrajectoryPoint> trajectory;
  std::size_t steps = 0;
  double dt = 0.0;
  double norm_drift = 0.0;
};

/// Energy scale used by the stability guard: hbar times the largest local
/// oscillation frequency plus the peak nonlinear energy of the initial state.
inline double stability_energy_scale(const ControlProtocol& protocol, const Wavefunction& psi0,
                                      const ModelParams& params, PotentialModel model) {
  double w2max = 0.0;
  double gmax = 0.0;
  for (const auto& s : protocol.samples()) {
    double w2 = std::abs(s.control.omega_sq);
    if (model == PotentialModel::VirtualHarmonic && protocol.has_virtual()) {
      w2 = std::abs(protocol.virtual_at(s.t).omega_tilde_sq);
    }
    w2max = std::max(w2max, w2);
    gmax = std::max(gmax, std::abs(s.control.g));
  }
  if (model == PotentialModel::Full) {
    w2max += 2.0 * params.U0 / (params.mass * params.sigma * params.sigma);
  }
  double peak = 0.0;
  for (const auto& a : psi0.amplitudes()) peak = std::max(peak, std::norm(a));
  return params.hbar * std::sqrt(w2max) + gmax * peak;
}

namespace detail {

class FramePropagator {
 public:
  FramePropagator(const Grid& grid0, double X0, const ModelParams& params, PotentialModel model)
      : grid0_(grid0), X0_(X0), p_(params), model_(model), buf_(grid0.n_points) {
    const std::size_t n = grid0.n_points;
    y_.resize(n);
    c2_.resize(n);
    s2_.resize(n);
    k_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      y_[j] = grid0.x(j) - X0;
      c2_[j] = std::cos(2.0 * y_[j] / params.sigma);
      s2_[j] = std::sin(2.0 * y_[j] / params.sigma);
      k_[j] = grid0.k(j);
    }
  }

  const std::vector<double>& y() const { return y_; }

  /// Lab-frame potential V(y + X, t) + m X'' y at every grid point.
  void potential(double t, const ControlProtocol& protocol, std::vector<double>& out) const {
    const FramePoint f = protocol.frame(t);
    const std::size_t n = y_.size();
    out.resize(n);
    const double m = p_.mass;
    if (model_ == PotentialModel::Full) {
      const ControlPoint c = protocol.at(t);
      const double C = std::cos(2.0 * f.position / p_.sigma);
      const double S = std::sin(2.0 * f.position / p_.sigma);
      const double shift = f.position - c.q0;
      const double hw = 0.5 * m * c.omega_sq;
      const double hu = 0.5 * p_.U0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = y_[j] + shift;
        out[j] = hw * d * d + hu * (1.0 - c2_[j] * C + s2_[j] * S) + m * f.acceleration * y_[j];
      }
    } else {
      const VirtualPoint v = protocol.virtual_at(t);
      const double shift = f.position - v.x_min;
      const double hw = 0.5 * m * v.omega_tilde_sq;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = y_[j] + shift;
        out[j] = hw * d * d + m * f.acceleration * y_[j];
      }
    }
  }

  void kick(std::vector<cplx>& phi, const std::vector<double>& V, double g, double h) const {
    const double s = -h / p_.hbar;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      phi[j] *= std::polar(1.0, s * (V[j] + g * std::norm(phi[j])));
    }
  }

  void set_kinetic_step(double h) {
    const std::size_t n = k_.size();
    kin_.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    const double a = -h * p_.hbar / (2.0 * p_.mass);
    for (std::size_t j = 0; j < n; ++j) kin_[j] = std::polar(inv_n, a * k_[j] * k_[j]);
  }

  void drift(std::vector<cplx>& phi) {
    buf_.load(phi);
    buf_.forward();
    for (std::size_t j = 0; j < kin_.size(); ++j) buf_[j] *= kin_[j];
    buf_.backward();
    buf_.store(phi);
  }

  /// Lab-frame state at time t from the co-moving amplitudes.
  Wavefunction to_lab(const std::vector<cplx>& phi, const FramePoint& f) const {
    Wavefunction out(grid0_.shifted(f.position - X0_));
    const double a = p_.mass * f.velocity / p_.hbar;
    for (std::size_t j = 0; j < phi.size(); ++j) out[j] = phi[j] * std::polar(1.0, a * y_[j]);
    return out;
  }

  double lab_energy(const std::vector<cplx>& phi, const std::vector<double>& V, double g, const FramePoint& f) {
    const Wavefunction w(grid0_, phi);
    const MomentumMoments mm = momentum_moments(w, p_);
    const double nrm = w.norm();
    double pot = 0.0;
    double quartic = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      const double rho = std::norm(phi[j]);
      // Remove the inertial term: it is not part of the lab Hamiltonian.
      pot += (V[j] - p_.mass * f.acceleration * y_[j]) * rho;
      quartic += rho * rho;
    }
    const double dx = grid0_.dx();
    return mm.kinetic + f.velocity * mm.momentum + 0.5 * p_.mass * f.velocity * f.velocity +
           (pot * dx + 0.5 * g * quartic * dx) / nrm;
  }

 private:
  Grid grid0_;
  double X0_;
  ModelParams p_;
  PotentialModel model_;
  FftBuffer buf_;
  std::vector<double> y_, c2_, s2_, k_;
  std::vector<cplx> kin_;
};

}  // namespace detail

/// Propagate psi0 through the whole protocol. psi0 must live on a grid whose
/// frame origin is X(0); the result lives on that grid translated by
/// X(t_f) - X(0). If `target` is given, the trajectory records the fidelity
/// to it (it must live on the final grid).
inline EvolutionResult evolve(const Wavefunction& psi0, const ControlProtocol& protocol,
                              const ModelParams& params, const PropagationConfig& config,
                              const Wavefunction* target = nullptr) {
  params.validate();
  config.validate();
  if (config.model == PotentialModel::VirtualHarmonic && !protocol.has_virtual()) {
    throw Error(ErrorKind::InvalidArgument, "protocol has no virtual trap for the harmonic model");
  }
  const double tf = protocol.t_f();
  const double norm0 = psi0.norm();
  if (std::abs(norm0 - 1.0) > 1e-8) throw Error(ErrorKind::InvalidArgument, "initial state is not normalized");

  double dt = config.dt;
  const double E = stability_energy_scale(protocol, psi0, params, config.model);
  if (dt * E / params.hbar >= config.stability_limit) {
    if (config.stability == StabilityPolicy::Reject) {
      throw Error(ErrorKind::InvalidArgument, "time step violates the stability guard");
    }
    if (config.stability == StabilityPolicy::Refine) dt = 0.999 * config.stability_limit * params.hbar / E;
  }
  const auto n_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(tf / dt - 1e-9)));
  const double h = tf / static_cast<double>(n_steps);

  const FramePoint f0 = protocol.frame(0.0);
  const FramePoint ff = protocol.frame(tf);
  const Grid final_grid = psi0.grid().shifted(ff.position - f0.position);
  if (target != nullptr && !target->grid().same_as(final_grid, 1e-9)) {
    throw Error(ErrorKind::GridMismatch, "target state does not live on the final grid");
  }

  detail::FramePropagator prop(psi0.grid(), f0.position, params, config.model);
  prop.set_kinetic_step(h);
  // Co-moving amplitudes: remove the frame's momentum boost.
  std::vector<cplx> phi = psi0.amplitudes();
  {
    const double a = -params.mass * f0.velocity / params.hbar;
    const auto& y = prop.y();
    for (std::size_t j = 0; j < phi.size(); ++j) phi[j] *= std::polar(1.0, a * y[j]);
  }

  EvolutionResult result;
  result.dt = h;
  result.steps = n_steps;
  std::vector<double> V;

  auto record = [&](double t) {
    const FramePoint f = protocol.frame(t);
    const ControlPoint c = protocol.at(t);
    TrajectoryPoint tp;
    tp.t = t;
    const Wavefunction lab = prop.to_lab(phi, f);
    tp.norm = lab.norm();
    tp.energy = prop.lab_energy(phi, V, c.g, f);
    tp.mean_x = lab.mean_x();
    if (target != nullptr) {
      const Wavefunction moved = spectral_translate(*target, ff.position - f.position);
      tp.fidelity = std::norm(overlap(Wavefunction(lab.grid(), moved.amplitudes()), lab));
    }
    result.trajectory.push_back(tp);
  };

  auto check = [&](std::size_t step) {
    double s = 0.0;
    for (const auto& a : phi) s += std::norm(a);
    s *= psi0.grid().dx();
    if (!std::isfinite(s)) {
      throw Error(ErrorKind::NanDetected, "non-finite amplitude at step " + std::to_string(step));
    }
    const double drift = std::abs(s - norm0);
    result.norm_drift = std::max(result.norm_drift, drift);
    if (drift > config.norm_tolerance) {
      throw Error(ErrorKind::NormDrift, "norm drift " + std::to_string(drift) + " at step " + std::to_string(step));
    }
  };

  prop.potential(0.0, protocol, V);
  if (config.store_every > 0) record(0.0);
  prop.kick(phi, V, protocol.at(0.0).g, 0.5 * h);

  for (std::size_t i = 0; i < n_steps; ++i) {
    prop.drift(phi);
    const bool last = (i + 1 == n_steps);
    const double t = last ? tf : static_cast<double>(i + 1) * h;
    prop.potential(t, protocol, V);
    const double g = protocol.at(t).g;
    const bool store = config.store_every > 0 && ((i + 1) % config.store_every == 0 || last);
    if (store || last) {
      // The nonlinear kick leaves |phi| unchanged, so two half kicks equal one full kick.
      prop.kick(phi, V, g, 0.5 * h);
      if (store) record(t);
      if (!last) prop.kick(phi, V, g, 0.5 * h);
    } else {
      prop.kick(phi, V, g, h);
    }
    if ((i & 255u) == 255u || last) check(i + 1);
  }

  result.psi = prop.to_lab(phi, ff);
  return result;
}

/// Fidelity of the final state of `r` against `target`.
inline double final_fidelity(const EvolutionResult& r, const Wavefunction& target) {
  return fidelity(target, r.psi);
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& traj) {
  os << "t,norm,energy,mean_x,fidelity\n";
  char line[160];
  for (const auto& p : traj) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.t, p.norm, p.energy, p.mean_x,
                  p.fidelity);
    os << line;
  }
}

}  // namespace latsta
