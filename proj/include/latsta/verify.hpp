#pragma once

// Invariant suite: boundary conditions, auxiliary equations, unitarity,
// energy conservation, harmonic oracle, time reversal, model maps and the
// scaling ansatz. Every check reports a deviation against a fixed tolerance.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "latsta/ansatz.hpp"
#include "latsta/controls.hpp"
#include "latsta/evolution.hpp"
#include "latsta/experiments.hpp"
#include "latsta/model.hpp"
#include "latsta/stationary.hpp"

namespace latsta {

struct VerifyCheck {
  std::string name;
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string error;
  double seconds = 0.0;

  bool pass() const { return error.empty() && std::isfinite(deviation) && deviation <= tolerance; }
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.pass(); });
  }
};

struct VerifyOptions {
  double omega_over_Omega = 18.257;
  double g = 0.91;  // hbar*Omega*sigma
  std::vector<double> t_f_over_T{0.25, 1.10};
  std::function<void(const VerifyCheck&)> on_check;
};

namespace detail {

inline double boundary_residual(const AuxiliaryPolynomial& f, double f0, double f1) {
  const double tf = f.t_f();
  const double scale = std::max({1.0, std::abs(f0), std::abs(f1)});
  double r = std::max(std::abs(f.value(0.0) - f0), std::abs(f.value(tf) - f1));
  r = std::max({r, std::abs(f.d1(0.0)) * tf, std::abs(f.d1(tf)) * tf});
  r = std::max({r, std::abs(f.d2(0.0)) * tf * tf, std::abs(f.d2(tf)) * tf * tf});
  return r / scale;
}

inline std::vector<double> sample_times(double tf, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = tf * i / (n - 1);
  return t;
}

inline std::vector<BuildingBlockSpec> shortcut_blocks(const ModelParams& p, const VerifyOptions& o, double tf) {
  const double w = o.omega_over_Omega * p.Omega();
  std::vector<BuildingBlockSpec> out;
  for (double g : {0.0, o.g * p.g_unit()}) {
    BuildingBlockSpec b;
    b.kind = BlockKind::Load;
    out.push_back(configure_block(b, w, g, tf));
    b.kind = BlockKind::Unload;
    out.push_back(configure_block(b, w, g, tf));
    b.kind = BlockKind::Shift;
    b.displacement = 1;
    out.push_back(configure_block(b, w, g, tf));
  }
  return out;
}

inline Scheme shortcut_scheme(BlockKind k) {
  switch (k) {
    case BlockKind::Load: return Scheme::LoadingShortcut;
    case BlockKind::Shift: return Scheme::ShiftVariableFreq;
    case BlockKind::Unload: return Scheme::UnloadingShortcut;
  }
  return Scheme::LoadingShortcut;
}

inline StationaryState harmonic_state(double w2, double centre, double g, const Grid& grid, const ModelParams& p) {
  GroundStateOptions opt;
  opt.require_localized = false;
  return ground_state([&](double x) { return 0.5 * p.mass * w2 * (x - centre) * (x - centre); }, g, grid, centre,
                      p, opt);
}

}  // namespace detail

inline VerifyReport verify_invariants(const ModelParams& params, const Resolution& res,
                                      const VerifyOptions& opt = {}) {
  params.validate();
  VerifyReport report;
  const double T = params.T();
  const double Om = params.Omega();
  const double w = opt.omega_over_Omega * Om;

  auto run = [&](const std::string& name, double tol, const std::function<double()>& body) {
    VerifyCheck c;
    c.name = name;
    c.tolerance = tol;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.deviation = body();
    } catch (const Error& e) {
      c.deviation = std::numeric_limits<double>::quiet_NaN();
      c.error = e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.checks.push_back(c);
    if (opt.on_check) opt.on_check(c);
  };

  run("boundary-conditions", 1e-12, [&] {
    double worst = 0.0;
    const double wtf = std::sqrt(w * w + Om * Om);
    for (double tfT : opt.t_f_over_T) {
      const double tf = tfT * T;
      worst = std::max(worst, detail::boundary_residual(rho_profile(Om, wtf, tf), 1.0, std::sqrt(Om / wtf)));
      worst = std::max(worst, detail::boundary_residual(qc_profile(pi * params.sigma, tf), 0.0, pi * params.sigma));
    }
    return worst;
  });

  run("auxiliary-equations", 1e-9, [&] {
    double worst = 0.0;
    for (double tfT : opt.t_f_over_T) {
      const double tf = tfT * T;
      const auto ld = detail::synthesize_loading(w, 0.0, 0, tf, params);
      const double w02 = Om * Om;
      for (double t : detail::sample_times(tf, 257)) {
        const double r = ld.rho.value(t);
        const double lhs = r * r * r * (ld.rho.d2(t) + r * ld.omega_tilde_sq(t));
        worst = std::max(worst, std::abs(lhs - w02) / w02);
      }
      BuildingBlockSpec b;
      b.kind = BlockKind::Shift;
      b.displacement = 1;
      b = configure_block(b, w, 0.0, tf);
      const auto sh = detail::synthesize_shift(b, params);
      for (double t : detail::sample_times(tf, 257)) {
        const double res = sh.qc.d2(t) + sh.omega_tilde_sq * (sh.qc.value(t) - sh.x_min(t));
        const double scale = std::max(std::abs(sh.qc.d2(t)), pi * params.sigma / (tf * tf));
        worst = std::max(worst, std::abs(res) / scale);
      }
    }
    return worst;
  });

  run("model-round-trip", 1e-8, [&] {
    double worst = 0.0;
    BuildingBlockSpec b;
    b.kind = BlockKind::Shift;
    b.displacement = 1;
    b = configure_block(b, w, 0.0, opt.t_f_over_T.front() * T);
    const auto p = shift_variable_frequency(b, params);
    for (double t : detail::sample_times(b.t_f, 65)) {
      const auto v = p.virtual_at(t);
      const auto c = p.at(t);
      const auto [wt, xm] = virtual_from_real(TrapState{c.omega(), c.q0, 0.0, 0.0}, params);
      worst = std::max(worst, std::abs(xm - v.x_min) / std::max(1.0, std::abs(v.x_min)));
      worst = std::max(worst, std::abs(wt * wt - v.omega_tilde_sq) / v.omega_tilde_sq);
    }
    return worst;
  });

  run("unloading-time-reversal", 1e-12, [&] {
    double worst = 0.0;
    for (double tfT : opt.t_f_over_T) {
      BuildingBlockSpec l, u;
      l.kind = BlockKind::Load;
      u.kind = BlockKind::Unload;
      l = configure_block(l, w, opt.g * params.g_unit(), tfT * T);
      // The unloading starts where the loading ends.
      u = configure_block(u, w, opt.g * params.g_unit(), tfT * T);
      const auto pl = loading_protocol(l, params);
      const auto pu = unloading_protocol(u, params);
      for (double t : detail::sample_times(l.t_f, 129)) {
        const auto a = pl.at(l.t_f - t);
        const auto b = pu.at(t);
        worst = std::max({worst, std::abs(a.omega_sq - b.omega_sq) / (w * w), std::abs(a.q0 - b.q0),
                          std::abs(a.g - b.g) / params.g_unit()});
      }
      // Fidelity identity of the linear dynamics.
      l.g_f = u.g_0 = 0.0;
      TargetCache cache;
      const double fl = protocol_fidelity(loading_protocol(l, params), params, res, cache);
      const double fu = protocol_fidelity(unloading_protocol(u, params), params, res, cache);
      worst = std::max(worst, std::abs(fl - fu));
    }
    return worst;
  });

  run("norm-drift", 1e-10, [&] {
    double worst = 0.0;
    TargetCache cache;
    for (const auto& b : detail::shortcut_blocks(params, opt, opt.t_f_over_T.back() * T)) {
      const auto p = make_protocol(detail::shortcut_scheme(b.kind), b, params);
      const Grid grid = Grid::centered(p.frame(0.0).position, res.periods, res.n_points, params);
      const auto s0 = cache.get(p.endpoints().start, grid, params);
      PropagationConfig cfg;
      cfg.dt = res.dt_over_T * T;
      worst = std::max(worst, evolve(s0->psi, p, params, cfg).norm_drift);
    }
    return worst;
  });

  run("static-energy-drift", 1e-8, [&] {
    double worst = 0.0;
    const Grid grid = Grid::centered(0.0, res.periods, res.n_points, params);
    for (double g : {0.0, opt.g * params.g_unit()}) {
      const auto s = trap_ground_state(w * w, 0.0, g, grid, params);
      const ControlProtocol p(
          Scheme::ShiftConstFreq1, T, [&](double) { return ControlPoint{w * w, 0.0, g}; },
          [](double) { return FramePoint{}; });
      PropagationConfig cfg;
      cfg.dt = res.dt_over_T * T;
      cfg.store_every = 50;
      const auto r = evolve(s.psi, p, params, cfg);
      const double e0 = r.trajectory.front().energy;
      for (const auto& tp : r.trajectory) worst = std::max(worst, std::abs(tp.energy - e0) / std::abs(e0));
      worst = std::max(worst, 1.0 - fidelity(s.psi, r.psi));
    }
    return worst;
  });

  run("harmonic-oracle", 1e-6, [&] {
    double worst = 0.0;
    for (double tfT : opt.t_f_over_T) {
      for (const auto& b : detail::shortcut_blocks(params, opt, tfT * T)) {
        const auto p = make_protocol(detail::shortcut_scheme(b.kind), b, params);
        const auto v0 = p.virtual_at(0.0), v1 = p.virtual_at(p.t_f());
        const Grid grid = Grid::centered(p.frame(0.0).position, res.periods, res.n_points, params);
        const Grid last = grid.shifted(p.frame(p.t_f()).position - p.frame(0.0).position);
        const auto a = detail::harmonic_state(v0.omega_tilde_sq, v0.x_min, p.at(0.0).g, grid, params);
        const auto z = detail::harmonic_state(v1.omega_tilde_sq, v1.x_min, p.at(p.t_f()).g, last, params);
        PropagationConfig cfg;
        cfg.dt = 0.25 * res.dt_over_T * T;
        cfg.model = PotentialModel::VirtualHarmonic;
        worst = std::max(worst, 1.0 - fidelity(z.psi, evolve(a.psi, p, params, cfg).psi));
      }
    }
    return worst;
  });

  run("ansatz-residual", 1e-5, [&] {
    double worst = 0.0;
    const double tf = opt.t_f_over_T.back() * T;
    BuildingBlockSpec b;
    b.kind = BlockKind::Shift;
    b.displacement = 1;
    b = configure_block(b, w, 0.0, tf);
    const auto sh = detail::synthesize_shift(b, params);
    const AnsatzResidualOptions ao{10, res.n_points};
    worst = ansatz_residual(shift_variable_frequency(b, params), AuxiliaryPolynomial::constant(1.0, tf), sh.qc,
                            params, 0.0, ao);
    BuildingBlockSpec l;
    l.kind = BlockKind::Load;
    l = configure_block(l, w, opt.g * params.g_unit(), tf);
    const auto ld = detail::synthesize_loading(l.omega_f, l.g_f, 0, tf, params);
    worst = std::max(worst, ansatz_residual(loading_protocol(l, params), ld.rho,
                                            AuxiliaryPolynomial::constant(0.0, tf), params, ld.g_0, ao));
    return worst;
  });

  return report;
}

inline nlohmann::json verify_json(const VerifyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json j{{"name", c.name}, {"tolerance", c.tolerance}, {"pass", c.pass()}};
    if (std::isfinite(c.deviation)) j["deviation"] = c.deviation;
    if (!c.error.empty()) j["error"] = c.error;
    checks.push_back(j);
  }
  return {{"pass", r.pass()}, {"checks", checks}};
}

}  // namespace latsta
