#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "latsta/controls.hpp"
#include "latsta/evolution.hpp"
#include "latsta/stationary.hpp"

using namespace latsta;

namespace {

const ModelParams FAST = ModelParams::from_depth_ratio(20.0);
const ModelParams PAPER = ModelParams::from_depth_ratio(547.7);

ControlProtocol static_protocol(double omega_sq, double q0, double g, double tf) {
  return ControlProtocol(
      Scheme::ShiftConstFreq1, tf, [=](double) { return ControlPoint{omega_sq, q0, g}; },
      [=](double) { return FramePoint{q0, 0.0, 0.0}; },
      [=](double) { return VirtualPoint{omega_sq, q0}; });
}

Wavefunction harmonic_ground(const Grid& grid, double w, double center, const ModelParams& p) {
  return ground_state([&](double x) { return 0.5 * p.mass * w * w * (x - center) * (x - center); }, 0.0, grid,
                      center, p, GroundStateOptions{.require_localized = false})
      .psi;
}

}  // namespace

TEST(Fidelity, Basics) {
  const Grid grid = Grid::centered(0.0, 4, 1024, FAST);
  const Wavefunction a = Wavefunction::gaussian(grid, 0.0, 0.3);
  const Wavefunction b = Wavefunction::gaussian(grid, 0.0, 0.3, 5.0);
  EXPECT_NEAR(fidelity(a, a), 1.0, 1e-14);
  Wavefunction phased = a;
  for (auto& v : phased.amplitudes()) v *= std::polar(1.0, 0.7);
  EXPECT_NEAR(fidelity(a, phased), 1.0, 1e-14);
  // Opposite-parity states are orthogonal.
  Wavefunction odd(grid);
  for (std::size_t j = 0; j < grid.n_points; ++j) odd[j] = grid.x(j) * a[j];
  odd.normalize();
  EXPECT_NEAR(fidelity(a, odd), 0.0, 1e-20);
  EXPECT_LT(fidelity(a, b), 1.0);
  const Wavefunction c = Wavefunction::gaussian(Grid::centered(0.0, 4, 2048, FAST), 0.0, 0.3);
  try {
    fidelity(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
  }
}

TEST(Evolve, StaticStateIsStationary) {
  const Grid grid = Grid::centered(0.0, 4, 1 << 14, PAPER);
  const double w2 = std::pow(18.257 * PAPER.Omega(), 2);
  for (double g : {0.0, 0.91}) {
    const auto s = trap_ground_state(w2, 0.0, g * PAPER.g_unit(), grid, PAPER);
    const auto p = static_protocol(w2, 0.0, g * PAPER.g_unit(), 0.5 * PAPER.T());
    PropagationConfig cfg;
    cfg.dt = 0.001 * PAPER.T();
    cfg.store_every = 50;
    const auto r = evolve(s.psi, p, PAPER, cfg);
    EXPECT_GE(fidelity(s.psi, r.psi), 1.0 - 1e-9) << g;
    EXPECT_LE(r.norm_drift, 1e-10);
    const double e0 = r.trajectory.front().energy;
    for (const auto& tp : r.trajectory) EXPECT_NEAR(tp.energy, e0, 1e-8 * std::abs(e0));
  }
}

TEST(Evolve, FreeGaussianSpreading) {
  const ModelParams p = FAST;
  const Grid grid = Grid::centered(0.0, 16, 8192, p);
  const double s0 = 0.2;
  const Wavefunction psi0 = Wavefunction::gaussian(grid, 0.0, s0);
  const double tf = 0.05;
  const ControlProtocol free(
      Scheme::ShiftConstFreq1, tf, [](double) { return ControlPoint{0.0, 0.0, 0.0}; },
      [](double) { return FramePoint{}; }, [](double) { return VirtualPoint{0.0, 0.0}; });
  PropagationConfig cfg;
  cfg.dt = tf / 200.0;
  cfg.model = PotentialModel::VirtualHarmonic;
  cfg.store_every = 50;
  const auto r = evolve(psi0, free, p, cfg);
  const double a = p.hbar * tf / (2.0 * p.mass * s0 * s0);
  EXPECT_NEAR(r.psi.variance_x(), s0 * s0 * (1.0 + a * a), 1e-6 * s0 * s0 * (1.0 + a * a));
}

TEST(Evolve, CoherentStateRevival) {
  const ModelParams p = FAST;
  const Grid grid = Grid::centered(0.0, 4, 4096, p);
  const double w = 3.0 * p.Omega();
  const Wavefunction displaced = harmonic_ground(grid, w, 0.4, p);
  const double period = 2.0 * pi / w;
  const ControlProtocol trap(
      Scheme::ShiftConstFreq1, period, [w](double) { return ControlPoint{w * w, 0.0, 0.0}; },
      [](double) { return FramePoint{}; }, [w](double) { return VirtualPoint{w * w, 0.0}; });
  PropagationConfig cfg;
  cfg.dt = period / 2000.0;
  cfg.model = PotentialModel::VirtualHarmonic;
  cfg.store_every = 1000;
  const auto r = evolve(displaced, trap, p, cfg);
  EXPECT_GE(fidelity(displaced, r.psi), 1.0 - 1e-6);
  // Half a period later the packet sits on the other side.
  EXPECT_NEAR(r.trajectory[1].mean_x, -0.4, 1e-6);
}

TEST(Evolve, HarmonicOracleForShortcutProtocols) {
  const ModelParams p = FAST;
  const double Om = p.Omega();
  const double wf = 18.257 * Om;
  const Grid grid = Grid::centered(0.0, 4, 4096, p);
  const double wt0 = Om;
  const double wtf = std::sqrt(wf * wf + Om * Om);
  const Wavefunction start = harmonic_ground(grid, wt0, 0.0, p);
  const Wavefunction end = harmonic_ground(grid, wtf, 0.0, p);
  for (double tfT : {0.25, 0.55, 1.1, 2.5}) {
    BuildingBlockSpec s;
    s.kind = BlockKind::Load;
    s.omega_f = wf;
    s.t_f = tfT * p.T();
    const auto proto = loading_protocol(s, p);
    PropagationConfig cfg;
    cfg.dt = 0.0005 * p.T();
    cfg.model = PotentialModel::VirtualHarmonic;
    const auto r = evolve(start, proto, p, cfg);
    EXPECT_GE(fidelity(end, r.psi), 1.0 - 1e-6) << tfT;
  }
  // Shifting: the virtual trap moves one period; the grid follows the frame.
  const double wt = std::sqrt(wf * wf + Om * Om);
  const Wavefunction here = harmonic_ground(grid, wt, 0.0, p);
  for (double tfT : {0.25, 1.1}) {
    BuildingBlockSpec s;
    s.kind = BlockKind::Shift;
    s.omega_0 = s.omega_f = wf;
    s.displacement = 1;
    s.t_f = tfT * p.T();
    const auto proto = shift_variable_frequency(s, p);
    PropagationConfig cfg;
    cfg.dt = 0.0005 * p.T();
    cfg.model = PotentialModel::VirtualHarmonic;
    const auto r = evolve(here, proto, p, cfg);
    const Wavefunction there = harmonic_ground(r.psi.grid(), wt, pi, p);
    EXPECT_GE(fidelity(there, r.psi), 1.0 - 1e-6) << tfT;
  }
}

TEST(Evolve, TimeReversalOfLoadAndUnload) {
  const ModelParams p = FAST;
  const double wf = 18.257 * p.Omega();
  const Grid grid = Grid::centered(0.0, 4, 4096, p);
  const auto lattice = trap_ground_state(0.0, 0.0, 0.0, grid, p);
  const auto trap = trap_ground_state(wf * wf, 0.0, 0.0, grid, p);
  BuildingBlockSpec ls;
  ls.kind = BlockKind::Load;
  ls.omega_f = wf;
  ls.t_f = 0.7 * p.T();
  BuildingBlockSpec us;
  us.kind = BlockKind::Unload;
  us.omega_0 = wf;
  us.t_f = 0.7 * p.T();
  PropagationConfig cfg;
  cfg.dt = 0.002 * p.T();
  const double fl = fidelity(trap.psi, evolve(lattice.psi, loading_protocol(ls, p), p, cfg).psi);
  const double fu = fidelity(lattice.psi, evolve(trap.psi, unloading_protocol(us, p), p, cfg).psi);
  EXPECT_NEAR(fl, fu, 1e-10);
}

TEST(Evolve, TranslationByOnePeriod) {
  const ModelParams p = FAST;
  const double wf = 10.0 * p.Omega();
  BuildingBlockSpec s;
  s.kind = BlockKind::Shift;
  s.omega_0 = s.omega_f = wf;
  s.displacement = 1;
  s.g_0 = s.g_f = 0.91 * p.g_unit();
  s.t_f = 0.8 * p.T();
  PropagationConfig cfg;
  cfg.dt = 0.002 * p.T();
  double f[2];
  for (int site : {0, 1}) {
    s.origin_site = site;
    const Grid grid = Grid::centered(site * pi, 4, 4096, p);
    const auto a = trap_ground_state(wf * wf, site * pi, s.g_0, grid, p);
    const auto b = trap_ground_state(wf * wf, (site + 1) * pi, s.g_0, grid.shifted(pi), p);
    f[site] = fidelity(b.psi, evolve(a.psi, shift_variable_frequency(s, p), p, cfg).psi);
  }
  EXPECT_NEAR(f[0], f[1], 1e-10);
}

TEST(Evolve, TimeStepConvergence) {
  const ModelParams p = FAST;
  const double wf = 18.257 * p.Omega();
  const Grid grid = Grid::centered(0.0, 4, 4096, p);
  const auto lattice = trap_ground_state(0.0, 0.0, 0.0, grid, p);
  const auto trap = trap_ground_state(wf * wf, 0.0, 0.0, grid, p);
  BuildingBlockSpec ls;
  ls.kind = BlockKind::Load;
  ls.omega_f = wf;
  ls.t_f = 1.1 * p.T();
  const auto proto = loading_protocol(ls, p);
  PropagationConfig cfg;
  cfg.dt = 0.001 * p.T();
  const double f1 = fidelity(trap.psi, evolve(lattice.psi, proto, p, cfg).psi);
  cfg.dt *= 0.5;
  const double f2 = fidelity(trap.psi, evolve(lattice.psi, proto, p, cfg).psi);
  EXPECT_NEAR(f1, f2, 1e-6);
}

TEST(Evolve, TrajectoryFidelityReachesFinalValue) {
  const ModelParams p = FAST;
  const double wf = 18.257 * p.Omega();
  const Grid grid = Grid::centered(0.0, 4, 4096, p);
  const auto a = trap_ground_state(wf * wf, 0.0, 0.0, grid, p);
  const auto b = trap_ground_state(wf * wf, pi, 0.0, grid.shifted(pi), p);
  BuildingBlockSpec s;
  s.kind = BlockKind::Shift;
  s.omega_0 = s.omega_f = wf;
  s.displacement = 1;
  s.t_f = 1.0 * p.T();
  PropagationConfig cfg;
  cfg.dt = 0.002 * p.T();
  cfg.store_every = 100;
  const auto r = evolve(a.psi, shift_variable_frequency(s, p), p, cfg, &b.psi);
  ASSERT_GE(r.trajectory.size(), 2u);
  EXPECT_NEAR(r.trajectory.back().fidelity, fidelity(b.psi, r.psi), 1e-12);
  EXPECT_LT(r.trajectory.front().fidelity, 1e-6);
  EXPECT_NEAR(r.trajectory.back().mean_x, pi, 1e-3);
  std::ostringstream os;
  write_trajectory_csv(os, r.trajectory);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,norm,energy,mean_x,fidelity");
}

TEST(Evolve, Errors) {
  const ModelParams p = FAST;
  const Grid grid = Grid::centered(0.0, 4, 1024, p);
  const auto s = trap_ground_state(0.0, 0.0, 0.0, grid, p);
  const auto proto = static_protocol(0.0, 0.0, 0.0, p.T());
  PropagationConfig cfg;
  cfg.dt = 0.01 * p.T();
  cfg.norm_tolerance = 1e-300;
  try {
    evolve(s.psi, proto, p, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NormDrift);
  }
  cfg.norm_tolerance = 1e-10;
  cfg.dt = 0.5 * p.T();
  cfg.stability = StabilityPolicy::Reject;
  EXPECT_THROW(evolve(s.psi, proto, p, cfg), Error);
  cfg.stability = StabilityPolicy::Refine;
  const auto r = evolve(s.psi, proto, p, cfg);
  EXPECT_LT(r.dt, 0.5 * p.T());
  try {
    ControlProtocol(
        Scheme::ShiftConstFreq1, 1.0,
        [](double t) { return ControlPoint{t > 0.5 ? std::nan("") : 0.0, 0.0, 0.0}; },
        [](double) { return FramePoint{}; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NanDetected);
  }
  cfg.stability = StabilityPolicy::Ignore;
  cfg.dt = 0.01 * p.T();
  try {
    evolve(s.psi, static_protocol(0.0, 0.0, std::numeric_limits<double>::max(), p.T()), p, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NanDetected);
  }
}
