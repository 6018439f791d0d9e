#include <gtest/gtest.h>

#include <cmath>

#include "latsta/controls.hpp"

using namespace latsta;

namespace {

const ModelParams P = ModelParams::from_depth_ratio(547.7);
const double Om = P.Omega();
const double T = P.T();
const double wf = 18.257 * Om;

BuildingBlockSpec load_spec(double tf, double g_f = 0.0) {
  BuildingBlockSpec s;
  s.kind = BlockKind::Load;
  s.omega_f = wf;
  s.g_f = g_f * P.g_unit();
  s.t_f = tf;
  return s;
}

BuildingBlockSpec unload_spec(double tf, double g_0 = 0.0, int site = 0) {
  BuildingBlockSpec s;
  s.kind = BlockKind::Unload;
  s.omega_0 = wf;
  s.g_0 = g_0 * P.g_unit();
  s.origin_site = site;
  s.t_f = tf;
  return s;
}

BuildingBlockSpec shift_spec(double tf, double g = 0.0, int site = 0, int d = 1) {
  BuildingBlockSpec s;
  s.kind = BlockKind::Shift;
  s.omega_0 = s.omega_f = wf;
  s.g_0 = s.g_f = g * P.g_unit();
  s.displacement = d;
  s.origin_site = site;
  s.t_f = tf;
  return s;
}

double smoothstep(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }
double smoothstep_dd(double s) { return 60.0 * s - 180.0 * s * s + 120.0 * s * s * s; }

}  // namespace

TEST(RhoProfile, Examples) {
  const auto flat = rho_profile(2.0, 2.0, 1.0);
  EXPECT_EQ(flat.degree(), 0);
  EXPECT_DOUBLE_EQ(flat.value(0.3), 1.0);

  const double wtf = std::sqrt(18.257 * 18.257 + 1.0) * Om;
  EXPECT_NEAR(wtf / Om, 18.284, 1e-3);
  const auto rho = rho_profile(Om, wtf, 1.1 * T);
  EXPECT_NEAR(rho.value(1.1 * T), 0.23388, 5e-5);
  EXPECT_NEAR(rho.value(1.1 * T), std::sqrt(Om / wtf), 1e-14);
  EXPECT_NEAR(rho.value(0.0), 1.0, 1e-12);
  EXPECT_NEAR(rho.d1(0.0) * T, 0.0, 1e-12);
  EXPECT_NEAR(rho.d1(1.1 * T) * T, 0.0, 1e-12);
  EXPECT_NEAR(rho.d2(0.0) * T * T, 0.0, 1e-12);
  EXPECT_NEAR(rho.d2(1.1 * T) * T * T, 0.0, 1e-11);
  EXPECT_THROW(rho_profile(0.0, 1.0, 1.0), Error);
}

TEST(OmegaTildeFromRho, ConstantAndEndpoints) {
  const auto flat = omega_tilde_from_rho(rho_profile(3.0, 3.0, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(flat(0.4), 9.0);

  const double wtf = std::sqrt(wf * wf + Om * Om);
  for (double tfT : {0.25, 0.55, 1.1, 2.19}) {
    const double tf = tfT * T;
    const auto w2 = omega_tilde_from_rho(rho_profile(Om, wtf, tf), Om);
    EXPECT_NEAR(w2(0.0), Om * Om, 1e-9 * Om * Om);
    EXPECT_NEAR(w2(tf), wtf * wtf, 1e-9 * wtf * wtf);
  }
}

TEST(OmegaTildeFromRho, TransientSignAllowed) {
  const double wtf = std::sqrt(wf * wf + Om * Om);
  const double tf = 0.55 * T;
  TimeFunction w2;
  ASSERT_NO_THROW(w2 = omega_tilde_from_rho(rho_profile(Om, wtf, tf), Om));
  double lo = 1e300;
  for (int i = 0; i <= 10000; ++i) lo = std::min(lo, w2(tf * i / 10000.0));
  EXPECT_TRUE(std::isfinite(lo));
}

TEST(OmegaTildeFromRho, RejectsVanishingRho) {
  const AuxiliaryPolynomial bad({1.0, -2.0, 0, 0, 0, 0}, 1.0);
  try {
    omega_tilde_from_rho(bad, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RhoVanishes);
  }
}

TEST(AuxiliaryEquations, ErmakovResidual) {
  const double wtf = std::sqrt(wf * wf + Om * Om);
  for (double tfT : {0.25, 0.55, 1.1, 2.19, 5.0}) {
    const double tf = tfT * T;
    const auto rho = rho_profile(Om, wtf, tf);
    const auto w2 = omega_tilde_from_rho(rho, Om);
    for (int i = 0; i <= 1000; ++i) {
      const double t = tf * i / 1000.0;
      const double r = rho.value(t);
      const double res = r * r * r * (rho.d2(t) + r * w2(t)) - Om * Om;
      EXPECT_LE(std::abs(res), 1e-9 * Om * Om) << "t/T=" << t / T;
    }
  }
}

TEST(AuxiliaryEquations, CentreResidual) {
  const double tf = 1.1 * T;
  const auto qc = qc_profile(pi, tf);
  const double w2 = wf * wf + Om * Om;
  const auto xm = xmin_from_qc(qc, [w2](double) { return w2; });
  for (int i = 0; i <= 1000; ++i) {
    const double t = tf * i / 1000.0;
    const double res = qc.d2(t) + w2 * (qc.value(t) - xm(t));
    EXPECT_LE(std::abs(res), 1e-9 * std::max(std::abs(qc.d2(t)), w2 * pi * 1e-6));
  }
}

TEST(QcProfile, Examples) {
  EXPECT_EQ(qc_profile(0.0, 1.0).degree(), 0);
  const double tf = 0.7;
  const auto q = qc_profile(pi, tf);
  for (double s : {0.0, 0.2, 0.5, 0.8, 1.0}) EXPECT_NEAR(q.value(s * tf), pi * smoothstep(s), 1e-13);
  EXPECT_NEAR(q.d2(tf), 0.0, 1e-10);
  EXPECT_NEAR(q.d1(tf), 0.0, 1e-12);
}

TEST(XminFromQc, Examples) {
  const auto still = xmin_from_qc(qc_profile(0.0, 1.0, 2.0), [](double) { return 0.0; });
  EXPECT_DOUBLE_EQ(still(0.5), 2.0);
  const double tf = 1.0;
  const auto q = qc_profile(pi, tf);
  const auto xm = xmin_from_qc(q, [](double) { return 50.0; });
  EXPECT_NEAR(xm(0.0), 0.0, 1e-14);
  EXPECT_NEAR(xm(tf), pi, 1e-12);
  EXPECT_NEAR(xm(0.5 * tf), pi / 2.0, 1e-12);
  const auto bad = xmin_from_qc(q, [](double) { return 0.0; });
  try {
    bad(0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DivisionByZeroCurvature);
  }
}

TEST(GSchedule, LoadingInitialValueAndShape) {
  const double wtf = std::sqrt(wf * wf + Om * Om);
  const auto rho = rho_profile(Om, wtf, 1.1 * T);
  const double g0 = 0.91 * rho.value(1.1 * T);
  EXPECT_NEAR(g0, 0.21283, 5e-5);
  const auto g = g_schedule(g0, rho);
  EXPECT_NEAR(g(1.1 * T), 0.91, 1e-12);
  EXPECT_DOUBLE_EQ(g_schedule(0.4, rho_profile(1.0, 1.0, 1.0))(0.5), 0.4);

  std::vector<std::vector<double>> shapes;
  for (double tfT : {0.55, 1.10, 2.19}) {
    const ControlProtocol p = loading_protocol(load_spec(tfT * T, 0.91), P);
    std::vector<double> s;
    for (int i = 0; i <= 100; ++i) s.push_back(p.at(tfT * T * i / 100.0).g / p.at(0.0).g);
    shapes.push_back(s);
  }
  for (std::size_t k = 1; k < shapes.size(); ++k) {
    for (std::size_t i = 0; i < shapes[0].size(); ++i) EXPECT_NEAR(shapes[k][i], shapes[0][i], 1e-12);
  }
}

TEST(LoadingProtocol, EndpointsAndCompositionOracle) {
  const double tf = 1.10 * T;
  const ControlProtocol p = loading_protocol(load_spec(tf), P);
  EXPECT_EQ(p.scheme(), Scheme::LoadingShortcut);
  EXPECT_NEAR(p.endpoints().end.omega(), wf, 1e-10 * wf);
  EXPECT_NEAR(p.endpoints().start.omega(), 0.0, 1e-5 * Om);
  EXPECT_EQ(p.samples().front().control.omega_sq, p.endpoints().start.omega_sq);
  EXPECT_EQ(p.samples().back().control.omega_sq, p.endpoints().end.omega_sq);
  EXPECT_EQ(p.samples().size(), ControlProtocol::default_samples);

  // Independent composition with the explicit smoothstep form of rho.
  const double R = std::sqrt(Om / std::sqrt(wf * wf + Om * Om));
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    const double s = t / tf;
    const double rho = 1.0 + (R - 1.0) * smoothstep(s);
    const double rdd = (R - 1.0) * smoothstep_dd(s) / (tf * tf);
    const double w2 = -rdd / rho + Om * Om / std::pow(rho, 4) - Om * Om;
    EXPECT_NEAR(p.at(t).omega_sq, w2, 1e-9 * wf * wf) << i;
    EXPECT_DOUBLE_EQ(p.at(t).q0, 0.0);
  }
}

TEST(LoadingProtocol, TimeScalingOfVirtualFrequency) {
  std::vector<double> ref;
  for (double tfT : {0.55, 1.10, 2.19}) {
    const double tf = tfT * T;
    const ControlProtocol p = loading_protocol(load_spec(tf), P);
    const auto rho = rho_profile(Om, std::sqrt(wf * wf + Om * Om), tf);
    for (int i = 0; i <= 50; ++i) {
      const double t = tf * i / 50.0;
      // omega_tilde / omega_tilde_0 without the rho'' term is a function of s only.
      const double shape = 1.0 / (rho.value(t) * rho.value(t));
      if (ref.size() < 51) {
        ref.push_back(shape);
      } else {
        EXPECT_NEAR(shape, ref[i], 1e-12);
      }
      EXPECT_TRUE(p.has_virtual());
    }
  }
}

TEST(LoadingProtocol, RejectsBadSpec) {
  BuildingBlockSpec s = load_spec(T);
  s.omega_0 = 1.0;
  EXPECT_THROW(loading_protocol(s, P), Error);
  s = load_spec(T);
  s.kind = BlockKind::Shift;
  EXPECT_THROW(loading_protocol(s, P), Error);
}

TEST(UnloadingProtocol, TimeReversal) {
  const double tf = 1.10 * T;
  const ControlProtocol load = loading_protocol(load_spec(tf, 0.91), P);
  const ControlProtocol unload = unloading_protocol(unload_spec(tf, 0.91), P);
  EXPECT_NEAR(unload.endpoints().start.omega(), wf, 1e-10 * wf);
  EXPECT_NEAR(unload.endpoints().end.omega(), 0.0, 1e-5 * Om);
  EXPECT_NEAR(unload.endpoints().end.g, 0.21283 * P.g_unit(), 5e-5 * P.g_unit());
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    const ControlPoint u = unload.at(t);
    const ControlPoint l = load.at(tf - t);
    EXPECT_NEAR(u.omega(), l.omega(), 1e-12 * wf);
    EXPECT_NEAR(u.g, l.g, 1e-12 * P.g_unit());
  }
}

TEST(ShiftVariableFrequency, EndpointsAndPeak) {
  const double tf = 1.10 * T;
  const ControlProtocol p = shift_variable_frequency(shift_spec(tf, 0.91), P);
  EXPECT_NEAR(p.endpoints().start.omega(), wf, 1e-12 * wf);
  EXPECT_NEAR(p.endpoints().end.omega(), wf, 1e-12 * wf);
  EXPECT_NEAR(p.endpoints().start.q0, 0.0, 1e-12);
  EXPECT_NEAR(p.endpoints().end.q0, pi, 1e-12);
  double best = -1.0;
  double t_best = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double t = tf * i / 20000.0;
    const double w2 = p.at(t).omega_sq;
    if (w2 > best) {
      best = w2;
      t_best = t;
    }
    EXPECT_DOUBLE_EQ(p.at(t).g, 0.91 * P.g_unit());
  }
  EXPECT_NEAR(best, wf * wf + 2.0 * Om * Om, 1e-6 * best);
  EXPECT_NEAR(p.virtual_at(t_best).x_min, pi / 2.0, 1e-3);
}

TEST(ShiftConstFreq, Variants) {
  const double tf = 1.10 * T;
  const ControlProtocol var = shift_variable_frequency(shift_spec(tf), P);
  const ControlProtocol a1 = shift_const_freq_1(shift_spec(tf), P);
  const ControlProtocol a2 = shift_const_freq_2(shift_spec(tf), P);
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    EXPECT_NEAR(a1.at(t).q0, var.at(t).q0, 1e-12);
    EXPECT_DOUBLE_EQ(a1.at(t).omega_sq, wf * wf);
    EXPECT_DOUBLE_EQ(a2.at(t).omega_sq, wf * wf);
  }
  EXPECT_NEAR(a2.endpoints().start.q0, 0.0, 1e-12);
  EXPECT_NEAR(a2.endpoints().end.q0, pi, 1e-12);

  // q0_A1 - q0_A2 = static lattice offset (Omega^2/omega^2) sin cos minus a
  // dynamic part proportional to q_c''. The dynamic part shrinks with t_f;
  // the full difference tends to the static offset.
  double prev_dyn = 1e300;
  double prev_full = 0.0;
  for (double tfT : {0.55, 1.10, 2.19}) {
    const double tt = tfT * T;
    const ControlProtocol b0 = shift_variable_frequency(shift_spec(tt), P);
    const ControlProtocol b1 = shift_const_freq_1(shift_spec(tt), P);
    const ControlProtocol b2 = shift_const_freq_2(shift_spec(tt), P);
    double full = 0.0;
    double dyn = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = tt * i / 1000.0;
      const double d = b1.at(t).q0 - b2.at(t).q0;
      const double x = b0.virtual_at(t).x_min;
      const double stat = Om * Om / b0.at(t).omega_sq * std::sin(x) * std::cos(x);
      full = std::max(full, std::abs(d));
      dyn = std::max(dyn, std::abs(d - stat));
    }
    EXPECT_GT(full, 0.0);
    EXPECT_GT(full, prev_full);
    EXPECT_LT(full, 0.5 * Om * Om / (wf * wf) * (1.0 + 1e-9));
    EXPECT_LT(dyn, prev_dyn);
    prev_full = full;
    prev_dyn = dyn;
  }
  // Long protocols: q0 of the second approximation approaches q_c as 1/t_f^2.
  auto max_dev = [&](double tf_long) {
    const ControlProtocol slow = shift_const_freq_2(shift_spec(tf_long), P);
    const auto qc = qc_profile(pi, tf_long);
    double m = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double t = tf_long * i / 100.0;
      m = std::max(m, std::abs(slow.at(t).q0 - qc.value(t)));
    }
    return m;
  };
  EXPECT_LT(max_dev(1000.0 * T), 1e-6);
  EXPECT_NEAR(max_dev(100.0 * T) / max_dev(1000.0 * T), 100.0, 1e-6 * 100.0);
}

TEST(AdiabaticSchemes, RampsMatchClosedForm) {
  const double tf = 1.10 * T;
  const ControlProtocol load = adiabatic_loading(load_spec(tf, 0.91), P);
  EXPECT_NEAR(load.at(0.5 * tf).omega(), 0.5 * wf, 1e-12 * wf);
  EXPECT_DOUBLE_EQ(load.endpoints().start.omega_sq, 0.0);
  EXPECT_NEAR(load.endpoints().end.omega(), wf, 1e-12 * wf);
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    const double s = std::sin(pi * t / (2.0 * tf));
    EXPECT_NEAR(load.at(t).omega(), wf * s * s, 1e-12 * wf);
    EXPECT_DOUBLE_EQ(load.at(t).g, 0.91 * P.g_unit());
  }
  const ControlProtocol unload = adiabatic_unloading(unload_spec(tf), P);
  EXPECT_NEAR(unload.at(0.5 * tf).omega(), 0.5 * wf, 1e-12 * wf);
  EXPECT_NEAR(unload.endpoints().end.omega(), 0.0, 1e-12 * wf);

  const ControlProtocol shift = adiabatic_shift(shift_spec(tf), P);
  EXPECT_NEAR(shift.at(0.5 * tf).q0, 0.5 * pi, 1e-12);
  EXPECT_NEAR(shift.endpoints().end.q0, pi, 1e-12);
  EXPECT_DOUBLE_EQ(shift.at(0.3 * tf).omega_sq, wf * wf);
  // Frame derivatives match finite differences of the ramp.
  const double h = 1e-6 * tf;
  for (double s : {0.1, 0.4, 0.77}) {
    const double t = s * tf;
    const FramePoint f = shift.frame(t);
    EXPECT_NEAR(f.velocity, (shift.at(t + h).q0 - shift.at(t - h).q0) / (2 * h), 1e-6 * std::abs(f.velocity) + 1e-3);
    EXPECT_NEAR(f.position, shift.at(t).q0, 1e-14);
  }
}

TEST(ConstGLoading, SameFrequencyConstantG) {
  const double tf = 0.55 * T;
  const ControlProtocol a = loading_protocol(load_spec(tf, 0.91), P);
  const ControlProtocol b = const_g_loading(load_spec(tf, 0.91), P);
  EXPECT_EQ(b.scheme(), Scheme::LoadingConstG);
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    EXPECT_DOUBLE_EQ(a.at(t).omega_sq, b.at(t).omega_sq);
    EXPECT_DOUBLE_EQ(b.at(t).g, 0.91 * P.g_unit());
  }
}

TEST(Perturbations, InteriorOnly) {
  const double tf = T;
  const ControlProtocol p = shift_variable_frequency(shift_spec(tf), P);
  const ControlProtocol same = perturb_position(p, 0.0, P.site_spacing());
  const ControlProtocol pos = perturb_position(p, 0.02, P.site_spacing());
  const ControlProtocol frq = perturb_frequency(p, -0.05);
  EXPECT_EQ(pos.perturbation(), PerturbationKind::Position);
  for (int i = 0; i <= 100; ++i) {
    const double t = tf * i / 100.0;
    EXPECT_DOUBLE_EQ(same.at(t).q0, p.at(t).q0);
    if (i == 0 || i == 100) {
      EXPECT_DOUBLE_EQ(pos.at(t).q0, p.at(t).q0);
      EXPECT_DOUBLE_EQ(frq.at(t).omega_sq, p.at(t).omega_sq);
    } else {
      EXPECT_NEAR(pos.at(t).q0 - p.at(t).q0, 0.02 * pi, 1e-14);
      EXPECT_NEAR(frq.at(t).omega(), 0.95 * p.at(t).omega(), 1e-12 * wf);
    }
  }
  EXPECT_EQ(pos.endpoints().start.q0, p.endpoints().start.q0);
  EXPECT_EQ(frq.endpoints().end.omega_sq, p.endpoints().end.omega_sq);
}

TEST(Concat, LoadShiftUnload) {
  const double tl = 1.1 * T;
  const double ts = 0.55 * T;
  const ControlProtocol load = loading_protocol(load_spec(tl), P);
  const ControlProtocol shift = shift_variable_frequency(shift_spec(ts), P);
  const ControlProtocol unload = unloading_protocol(unload_spec(tl, 0.0, 1), P);
  const ControlProtocol all = concat_protocols({load, shift, unload});
  EXPECT_EQ(all.scheme(), Scheme::Composite);
  EXPECT_NEAR(all.t_f(), 2 * tl + ts, 1e-15);
  EXPECT_NEAR(all.endpoints().end.q0, pi, 1e-12);
  EXPECT_NEAR(all.endpoints().end.omega(), 0.0, 1e-5 * Om);
  EXPECT_NEAR(all.at(tl).omega(), wf, 1e-9 * wf);
  EXPECT_NEAR(all.at(tl + 0.5 * ts).q0, shift.at(0.5 * ts).q0, 1e-14);

  const ControlProtocol two = concat_protocols(
      {shift_variable_frequency(shift_spec(ts), P), shift_variable_frequency(shift_spec(ts, 0.0, 1), P)});
  EXPECT_NEAR(two.endpoints().end.q0, 2.0 * pi, 1e-12);
  EXPECT_NEAR(two.frame(two.t_f()).position, 2.0 * pi, 1e-12);
}

TEST(Concat, JunctionMismatch) {
  const ControlProtocol shift = shift_variable_frequency(shift_spec(T), P);
  const ControlProtocol wrong_site = unloading_protocol(unload_spec(T, 0.0, 0), P);
  try {
    concat_protocols({shift, wrong_site});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::JunctionMismatch);
  }
  const ControlProtocol g_jump = unloading_protocol(unload_spec(T, 0.5, 1), P);
  EXPECT_THROW(concat_protocols({shift, g_jump}), Error);
}

TEST(SchemeTags, RoundTrip) {
  for (Scheme s : all_block_schemes) {
    EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  }
  EXPECT_FALSE(parse_scheme("bogus").has_value());
}
