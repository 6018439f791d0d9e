#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "latsta/stationary.hpp"

using namespace latsta;

namespace {

const ModelParams FAST = ModelParams::from_depth_ratio(20.0);
const ModelParams PAPER = ModelParams::from_depth_ratio(547.7);

// Lowest eigenvalue of -1/2 d^2 + U0 sin^2 x on (-pi/2, pi/2) with Dirichlet
// ends, fourth-order finite differences. Independent of the spectral solver.
double finite_difference_well_energy(const ModelParams& p, int m) {
  const double a = -0.5 * pi;
  const double h = pi / (m + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  const double c = p.hbar * p.hbar / (2.0 * p.mass * 12.0 * h * h);
  for (int i = 0; i < m; ++i) {
    const double x = a + (i + 1) * h;
    const double s = std::sin(x / p.sigma);
    H(i, i) = 30.0 * c + p.U0 * s * s;
    if (i >= 1) H(i, i - 1) = H(i - 1, i) = -16.0 * c;
    if (i >= 2) H(i, i - 2) = H(i - 2, i) = 1.0 * c;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

TEST(GroundState, PureHarmonic) {
  const double w = 3.0 * FAST.Omega();
  const Grid grid = Grid::centered(0.0, 4, 2048, FAST);
  const auto s = ground_state([&](double x) { return 0.5 * w * w * x * x; }, 0.0, grid, 0.0, FAST);
  EXPECT_NEAR(s.energy, 0.5 * w, 1e-6 * 0.5 * w);
  EXPECT_NEAR(s.mu, s.energy, 1e-12 * s.energy);
  EXPECT_NEAR(s.psi.variance_x(), 1.0 / (2.0 * w), 1e-6 / (2.0 * w));
  EXPECT_LE(s.residual, 1e-8);
  EXPECT_NEAR(s.psi.norm(), 1.0, 1e-10);
  EXPECT_NEAR(s.psi.mean_x(), 0.0, 1e-10);
}

TEST(GroundState, LatticeWellBandAtPaperPoint) {
  const Grid grid = Grid::centered(0.0, 4, 1 << 14, PAPER);
  const auto s = trap_ground_state(0.0, 0.0, 0.0, grid, PAPER);
  const double e = s.energy / (PAPER.hbar * PAPER.Omega());
  EXPECT_GT(e, 0.49);
  EXPECT_LT(e, 0.50);
  const double oracle = finite_difference_well_energy(PAPER, 1500) / PAPER.Omega();
  EXPECT_NEAR(e, oracle, 1e-6);
  EXPECT_LE(s.residual, 1e-8);
}

TEST(GroundState, SymmetricAboutSeed) {
  const Grid grid = Grid::centered(pi, 4, 4096, FAST);
  const double w2 = std::pow(5.0 * FAST.Omega(), 2);
  const auto s = trap_ground_state(w2, pi, 0.0, grid, FAST);
  EXPECT_NEAR(s.psi.mean_x(), pi, 1e-10);
  const auto sg = trap_ground_state(w2, pi, 0.5 * FAST.g_unit(), grid, FAST);
  EXPECT_NEAR(sg.psi.mean_x(), pi, 1e-10);
}

TEST(GroundState, GridIndependence) {
  const double w2 = std::pow(4.0 * FAST.Omega(), 2);
  for (double g : {0.0, 0.91}) {
    const auto a = trap_ground_state(w2, 0.0, g * FAST.g_unit(), Grid::centered(0.0, 4, 4096, FAST), FAST);
    const auto b = trap_ground_state(w2, 0.0, g * FAST.g_unit(), Grid::centered(0.0, 4, 8192, FAST), FAST);
    EXPECT_NEAR(a.energy, b.energy, 1e-8 * std::abs(a.energy)) << g;
  }
}

TEST(GroundState, GpeResidualAndMonotoneMu) {
  const Grid grid = Grid::centered(0.0, 4, 4096, FAST);
  const double w2 = std::pow(4.0 * FAST.Omega(), 2);
  const auto s0 = trap_ground_state(w2, 0.0, 0.0, grid, FAST);
  const auto tiny = trap_ground_state(w2, 0.0, 1e-7 * FAST.g_unit(), grid, FAST);
  EXPECT_NEAR(tiny.mu, s0.mu, 1e-6 * s0.mu);
  double prev = s0.mu;
  for (double g : {0.1, 0.5, 0.91, 2.0, 5.0}) {
    const auto s = trap_ground_state(w2, 0.0, g * FAST.g_unit(), grid, FAST);
    EXPECT_LE(s.residual, 1e-8);
    EXPECT_GT(s.mu, prev);
    EXPECT_GT(s.mu, s.energy);
    EXPECT_NEAR(chemical_potential(s, FAST), s.mu, 1e-12 * s.mu);
    prev = s.mu;
  }
}

TEST(GroundState, GpeAtPaperPoint) {
  const Grid grid = Grid::centered(0.0, 4, 1 << 14, PAPER);
  const double wf = 18.257 * PAPER.Omega();
  const auto s = trap_ground_state(wf * wf, 0.0, 0.91 * PAPER.g_unit(), grid, PAPER);
  EXPECT_LE(s.residual, 1e-8);
  EXPECT_GT(s.mu / PAPER.Omega(), 0.5 * std::sqrt(18.257 * 18.257 + 1.0));
}

TEST(GroundState, DelocalizedInShallowLattice) {
  const ModelParams shallow = ModelParams::from_depth_ratio(0.3);
  const Grid grid = Grid::centered(0.0, 4, 1024, shallow);
  try {
    trap_ground_state(0.0, 0.0, 0.0, grid, shallow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DelocalizedResult);
  }
}

TEST(GridType, Validation) {
  EXPECT_THROW(Grid::centered(0.0, 4, 1000, FAST), Error);
  EXPECT_THROW(Grid::centered(0.0, 4, 512, FAST), Error);
  Grid g{0.0, 3.0, 1024};
  EXPECT_THROW(g.validate(FAST), Error);
  const Grid ok = Grid::centered(0.0, 4, 1024, FAST);
  EXPECT_NEAR(ok.dx(), 4.0 * pi / 1024.0, 1e-15);
}

TEST(Snapshot, CsvAndJson) {
  const Grid grid = Grid::centered(0.0, 4, 1024, FAST);
  const auto s = trap_ground_state(0.0, 0.0, 0.0, grid, FAST);
  std::ostringstream os;
  write_snapshot_csv(os, s.psi);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,re_psi,im_psi");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1025);
  const auto meta = snapshot_metadata(s, FAST);
  EXPECT_EQ(meta["grid"]["n_points"], 1024);
  EXPECT_DOUBLE_EQ(meta["mu"].get<double>(), s.mu);
}
