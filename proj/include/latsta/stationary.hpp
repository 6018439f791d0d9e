#pragma once

// Stationary states of the linear Schroedinger equation and of the GPE on a
// periodic grid. Imaginary-time split-step from a seeded Gaussian, followed
// by a dense solve on the window that holds the state.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latsta/error.hpp"
#include "latsta/grid.hpp"
#include "latsta/model.hpp"

namespace latsta {

struct GroundStateOptions {
  std::size_t max_iterations = 200000;
  double energy_tolerance = 1e-12;
  double residual_tolerance = 1e-8;
  bool require_localized = true;
  double localization_tolerance = 1e-6;
  bool dense_refinement = true;
  std::size_t max_window = 4096;
  std::size_t max_newton_iterations = 60;
};

struct StationaryState {
  Wavefunction psi;
  double mu = 0.0;
  double energy = 0.0;
  double g = 0.0;
  /// ||(H + g|psi|^2) psi - mu psi|| / |mu|
  double residual = 0.0;
  std::vector<double> potential;
};

namespace detail {

inline std::vector<double> sample_potential(const std::function<double(double)>& V, const Grid& grid) {
  std::vector<double> out(grid.n_points);
  for (std::size_t j = 0; j < grid.n_points; ++j) out[j] = V(grid.x(j));
  return out;
}

inline std::vector<double> kinetic_factors(const Grid& grid, const ModelParams& p) {
  std::vector<double> t(grid.n_points);
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    const double k = grid.k(j);
    t[j] = p.hbar * p.hbar * k * k / (2.0 * p.mass);
  }
  return t;
}

// (H + g|psi|^2) psi on the full grid.
inline std::vector<cplx> apply_hamiltonian(const Wavefunction& psi, const std::vector<double>& V, double g,
                                           const ModelParams& p) {
  const Grid& grid = psi.grid();
  const std::size_t n = grid.n_points;
  const auto tk = kinetic_factors(grid, p);
  FftBuffer buf(n);
  buf.load(psi.amplitudes());
  buf.forward();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) buf[j] *= tk[j] * inv_n;
  buf.backward();
  std::vector<cplx> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = buf[j] + (V[j] + g * std::norm(psi[j])) * psi[j];
  return out;
}

inline double periodic_distance(double x, double c, double L) {
  double d = std::fmod(x - c, L);
  if (d > 0.5 * L) d -= L;
  if (d < -0.5 * L) d += L;
  return d;
}

// Imaginary-time Strang split-step. Returns the normalised fixed point.
inline Wavefunction imaginary_time(Wavefunction psi, const std::vector<double>& V, double g, double dtau,
                                   const ModelParams& p, const GroundStateOptions& opt) {
  const Grid& grid = psi.grid();
  const std::size_t n = grid.n_points;
  const auto tk = kinetic_factors(grid, p);
  FftBuffer buf(n);
  auto energy_of = [&](const Wavefunction& w) {
    const auto h = apply_hamiltonian(w, V, g, p);
    double e = 0.0;
    for (std::size_t j = 0; j < n; ++j) e += std::real(std::conj(w[j]) * h[j]);
    return e * grid.dx();
  };
  double e_prev = energy_of(psi);
  const double e_scale = std::max(std::abs(e_prev), 1e-300);
  std::size_t it = 0;
  constexpr std::size_t check_every = 10;
  std::vector<double> kin(n);
  auto rebuild = [&]() {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) kin[j] = std::exp(-tk[j] * dtau / p.hbar) * inv_n;
  };
  rebuild();
  while (it < opt.max_iterations) {
    for (std::size_t s = 0; s < check_every; ++s, ++it) {
      for (std::size_t j = 0; j < n; ++j) {
        buf[j] = psi[j] * std::exp(-0.5 * dtau / p.hbar * (V[j] + g * std::norm(psi[j])));
      }
      buf.forward();
      for (std::size_t j = 0; j < n; ++j) buf[j] *= kin[j];
      buf.backward();
      for (std::size_t j = 0; j < n; ++j) {
        psi[j] = buf[j] * std::exp(-0.5 * dtau / p.hbar * (V[j] + g * std::norm(buf[j])));
      }
      psi.normalize();
    }
    const double e = energy_of(psi);
    if (!std::isfinite(e)) throw Error(ErrorKind::NanDetected, "imaginary-time energy is not finite");
    if (e > e_prev + 1e-14 * e_scale) {
      dtau *= 0.5;
      rebuild();
      e_prev = e;
      if (dtau * e_scale < 1e-12 * p.hbar) break;
      continue;
    }
    const double change = std::abs(e - e_prev) / static_cast<double>(check_every);
    e_prev = e;
    if (change < opt.energy_tolerance * std::max(std::abs(e), 1e-300)) return psi;
  }
  if (!opt.dense_refinement) {
    throw Error(ErrorKind::NoConvergence, "imaginary-time iteration cap reached");
  }
  return psi;
}

// Contiguous (periodic) index window containing the state down to its tail.
inline std::vector<std::size_t> state_window(const Wavefunction& psi, double tail, std::size_t margin) {
  const std::size_t n = psi.size();
  std::size_t jmax = 0;
  double amax = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = std::abs(psi[j]);
    if (a > amax) {
      amax = a;
      jmax = j;
    }
  }
  const double thr = tail * amax;
  std::size_t left = 0;
  std::size_t right = 0;
  while (left < n / 2 && std::abs(psi[(jmax + n - left - 1) % n]) > thr) ++left;
  while (right < n / 2 && std::abs(psi[(jmax + right + 1) % n]) > thr) ++right;
  left = std::min(left + margin, n / 2);
  right = std::min(right + margin, n / 2 - 1);
  std::vector<std::size_t> idx;
  idx.reserve(left + right + 1);
  for (std::size_t s = 0; s < left + right + 1; ++s) idx.push_back((jmax + n - left + s) % n);
  return idx;
}

// Dense lowest eigenvector (g = 0) or Newton on (phi, mu) (g > 0) restricted
// to a window. Returns false if the state reaches the window edge.
inline bool refine_on_window(Wavefunction& psi, const std::vector<double>& V, double g,
                             const std::vector<std::size_t>& idx, const ModelParams& p,
                             const GroundStateOptions& opt) {
  const Grid& grid = psi.grid();
  const std::size_t n = grid.n_points;
  const std::size_t M = idx.size();
  const double dx = grid.dx();

  // Real-space entries of the spectral kinetic operator on the periodic grid.
  const auto tk = kinetic_factors(grid, p);
  FftBuffer buf(n);
  for (std::size_t j = 0; j < n; ++j) buf[j] = tk[j] / static_cast<double>(n);
  buf.backward();
  std::vector<double> tcol(n);
  for (std::size_t j = 0; j < n; ++j) tcol[j] = buf[j].real();

  Eigen::MatrixXd H(M, M);
  for (std::size_t a = 0; a < M; ++a) {
    for (std::size_t b = 0; b < M; ++b) H(a, b) = tcol[(idx[a] + n - idx[b]) % n];
    H(a, a) += V[idx[a]];
  }

  Eigen::VectorXd phi(M);
  double mu = 0.0;
  if (g == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NoConvergence, "dense eigensolver failed");
    phi = es.eigenvectors().col(0) / std::sqrt(dx);
    mu = es.eigenvalues()(0);
  } else {
    for (std::size_t a = 0; a < M; ++a) phi(a) = psi[idx[a]].real();
    phi /= std::sqrt(phi.squaredNorm() * dx);
    mu = phi.dot(H * phi + g * phi.cwiseAbs2().cwiseProduct(phi)) * dx;
    auto residual_of = [&](const Eigen::VectorXd& f, double m) {
      Eigen::VectorXd r = H * f + g * f.cwiseAbs2().cwiseProduct(f) - m * f;
      const double c = 0.5 * (f.squaredNorm() * dx - 1.0);
      return std::sqrt(r.squaredNorm() + c * c);
    };
    double res = residual_of(phi, mu);
    bool converged = false;
    for (std::size_t it = 0; it < opt.max_newton_iterations; ++it) {
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M + 1, M + 1);
      J.topLeftCorner(M, M) = H;
      for (std::size_t a = 0; a < M; ++a) J(a, a) += 3.0 * g * phi(a) * phi(a) - mu;
      J.block(0, M, M, 1) = -phi;
      J.block(M, 0, 1, M) = (phi * dx).transpose();
      Eigen::VectorXd r(M + 1);
      r.head(M) = H * phi + g * phi.cwiseAbs2().cwiseProduct(phi) - mu * phi;
      r(M) = 0.5 * (phi.squaredNorm() * dx - 1.0);
      const Eigen::VectorXd delta = J.partialPivLu().solve(-r);
      double lambda = 1.0;
      Eigen::VectorXd trial;
      double trial_mu = mu;
      double trial_res = res;
      for (int ls = 0; ls < 20; ++ls) {
        trial = phi + lambda * delta.head(M);
        trial_mu = mu + lambda * delta(M);
        trial_res = residual_of(trial, trial_mu);
        if (trial_res < res || ls == 19) break;
        lambda *= 0.5;
      }
      phi = trial;
      mu = trial_mu;
      res = trial_res;
      if (lambda * delta.head(M).cwiseAbs().maxCoeff() < 1e-13 * phi.cwiseAbs().maxCoeff()) {
        converged = true;
        break;
      }
    }
    if (!converged && res > 1e-10 * std::abs(mu) * phi.cwiseAbs().maxCoeff()) {
      throw Error(ErrorKind::NoConvergence, "Newton iteration for the stationary GPE did not converge");
    }
  }
  Eigen::Index amax = 0;
  phi.cwiseAbs().maxCoeff(&amax);
  if (phi(amax) < 0.0) phi = -phi;
  const double edge = std::max(std::abs(phi(0)), std::abs(phi(M - 1))) / std::abs(phi(amax));

  Wavefunction out(grid);
  for (std::size_t a = 0; a < M; ++a) out[idx[a]] = phi(a);
  out.normalize();
  psi = std::move(out);
  return edge <= 1e-13 || M >= n;
}

}  // namespace detail

/// mu = <phi| -hbar^2/2m d^2 + V + g|phi|^2 |phi>
inline double chemical_potential(const Wavefunction& psi, const std::vector<double>& V, double g,
                                 const ModelParams& p) {
  const auto h = detail::apply_hamiltonian(psi, V, g, p);
  cplx s{0.0, 0.0};
  for (std::size_t j = 0; j < psi.size(); ++j) s += std::conj(psi[j]) * h[j];
  return s.real() * psi.grid().dx() / psi.norm();
}

inline double chemical_potential(const StationaryState& s, const ModelParams& p) {
  return chemical_potential(s.psi, s.potential, s.g, p);
}

/// GPE energy functional <T + V> + g/2 int |phi|^4.
inline double stationary_energy(const Wavefunction& psi, const std::vector<double>& V, double g,
                                const ModelParams& p) {
  const double mu_lin = chemical_potential(psi, V, 0.0, p);
  double quartic = 0.0;
  for (std::size_t j = 0; j < psi.size(); ++j) quartic += std::norm(psi[j]) * std::norm(psi[j]);
  return mu_lin + 0.5 * g * quartic * psi.grid().dx();
}

/// ||(H + g|phi|^2) phi - mu phi||_2 / |mu|
inline double stationary_residual(const Wavefunction& psi, const std::vector<double>& V, double g, double mu,
                                  const ModelParams& p) {
  const auto h = detail::apply_hamiltonian(psi, V, g, p);
  double s = 0.0;
  for (std::size_t j = 0; j < psi.size(); ++j) s += std::norm(h[j] - mu * psi[j]);
  return std::sqrt(s * psi.grid().dx()) / std::max(std::abs(mu), 1e-300);
}

inline StationaryState ground_state(const std::vector<double>& V, double g, const Grid& grid,
                                    double seed_center, const ModelParams& params,
                                    const GroundStateOptions& opt = {}) {
  params.validate();
  if (V.size() != grid.n_points) throw Error(ErrorKind::GridMismatch, "potential samples do not match grid");
  if (g < 0.0) throw Error(ErrorKind::InvalidArgument, "interaction must be non-negative");

  // Local curvature at the seed sets the Gaussian width and the step.
  const double dx = grid.dx();
  const std::size_t jc = static_cast<std::size_t>(
      std::clamp(std::round((seed_center - grid.x_lo) / dx), 0.0, static_cast<double>(grid.n_points - 1)));
  const std::size_t n = grid.n_points;
  const std::size_t h = std::max<std::size_t>(1, static_cast<std::size_t>(0.01 * params.sigma / dx));
  const double curv = (V[(jc + h) % n] - 2.0 * V[jc] + V[(jc + n - h) % n]) / (h * h * dx * dx);
  double w_loc = std::sqrt(std::max(curv, 0.0) / params.mass);
  if (!(w_loc > 0.0)) w_loc = params.hbar / (params.mass * params.sigma * params.sigma);
  const double width = std::sqrt(params.hbar / (2.0 * params.mass * w_loc));

  Wavefunction psi = Wavefunction::gaussian(grid, seed_center, width);
  const double dtau = 0.1 / w_loc;
  psi = detail::imaginary_time(std::move(psi), V, g, dtau, params, opt);

  if (opt.dense_refinement) {
    std::size_t margin = 32;
    bool ok = false;
    for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
      const auto idx = detail::state_window(psi, 1e-15, margin);
      if (idx.size() > opt.max_window) break;
      ok = detail::refine_on_window(psi, V, g, idx, params, opt);
      margin = margin * 2 + idx.size() / 2;
    }
  }

  StationaryState s;
  s.g = g;
  s.mu = chemical_potential(psi, V, g, params);
  s.energy = stationary_energy(psi, V, g, params);
  s.residual = stationary_residual(psi, V, g, s.mu, params);
  if (!(s.residual <= opt.residual_tolerance)) {
    throw Error(ErrorKind::NoConvergence,
                "stationary residual " + std::to_string(s.residual) + " above tolerance");
  }
  if (opt.require_localized) {
    double outside = 0.0;
    const double half = 0.5 * params.site_spacing();
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(detail::periodic_distance(grid.x(j), seed_center, grid.length())) > half) {
        outside += std::norm(psi[j]);
      }
    }
    outside *= dx;
    if (outside > opt.localization_tolerance) {
      throw Error(ErrorKind::DelocalizedResult,
                  "probability " + std::to_string(outside) + " outside the seeded well");
    }
  }
  s.psi = std::move(psi);
  s.potential = V;
  return s;
}

inline StationaryState ground_state(const std::function<double(double)>& potential, double g, const Grid& grid,
                                    double seed_center, const ModelParams& params,
                                    const GroundStateOptions& opt = {}) {
  return ground_state(detail::sample_potential(potential, grid), g, grid, seed_center, params, opt);
}

/// Ground state of lattice + trap with (signed) omega^2 and centre q0, seeded
/// at the potential minimum nearest q0.
inline StationaryState trap_ground_state(double omega_sq, double q0, double g, const Grid& grid,
                                         const ModelParams& params, const GroundStateOptions& opt = {}) {
  double seed = q0;
  if (omega_sq > 0.0) {
    seed = virtual_from_real(TrapState{std::sqrt(omega_sq), q0, 0.0, 0.0}, params).second;
  } else {
    seed = std::round(q0 / params.site_spacing()) * params.site_spacing();
  }
  auto V = [&](double x) { return full_potential_sq(x, omega_sq, q0, params); };
  return ground_state(V, g, grid, seed, params, opt);
}

inline void write_snapshot_csv(std::ostream& os, const Wavefunction& psi) {
  os << "x,re_psi,im_psi\n";
  char line[128];
  for (std::size_t j = 0; j < psi.size(); ++j) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", psi.grid().x(j), psi[j].real(), psi[j].imag());
    os << line;
  }
}

inline nlohmann::json snapshot_metadata(const StationaryState& s, const ModelParams& p) {
  const Grid& g = s.psi.grid();
  return {
      {"grid", {{"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"n_points", g.n_points}, {"dx", g.dx()}}},
      {"g", s.g},
      {"mu", s.mu},
      {"energy", s.energy},
      {"residual", s.residual},
      {"mean_x", s.psi.mean_x()},
      {"units", {{"hbar", p.hbar}, {"mass", p.mass}, {"sigma", p.sigma}, {"U0", p.U0}, {"Omega", p.Omega()}}},
  };
}

}  // namespace latsta
