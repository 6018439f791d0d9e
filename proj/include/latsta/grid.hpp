#pragma once

// Periodic position grid, wavefunctions on it, and a thin FFTW wrapper.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include "latsta/error.hpp"
#include "latsta/model.hpp"

namespace latsta {

using cplx = std::complex<double>;

/// Uniform periodic grid x_j = x_lo + j*dx, j = 0..n-1.
struct Grid {
  double x_lo = 0.0;
  double x_hi = 0.0;
  std::size_t n_points = 0;

  double length() const { return x_hi - x_lo; }
  double dx() const { return length() / static_cast<double>(n_points); }
  double x(std::size_t j) const { return x_lo + static_cast<double>(j) * dx(); }

  /// Angular wavenumber of FFT bin j (standard FFT ordering).
  double k(std::size_t j) const {
    const double dk = 2.0 * pi / length();
    const auto n = static_cast<long>(n_points);
    long jj = static_cast<long>(j);
    if (jj >= n / 2) jj -= n;
    return dk * static_cast<double>(jj);
  }

  std::vector<double> positions() const {
    std::vector<double> out(n_points);
    for (std::size_t j = 0; j < n_points; ++j) out[j] = x(j);
    return out;
  }

  Grid shifted(double offset) const { return Grid{x_lo + offset, x_hi + offset, n_points}; }

  bool same_as(const Grid& o, double tol = 1e-12) const {
    return n_points == o.n_points && std::abs(x_lo - o.x_lo) <= tol * (1.0 + std::abs(x_lo)) &&
           std::abs(x_hi - o.x_hi) <= tol * (1.0 + std::abs(x_hi));
  }

  /// Grid of `periods` lattice periods centred on `center`.
  static Grid centered(double center, int periods, std::size_t n_points, const ModelParams& params) {
    const double half = 0.5 * periods * params.site_spacing();
    Grid g{center - half, center + half, n_points};
    g.validate(params);
    return g;
  }

  void validate(const ModelParams& params) const {
    if (n_points < 1024 || (n_points & (n_points - 1)) != 0) {
      throw Error(ErrorKind::InvalidArgument, "grid size must be a power of two >= 1024");
    }
    if (!(x_hi > x_lo)) throw Error(ErrorKind::InvalidArgument, "grid needs x_hi > x_lo");
    const double periods = length() / params.site_spacing();
    if (std::abs(periods - std::round(periods)) > 1e-9 * periods || std::round(periods) < 1.0) {
      throw Error(ErrorKind::InvalidArgument, "grid must span an integer number of lattice periods");
    }
  }
};

class Wavefunction {
 public:
  Wavefunction() = default;
  explicit Wavefunction(Grid grid) : grid_(grid), psi_(grid.n_points, cplx{0.0, 0.0}) {}
  Wavefunction(Grid grid, std::vector<cplx> amplitudes) : grid_(grid), psi_(std::move(amplitudes)) {
    if (psi_.size() != grid_.n_points) {
      throw Error(ErrorKind::GridMismatch, "amplitude count does not match the grid");
    }
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return psi_.size(); }
  cplx& operator[](std::size_t j) { return psi_[j]; }
  const cplx& operator[](std::size_t j) const { return psi_[j]; }
  std::vector<cplx>& amplitudes() { return psi_; }
  const std::vector<cplx>& amplitudes() const { return psi_; }

  double norm() const {
    double s = 0.0;
    for (const auto& a : psi_) s += std::norm(a);
    return s * grid_.dx();
  }

  void normalize() {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorKind::NanDetected, "cannot normalize wavefunction");
    const double s = 1.0 / std::sqrt(n);
    for (auto& a : psi_) a *= s;
  }

  double mean_x() const {
    double s = 0.0;
    for (std::size_t j = 0; j < psi_.size(); ++j) s += grid_.x(j) * std::norm(psi_[j]);
    return s * grid_.dx() / norm();
  }

  double variance_x() const {
    const double m = mean_x();
    double s = 0.0;
    for (std::size_t j = 0; j < psi_.size(); ++j) {
      const double d = grid_.x(j) - m;
      s += d * d * std::norm(psi_[j]);
    }
    return s * grid_.dx() / norm();
  }

  /// Same amplitudes relabelled on a grid translated by `offset`.
  Wavefunction relabelled(double offset) const { return Wavefunction(grid_.shifted(offset), psi_); }

  static Wavefunction gaussian(const Grid& grid, double center, double width, double k0 = 0.0) {
    Wavefunction w(grid);
    for (std::size_t j = 0; j < grid.n_points; ++j) {
      const double d = grid.x(j) - center;
      w[j] = std::exp(cplx{-d * d / (4.0 * width * width), k0 * d});
    }
    w.normalize();
    return w;
  }

 private:
  Grid grid_;
  std::vector<cplx> psi_;
};

/// Overlap <a|b> = sum conj(a_j) b_j dx.
inline cplx overlap(const Wavefunction& a, const Wavefunction& b) {
  if (!a.grid().same_as(b.grid())) throw Error(ErrorKind::GridMismatch, "states live on different grids");
  cplx s{0.0, 0.0};
  for (std::size_t j = 0; j < a.size(); ++j) s += std::conj(a[j]) * b[j];
  return s * a.grid().dx();
}

/// F = |<a|b>|^2.
inline double fidelity(const Wavefunction& a, const Wavefunction& b) { return std::norm(overlap(a, b)); }

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place complex FFT on an owned buffer. Planning is serialised because
/// the FFTW planner is not thread-safe; execution is.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n) : n_(n) {
    data_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (data_ == nullptr) throw std::bad_alloc();
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    auto* p = reinterpret_cast<fftw_complex*>(data_);
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBuffer() {
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
    }
    fftw_free(data_);
  }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::size_t size() const { return n_; }
  cplx* data() { return data_; }
  cplx& operator[](std::size_t j) { return data_[j]; }

  void load(const std::vector<cplx>& v) { std::copy(v.begin(), v.end(), data_); }
  void store(std::vector<cplx>& v) const { v.assign(data_, data_ + n_); }

  void forward() { fftw_execute(fwd_); }
  /// Unnormalised inverse; callers fold 1/n into their multipliers.
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t n_;
  cplx* data_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Translate a periodic band-limited state by an arbitrary distance
/// (spectral shift), keeping the grid.
inline Wavefunction spectral_translate(const Wavefunction& w, double distance) {
  const Grid& g = w.grid();
  FftBuffer buf(g.n_points);
  buf.load(w.amplitudes());
  buf.forward();
  const double inv_n = 1.0 / static_cast<double>(g.n_points);
  for (std::size_t j = 0; j < g.n_points; ++j) {
    buf[j] *= std::polar(inv_n, -g.k(j) * distance);
  }
  buf.backward();
  Wavefunction out(g);
  buf.store(out.amplitudes());
  return out;
}

/// Kinetic energy and momentum expectation values via FFT.
struct MomentumMoments {
  double kinetic = 0.0;
  double momentum = 0.0;
};

inline MomentumMoments momentum_moments(const Wavefunction& w, const ModelParams& params) {
  const Grid& g = w.grid();
  FftBuffer buf(g.n_points);
  buf.load(w.amplitudes());
  buf.forward();
  double p1 = 0.0;
  double p2 = 0.0;
  double n = 0.0;
  for (std::size_t j = 0; j < g.n_points; ++j) {
    const double a = std::norm(buf[j]);
    const double k = g.k(j);
    n += a;
    p1 += k * a;
    p2 += k * k * a;
  }
  const double hb = params.hbar;
  return {hb * hb * p2 / (2.0 * params.mass * n), hb * p1 / n};
}

}  // namespace latsta
