#pragma once

// Figure-level experiments: fidelity sweeps, threshold times, robustness,
// trajectory differences, concatenated transport and control tables.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "latsta/controls.hpp"
#include "latsta/error.hpp"
#include "latsta/evolution.hpp"
#include "latsta/grid.hpp"
#include "latsta/model.hpp"
#include "latsta/protocol.hpp"
#include "latsta/stationary.hpp"

namespace latsta {

/// Spatial and temporal resolution of a propagation.
struct Resolution {
  std::size_t n_points = 4096;
  int periods = 4;
  double dt_over_T = 0.001;

  static Resolution fast() { return {4096, 4, 0.001}; }
  static Resolution paper() { return {1u << 14, 4, 0.001}; }

  Resolution dt_halved() const { return {n_points, periods, 0.5 * dt_over_T}; }
  Resolution grid_doubled() const { return {2 * n_points, periods, dt_over_T}; }
};

inline std::optional<Resolution> parse_resolution(std::string_view name) {
  if (name == "fast") return Resolution::fast();
  if (name == "paper") return Resolution::paper();
  return std::nullopt;
}

/// Evenly spaced in log t between lo and hi, inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw Error(ErrorKind::InvalidArgument, "bad log grid");
  std::vector<double> v(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(a + (b - a) * static_cast<double>(i) / (n - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (!(hi > lo) || n < 2) throw Error(ErrorKind::InvalidArgument, "bad linear grid");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

inline std::vector<double> loading_tf_grid() { return log_grid(0.25, 2.5, 24); }
inline std::vector<double> shifting_tf_grid() { return log_grid(0.25, 4.0, 24); }
inline std::vector<double> omega_0_grid() { return {6.0, 10.0, 14.0, 18.257, 22.0}; }
inline std::vector<double> epsilon_grid() { return linear_grid(-0.1, 0.1, 21); }

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write into slot i.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned w = 0; w < used; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

/// Ground states keyed by configuration and grid, shared between sweep
/// points. Two workers may compute the same entry; both results are equal.
class TargetCache {
 public:
  std::shared_ptr<const StationaryState> get(const ControlPoint& c, const Grid& grid, const ModelParams& params) {
    const Key key{c.omega_sq, c.q0, c.g, grid.x_lo, grid.x_hi, grid.n_points};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    auto s = std::make_shared<const StationaryState>(trap_ground_state(c.omega_sq, c.q0, c.g, grid, params));
    std::lock_guard<std::mutex> lock(mutex_);
    return map_.emplace(key, std::move(s)).first->second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return map_.size();
  }

 private:
  using Key = std::tuple<double, double, double, double, double, std::size_t>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const StationaryState>> map_;
};

/// One sweep point: scheme, block parameters and an optional perturbation.
struct PointSpec {
  Scheme scheme = Scheme::LoadingShortcut;
  BuildingBlockSpec block;
  PerturbationKind perturbation = PerturbationKind::None;
  double epsilon = 0.0;
};

struct Record {
  Scheme scheme = Scheme::LoadingShortcut;
  BlockKind block = BlockKind::Load;
  double t_f_over_T = 0.0;
  double g = 0.0;                  // headline interaction in hbar*Omega*sigma
  double omega_over_Omega = 0.0;   // trap frequency of the trapped end
  double epsilon = 0.0;
  PerturbationKind perturbation = PerturbationKind::None;
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_points = 0;
  double dt_over_T = 0.0;
  double dt_delta = std::numeric_limits<double>::quiet_NaN();
  double grid_delta = std::numeric_limits<double>::quiet_NaN();
  std::string error;

  bool ok() const { return error.empty() && std::isfinite(fidelity); }
  bool passes(double threshold) const { return ok() && fidelity >= threshold; }
};

/// Headline trap frequency and interaction of a block, as reported in records.
inline std::pair<double, double> block_headline(const BuildingBlockSpec& b) {
  switch (b.kind) {
    case BlockKind::Load: return {b.omega_f, b.g_f};
    case BlockKind::Shift:
    case BlockKind::Unload: return {b.omega_0, b.g_0};
  }
  return {0.0, 0.0};
}

/// Block spec with the headline frequency, interaction and duration set.
inline BuildingBlockSpec configure_block(BuildingBlockSpec b, double omega, double g, double t_f) {
  b.t_f = t_f;
  switch (b.kind) {
    case BlockKind::Load:
      b.omega_0 = 0.0;
      b.omega_f = omega;
      b.g_f = g;
      break;
    case BlockKind::Shift:
      b.omega_0 = b.omega_f = omega;
      b.g_0 = b.g_f = g;
      break;
    case BlockKind::Unload:
      b.omega_0 = omega;
      b.omega_f = 0.0;
      b.g_0 = g;
      break;
  }
  return b;
}

inline ControlProtocol build_point_protocol(const PointSpec& pt, const ModelParams& params) {
  const ControlProtocol nominal = make_protocol(pt.scheme, pt.block, params);
  switch (pt.perturbation) {
    case PerturbationKind::None: return nominal;
    case PerturbationKind::Position: return perturb_position(nominal, pt.epsilon, params.site_spacing());
    case PerturbationKind::Frequency: return perturb_frequency(nominal, pt.epsilon);
  }
  return nominal;
}

/// Fidelity of one protocol against the exact stationary state of its final
/// configuration, starting from the exact stationary state of its initial one.
inline double protocol_fidelity(const ControlProtocol& protocol, const ModelParams& params, const Resolution& res,
                                TargetCache& cache, std::size_t* steps = nullptr) {
  const double origin = protocol.frame(0.0).position;
  const double centre = std::round(origin / params.site_spacing()) * params.site_spacing();
  const Grid grid = Grid::centered(centre, res.periods, res.n_points, params);
  const Grid final_grid = grid.shifted(protocol.frame(protocol.t_f()).position - origin);
  const auto initial = cache.get(protocol.endpoints().start, grid, params);
  const auto target = cache.get(protocol.endpoints().end, final_grid, params);
  PropagationConfig cfg;
  cfg.dt = res.dt_over_T * params.T();
  const auto r = evolve(initial->psi, protocol, params, cfg);
  if (steps != nullptr) *steps = r.steps;
  return std::clamp(fidelity(target->psi, r.psi), 0.0, 1.0);
}

inline Record run_point(const PointSpec& pt, const ModelParams& params, const Resolution& res, TargetCache& cache,
                        bool check_convergence = false) {
  Record rec;
  rec.scheme = pt.scheme;
  rec.block = pt.block.kind;
  rec.t_f_over_T = pt.block.t_f / params.T();
  const auto [w, g] = block_headline(pt.block);
  rec.omega_over_Omega = w / params.Omega();
  rec.g = g / params.g_unit();
  rec.epsilon = pt.epsilon;
  rec.perturbation = pt.perturbation;
  rec.n_points = res.n_points;
  rec.dt_over_T = res.dt_over_T;
  try {
    const ControlProtocol protocol = build_point_protocol(pt, params);
    rec.fidelity = protocol_fidelity(protocol, params, res, cache);
    if (check_convergence) {
      rec.dt_delta = std::abs(protocol_fidelity(protocol, params, res.dt_halved(), cache) - rec.fidelity);
      rec.grid_delta = std::abs(protocol_fidelity(protocol, params, res.grid_doubled(), cache) - rec.fidelity);
    }
  } catch (const Error& e) {
    rec.fidelity = std::numeric_limits<double>::quiet_NaN();
    rec.error = e.what();
  }
  return rec;
}

struct RunOptions {
  unsigned threads = 1;
  /// Check dt halving and grid doubling at the first, middle and last t_f of
  /// each curve.
  bool convergence = false;
  /// A landmark delta above this refines the whole curve (dt halved and/or
  /// grid doubled), at most max_refinements times.
  double convergence_tolerance = 1e-4;
  int max_refinements = 3;
};

struct ThresholdRecord {
  Scheme scheme = Scheme::ShiftVariableFreq;
  BlockKind block = BlockKind::Shift;
  double omega_over_Omega = 0.0;
  double g = 0.0;
  double t_099_over_T = std::numeric_limits<double>::quiet_NaN();
  std::size_t evaluations = 0;
  double dt_delta = std::numeric_limits<double>::quiet_NaN();    // at t_099
  double grid_delta = std::numeric_limits<double>::quiet_NaN();  // at t_099
  std::string error;

  bool ok() const { return error.empty() && std::isfinite(t_099_over_T); }
};

struct ExperimentResult {
  std::string name;
  std::vector<Record> records;
  std::vector<ThresholdRecord> thresholds;

  std::vector<Record> curve(Scheme scheme, double g, double omega_over_Omega, double epsilon = 0.0,
                            PerturbationKind kind = PerturbationKind::None) const {
    std::vector<Record> out;
    for (const auto& r : records) {
      if (r.scheme == scheme && std::abs(r.g - g) < 1e-12 && std::abs(r.omega_over_Omega - omega_over_Omega) < 1e-9 &&
          (kind == PerturbationKind::None || r.perturbation == kind) &&
          (kind != PerturbationKind::None || std::abs(r.epsilon - epsilon) < 1e-12)) {
        out.push_back(r);
      }
    }
    return out;
  }
};

inline std::vector<Record> run_points(const std::vector<PointSpec>& points, const std::vector<bool>& convergence,
                                      const ModelParams& params, const Resolution& res, unsigned threads,
                                      TargetCache& cache) {
  std::vector<Record> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    out[i] = run_point(points[i], params, res, cache, i < convergence.size() && convergence[i]);
  });
  return out;
}

/// Runs consecutive curves of curve_size points. With convergence enabled the
/// landmark points of each curve are checked first; the curve's resolution is
/// refined until their deltas meet the tolerance, and the remaining points
/// use the resolution so found.
inline std::vector<Record> run_curves(const std::vector<PointSpec>& points, std::size_t curve_size,
                                      const std::vector<std::size_t>& landmarks, const ModelParams& params,
                                      const Resolution& res, const RunOptions& opt, TargetCache& cache) {
  std::vector<Record> out(points.size());
  const std::size_t curves = curve_size == 0 ? 0 : points.size() / curve_size;
  std::vector<Resolution> curve_res(curves, res);
  std::vector<bool> done(points.size(), false);
  if (opt.convergence) {
    parallel_for(curves, opt.threads, [&](std::size_t c) {
      Resolution rc = res;
      for (int k = 0;; ++k) {
        double dt_worst = 0.0, grid_worst = 0.0;
        for (std::size_t l : landmarks) {
          const std::size_t i = c * curve_size + l;
          out[i] = run_point(points[i], params, rc, cache, true);
          if (std::isfinite(out[i].dt_delta)) dt_worst = std::max(dt_worst, out[i].dt_delta);
          if (std::isfinite(out[i].grid_delta)) grid_worst = std::max(grid_worst, out[i].grid_delta);
        }
        const bool dt_ok = dt_worst <= opt.convergence_tolerance;
        const bool grid_ok = grid_worst <= opt.convergence_tolerance;
        if ((dt_ok && grid_ok) || k >= opt.max_refinements) break;
        if (!dt_ok) rc = rc.dt_halved();
        if (!grid_ok) rc = rc.grid_doubled();
      }
      curve_res[c] = rc;
      for (std::size_t l : landmarks) done[c * curve_size + l] = true;
    });
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!done[i]) rest.push_back(i);
  }
  parallel_for(rest.size(), opt.threads, [&](std::size_t k) {
    const std::size_t i = rest[k];
    out[i] = run_point(points[i], params, curve_res[i / curve_size], cache);
  });
  return out;
}

struct SweepSpec {
  BuildingBlockSpec block;
  std::vector<Scheme> schemes;
  std::vector<double> t_f_over_T;
  std::vector<double> g;                 // in hbar*Omega*sigma
  std::vector<double> omega_over_Omega;  // headline trap frequency
  std::vector<double> epsilon{0.0};
  PerturbationKind perturbation = PerturbationKind::None;

  void validate() const {
    auto increasing = [](const std::vector<double>& v, const char* what) {
      if (v.empty()) throw Error(ErrorKind::InvalidArgument, std::string(what) + " grid is empty");
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) {
          throw Error(ErrorKind::InvalidArgument, std::string(what) + " grid is not strictly increasing");
        }
      }
    };
    if (schemes.empty()) throw Error(ErrorKind::InvalidArgument, "no schemes in sweep");
    for (Scheme s : schemes) {
      if (s == Scheme::Composite || block_of(s) != block.kind) {
        throw Error(ErrorKind::InvalidArgument,
                    "scheme '" + std::string(scheme_name(s)) + "' does not belong to the swept block");
      }
    }
    increasing(t_f_over_T, "t_f");
    increasing(g, "g");
    increasing(omega_over_Omega, "omega_0");
    increasing(epsilon, "epsilon");
    for (double t : t_f_over_T) {
      if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_f must be positive");
    }
  }

  std::vector<PointSpec> points(const ModelParams& params) const {
    std::vector<PointSpec> pts;
    for (Scheme s : schemes) {
      for (double w : omega_over_Omega) {
        for (double gg : g) {
          for (double e : epsilon) {
            for (double t : t_f_over_T) {
              PointSpec p;
              p.scheme = s;
              p.block = configure_block(block, w * params.Omega(), gg * params.g_unit(), t * params.T());
              p.perturbation = perturbation;
              p.epsilon = e;
              pts.push_back(p);
            }
          }
        }
      }
    }
    return pts;
  }
};

inline ExperimentResult fidelity_vs_final_time(const SweepSpec& spec, const ModelParams& params,
                                               const Resolution& res, const RunOptions& opt = {},
                                               TargetCache* shared_cache = nullptr) {
  spec.validate();
  const auto pts = spec.points(params);
  const std::size_t n = spec.t_f_over_T.size();
  std::vector<std::size_t> landmarks{0, n / 2, n - 1};
  landmarks.erase(std::unique(landmarks.begin(), landmarks.end()), landmarks.end());
  TargetCache local;
  TargetCache& cache = shared_cache != nullptr ? *shared_cache : local;
  ExperimentResult r;
  r.name = "fidelity-sweep";
  r.records = run_curves(pts, n, landmarks, params, res, opt, cache);
  return r;
}

struct ThresholdOptions {
  double start_over_T = 0.25;
  double cap_over_T = 24.0;
  double ratio = 1.05;
  double resolution_over_T = 0.02;
  double level = 0.99;
  /// A passing run counts as the tail once it spans [t, tail_factor * t].
  double tail_factor = 2.0;
};

struct ThresholdSearch {
  double t_099_over_T = 0.0;
  std::vector<Record> evaluations;
};

/// Smallest sampled time beyond which every sampled evaluation passes.
/// A geometric scan locates the last failure before a confirmed passing
/// tail; bisection then narrows the crossing. `passes(t)` takes t in T.
template <class Passes>
double threshold_scan(Passes passes, const ThresholdOptions& opt) {
  std::optional<double> last_fail;
  std::optional<double> run_start;
  double t = opt.start_over_T;
  while (t <= opt.cap_over_T * (1.0 + 1e-12)) {
    if (passes(t)) {
      if (!run_start) run_start = t;
      if (t >= opt.tail_factor * *run_start) break;
    } else {
      last_fail = t;
      run_start.reset();
    }
    if (t >= opt.cap_over_T) break;
    t = std::min(t * opt.ratio, opt.cap_over_T);
  }
  if (!run_start) {
    throw Error(ErrorKind::ThresholdNotFound,
                "fidelity does not settle above " + std::to_string(opt.level) + " before " +
                    std::to_string(opt.cap_over_T) + " T");
  }
  if (!last_fail) return *run_start;
  double lo = *last_fail, hi = *run_start;
  while (hi - lo > opt.resolution_over_T) {
    const double mid = 0.5 * (lo + hi);
    (passes(mid) ? hi : lo) = mid;
  }
  return hi;
}

inline ThresholdSearch threshold_search(Scheme scheme, const BuildingBlockSpec& block, const ModelParams& params,
                                        const Resolution& res, const ThresholdOptions& opt, TargetCache& cache) {
  ThresholdSearch out;
  auto eval = [&](double t_over_T) {
    PointSpec p;
    p.scheme = scheme;
    p.block = block;
    p.block.t_f = t_over_T * params.T();
    out.evaluations.push_back(run_point(p, params, res, cache));
    return out.evaluations.back().passes(opt.level);
  };
  out.t_099_over_T = threshold_scan(eval, opt);
  return out;
}

inline double threshold_time(Scheme scheme, const BuildingBlockSpec& block, const ModelParams& params,
                             const Resolution& res, const ThresholdOptions& opt = {}) {
  TargetCache cache;
  return threshold_search(scheme, block, params, res, opt, cache).t_099_over_T;
}

/// Threshold times for every (scheme, omega, g) combination.
inline ExperimentResult threshold_sweep(const BuildingBlockSpec& block, const std::vector<Scheme>& schemes,
                                        const std::vector<double>& omega_over_Omega, const std::vector<double>& g,
                                        const ModelParams& params, const Resolution& res,
                                        const ThresholdOptions& topt = {}, const RunOptions& ropt = {}) {
  struct Job {
    Scheme scheme;
    double w, g;
  };
  std::vector<Job> jobs;
  for (Scheme s : schemes) {
    for (double w : omega_over_Omega) {
      for (double gg : g) jobs.push_back({s, w, gg});
    }
  }
  ExperimentResult r;
  r.name = "threshold";
  r.thresholds.resize(jobs.size());
  std::vector<std::vector<Record>> evals(jobs.size());
  TargetCache cache;
  parallel_for(jobs.size(), ropt.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    ThresholdRecord& tr = r.thresholds[i];
    tr.scheme = j.scheme;
    tr.block = block.kind;
    tr.omega_over_Omega = j.w;
    tr.g = j.g;
    const BuildingBlockSpec b = configure_block(block, j.w * params.Omega(), j.g * params.g_unit(), params.T());
    ThresholdSearch search;
    try {
      search = threshold_search(j.scheme, b, params, res, topt, cache);
      tr.t_099_over_T = search.t_099_over_T;
      if (ropt.convergence && std::isfinite(tr.t_099_over_T)) {
        PointSpec p;
        p.scheme = j.scheme;
        p.block = b;
        p.block.t_f = tr.t_099_over_T * params.T();
        const Record check = run_point(p, params, res, cache, true);
        tr.dt_delta = check.dt_delta;
        tr.grid_delta = check.grid_delta;
      }
    } catch (const Error& e) {
      tr.error = e.what();
    }
    tr.evaluations = search.evaluations.size();
    evals[i] = std::move(search.evaluations);
  });
  for (auto& e : evals) r.records.insert(r.records.end(), e.begin(), e.end());
  return r;
}

/// F(epsilon) at fixed t_f for each interaction strength.
inline ExperimentResult robustness_sweep(const BuildingBlockSpec& block, Scheme scheme,
                                         const std::vector<double>& epsilon, PerturbationKind kind,
                                         const std::vector<double>& g, const ModelParams& params,
                                         const Resolution& res, const RunOptions& opt = {}) {
  if (kind == PerturbationKind::None) throw Error(ErrorKind::InvalidArgument, "robustness needs a perturbation kind");
  SweepSpec spec;
  spec.block = block;
  spec.schemes = {scheme};
  spec.t_f_over_T = {block.t_f / params.T()};
  spec.g = g;
  spec.omega_over_Omega = {block_headline(block).first / params.Omega()};
  spec.epsilon = epsilon;
  spec.perturbation = kind;
  spec.validate();
  const auto pts = spec.points(params);
  std::vector<std::size_t> landmarks;
  for (std::size_t i = 0; i < epsilon.size(); ++i) {
    if (epsilon[i] == 0.0) landmarks.push_back(i);
  }
  TargetCache cache;
  ExperimentResult r;
  r.name = std::string("robustness-") + std::string(perturbation_name(kind));
  r.records = run_curves(pts, epsilon.size(), landmarks, params, res, opt, cache);
  return r;
}

struct DeltaRow {
  double t_f_over_T = 0.0;
  double s = 0.0;
  double q0_a1 = 0.0;
  double q0_a2 = 0.0;
  double delta = 0.0;
};

/// Difference of the trap centres of the two constant-frequency shifting
/// approximations, sampled on a uniform s = t/t_f grid.
inline std::vector<DeltaRow> trajectory_difference(double omega_0, const std::vector<double>& t_f_over_T,
                                                   const ModelParams& params, std::size_t n_s = 201,
                                                   int displacement = 1) {
  std::vector<DeltaRow> rows;
  for (double tfT : t_f_over_T) {
    BuildingBlockSpec b;
    b.kind = BlockKind::Shift;
    b.omega_0 = b.omega_f = omega_0;
    b.displacement = displacement;
    b.t_f = tfT * params.T();
    const auto a1 = shift_const_freq_1(b, params);
    const auto a2 = shift_const_freq_2(b, params);
    for (std::size_t i = 0; i < n_s; ++i) {
      const double s = static_cast<double>(i) / (n_s - 1);
      const double t = s * b.t_f;
      DeltaRow r;
      r.t_f_over_T = tfT;
      r.s = s;
      r.q0_a1 = a1.at(t).q0;
      r.q0_a2 = a2.at(t).q0;
      r.delta = r.q0_a1 - r.q0_a2;
      rows.push_back(r);
    }
  }
  return rows;
}

struct TransportSpec {
  int n_sites = 1;
  double omega_over_Omega = 18.257;
  double g = 0.0;  // trapped interaction, hbar*Omega*sigma
  double load_t_f_over_T = 1.10;
  double shift_t_f_over_T = 1.10;
  double unload_t_f_over_T = 1.10;
};

struct TransportResult {
  std::vector<Record> stages;
  Record total;
};

/// Load, n one-site shifts, unload. Every stage is scored from its exact
/// initial state; the total runs the concatenated protocol end to end.
inline TransportResult full_transport(const TransportSpec& spec, const ModelParams& params, const Resolution& res,
                                      const RunOptions& opt = {}) {
  if (spec.n_sites < 0) throw Error(ErrorKind::InvalidArgument, "n_sites must be non-negative");
  const double w = spec.omega_over_Omega * params.Omega();
  const double g = spec.g * params.g_unit();
  std::vector<PointSpec> pts;
  {
    PointSpec p;
    p.scheme = Scheme::LoadingShortcut;
    p.block.kind = BlockKind::Load;
    p.block = configure_block(p.block, w, g, spec.load_t_f_over_T * params.T());
    pts.push_back(p);
  }
  for (int i = 0; i < spec.n_sites; ++i) {
    PointSpec p;
    p.scheme = Scheme::ShiftVariableFreq;
    p.block.kind = BlockKind::Shift;
    p.block.displacement = 1;
    p.block.origin_site = i;
    p.block = configure_block(p.block, w, g, spec.shift_t_f_over_T * params.T());
    pts.push_back(p);
  }
  {
    PointSpec p;
    p.scheme = Scheme::UnloadingShortcut;
    p.block.kind = BlockKind::Unload;
    p.block.origin_site = spec.n_sites;
    p.block = configure_block(p.block, w, g, spec.unload_t_f_over_T * params.T());
    pts.push_back(p);
  }

  TargetCache cache;
  TransportResult out;
  out.stages = run_points(pts, {}, params, res, opt.threads, cache);

  Record& tot = out.total;
  tot.scheme = Scheme::Composite;
  tot.block = BlockKind::Shift;
  tot.g = spec.g;
  tot.omega_over_Omega = spec.omega_over_Omega;
  tot.n_points = res.n_points;
  tot.dt_over_T = res.dt_over_T;
  try {
    std::vector<ControlProtocol> blocks;
    for (const auto& p : pts) blocks.push_back(make_protocol(p.scheme, p.block, params));
    const ControlProtocol all = concat_protocols(blocks);
    tot.t_f_over_T = all.t_f() / params.T();
    tot.fidelity = protocol_fidelity(all, params, res, cache);
  } catch (const Error& e) {
    tot.error = e.what();
  }
  return out;
}

struct ControlRow {
  double t_f_over_T = 0.0;
  double s = 0.0;
  double omega_over_Omega = 0.0;  // signed
  double q0 = 0.0;                // in sigma
  double g = 0.0;                 // in hbar*Omega*sigma
};

inline std::vector<ControlRow> control_function_export(Scheme scheme, const BuildingBlockSpec& block,
                                                       const std::vector<double>& t_f_over_T,
                                                       const ModelParams& params, std::size_t n_s = 201) {
  std::vector<ControlRow> rows;
  for (double tfT : t_f_over_T) {
    BuildingBlockSpec b = block;
    b.t_f = tfT * params.T();
    const auto p = make_protocol(scheme, b, params);
    for (std::size_t i = 0; i < n_s; ++i) {
      const double s = static_cast<double>(i) / (n_s - 1);
      const auto c = p.at(s * b.t_f);
      rows.push_back({tfT, s, c.omega() / params.Omega(), c.q0 / params.sigma, c.g / params.g_unit()});
    }
  }
  return rows;
}

enum class ControlQuantity { Omega, Q0, G };

inline void write_control_csv(std::ostream& os, const std::vector<ControlRow>& rows, ControlQuantity q) {
  const char* col = q == ControlQuantity::Omega ? "omega/Omega" : q == ControlQuantity::Q0 ? "q0/sigma" : "g";
  os << "t_f/T,s," << col << '\n';
  char line[128];
  for (const auto& r : rows) {
    const double v = q == ControlQuantity::Omega ? r.omega_over_Omega : q == ControlQuantity::Q0 ? r.q0 : r.g;
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", r.t_f_over_T, r.s, v);
    os << line;
  }
}

inline void write_delta_csv(std::ostream& os, const std::vector<DeltaRow>& rows) {
  os << "t_f/T,s,q0_A1,q0_A2,delta_q0\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t_f_over_T, r.s, r.q0_a1, r.q0_a2,
                  r.delta);
    os << line;
  }
}

/// One row per successful record; failures are listed in the manifest.
inline void write_records_csv(std::ostream& os, const std::vector<Record>& records) {
  os << "scheme,block,t_f/T,g,omega_0/Omega,epsilon,fidelity,n_points,dt\n";
  char line[256];
  for (const auto& r : records) {
    if (!r.ok()) continue;
    std::snprintf(line, sizeof line, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%.17g\n",
                  std::string(scheme_name(r.scheme)).c_str(), std::string(block_name(r.block)).c_str(),
                  r.t_f_over_T, r.g, r.omega_over_Omega, r.epsilon, r.fidelity, r.n_points, r.dt_over_T);
    os << line;
  }
}

inline void write_thresholds_csv(std::ostream& os, const std::vector<ThresholdRecord>& th) {
  os << "scheme,block,omega_0/Omega,g,t_099/T,evaluations\n";
  char line[200];
  for (const auto& t : th) {
    if (!t.ok()) continue;
    std::snprintf(line, sizeof line, "%s,%s,%.17g,%.17g,%.17g,%zu\n", std::string(scheme_name(t.scheme)).c_str(),
                  std::string(block_name(t.block)).c_str(), t.omega_over_Omega, t.g, t.t_099_over_T,
                  t.evaluations);
    os << line;
  }
}

inline nlohmann::json record_json(const Record& r) {
  nlohmann::json j{{"scheme", scheme_name(r.scheme)},
                   {"block", block_name(r.block)},
                   {"t_f/T", r.t_f_over_T},
                   {"g", r.g},
                   {"omega_0/Omega", r.omega_over_Omega},
                   {"epsilon", r.epsilon},
                   {"perturbation", perturbation_name(r.perturbation)}};
  if (r.ok()) j["fidelity"] = r.fidelity;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

/// Manifest body: counts, failures and convergence metadata.
inline nlohmann::json experiment_manifest(const ExperimentResult& r, const ModelParams& p, const Resolution& res) {
  nlohmann::json m;
  m["experiment"] = r.name;
  m["model"] = {{"hbar", p.hbar}, {"mass", p.mass}, {"sigma", p.sigma}, {"U0", p.U0},
                {"depth_ratio", p.depth_ratio()}};
  m["resolution"] = {{"n_points", res.n_points}, {"periods", res.periods}, {"dt/T", res.dt_over_T}};
  m["records"] = r.records.size();
  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json convergence = nlohmann::json::array();
  double worst = 0.0;
  for (const auto& rec : r.records) {
    if (!rec.ok()) failures.push_back(record_json(rec));
    if (std::isfinite(rec.dt_delta) || std::isfinite(rec.grid_delta)) {
      auto j = record_json(rec);
      j["dt_halving_delta"] = rec.dt_delta;
      j["grid_doubling_delta"] = rec.grid_delta;
      worst = std::max({worst, rec.dt_delta, rec.grid_delta});
      convergence.push_back(j);
    }
  }
  m["failures"] = failures;
  m["convergence"] = convergence;
  if (!convergence.empty()) m["max_convergence_delta"] = worst;
  if (!r.thresholds.empty()) {
    nlohmann::json th = nlohmann::json::array();
    for (const auto& t : r.thresholds) {
      nlohmann::json j{{"scheme", scheme_name(t.scheme)},
                       {"omega_0/Omega", t.omega_over_Omega},
                       {"g", t.g},
                       {"evaluations", t.evaluations}};
      if (t.ok()) j["t_099/T"] = t.t_099_over_T;
      if (std::isfinite(t.dt_delta)) {
        j["dt_halving_delta"] = t.dt_delta;
        j["grid_doubling_delta"] = t.grid_delta;
      }
      if (!t.error.empty()) j["error"] = t.error;
      th.push_back(j);
    }
    m["thresholds"] = th;
  }
  return m;
}

}  // namespace latsta
