#pragma once

// Time-dependent control protocols: closed-form evaluators for omega^2(t),
// q0(t) and g(t), the reference frame the propagator co-moves with, and a
// uniformly sampled copy for export.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latsta/error.hpp"

namespace latsta {

enum class Scheme {
  LoadingShortcut,
  LoadingAdiabatic,
  LoadingConstG,
  ShiftVariableFreq,
  ShiftConstFreq1,
  ShiftConstFreq2,
  ShiftAdiabatic,
  UnloadingShortcut,
  UnloadingAdiabatic,
  UnloadingConstG,
  Composite,
};

inline constexpr Scheme all_block_schemes[] = {
    Scheme::LoadingShortcut,   Scheme::LoadingAdiabatic,   Scheme::LoadingConstG,
    Scheme::ShiftVariableFreq, Scheme::ShiftConstFreq1,    Scheme::ShiftConstFreq2,
    Scheme::ShiftAdiabatic,    Scheme::UnloadingShortcut,  Scheme::UnloadingAdiabatic,
    Scheme::UnloadingConstG,
};

constexpr std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::LoadingShortcut: return "loading-shortcut";
    case Scheme::LoadingAdiabatic: return "loading-adiabatic";
    case Scheme::LoadingConstG: return "loading-const-g";
    case Scheme::ShiftVariableFreq: return "shift-variable-freq";
    case Scheme::ShiftConstFreq1: return "shift-const-freq-1";
    case Scheme::ShiftConstFreq2: return "shift-const-freq-2";
    case Scheme::ShiftAdiabatic: return "shift-adiabatic";
    case Scheme::UnloadingShortcut: return "unloading-shortcut";
    case Scheme::UnloadingAdiabatic: return "unloading-adiabatic";
    case Scheme::UnloadingConstG: return "unloading-const-g";
    case Scheme::Composite: return "composite";
  }
  return "unknown";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : all_block_schemes) {
    if (scheme_name(s) == name) return s;
  }
  if (name == scheme_name(Scheme::Composite)) return Scheme::Composite;
  return std::nullopt;
}

enum class BlockKind { Load, Shift, Unload };

constexpr std::string_view block_name(BlockKind k) {
  switch (k) {
    case BlockKind::Load: return "load";
    case BlockKind::Shift: return "shift";
    case BlockKind::Unload: return "unload";
  }
  return "unknown";
}

inline std::optional<BlockKind> parse_block(std::string_view name) {
  if (name == "load") return BlockKind::Load;
  if (name == "shift") return BlockKind::Shift;
  if (name == "unload") return BlockKind::Unload;
  return std::nullopt;
}

constexpr BlockKind block_of(Scheme s) {
  switch (s) {
    case Scheme::LoadingShortcut:
    case Scheme::LoadingAdiabatic:
    case Scheme::LoadingConstG: return BlockKind::Load;
    case Scheme::UnloadingShortcut:
    case Scheme::UnloadingAdiabatic:
    case Scheme::UnloadingConstG: return BlockKind::Unload;
    default: return BlockKind::Shift;
  }
}

/// One building block: frequencies in rad/time, interactions in internal
/// units, positions in lattice sites. For loading g_f is the target value
/// and the initial interaction follows from the schedule; for unloading g_0
/// is the initial value.
struct BuildingBlockSpec {
  BlockKind kind = BlockKind::Load;
  double omega_0 = 0.0;
  double omega_f = 0.0;
  double g_0 = 0.0;
  double g_f = 0.0;
  int displacement = 0;
  int origin_site = 0;
  double t_f = 1.0;

  void validate() const {
    if (!(t_f > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_f must be positive");
    if (omega_0 < 0.0 || omega_f < 0.0) {
      throw Error(ErrorKind::InvalidArgument, "trap frequencies must be non-negative");
    }
    switch (kind) {
      case BlockKind::Load:
        if (omega_0 != 0.0) throw Error(ErrorKind::InvalidArgument, "loading starts with omega_0 = 0");
        if (!(omega_f > 0.0)) throw Error(ErrorKind::InvalidArgument, "loading needs omega_f > 0");
        if (displacement != 0) throw Error(ErrorKind::InvalidArgument, "loading does not move the trap");
        break;
      case BlockKind::Unload:
        if (omega_f != 0.0) throw Error(ErrorKind::InvalidArgument, "unloading ends with omega_f = 0");
        if (!(omega_0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "unloading needs omega_0 > 0");
        if (displacement != 0) throw Error(ErrorKind::InvalidArgument, "unloading does not move the trap");
        break;
      case BlockKind::Shift:
        if (omega_0 != omega_f) throw Error(ErrorKind::InvalidArgument, "shifting keeps omega_0 = omega_f");
        if (!(omega_0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "shifting needs omega_0 > 0");
        if (displacement == 0) throw Error(ErrorKind::InvalidArgument, "shifting needs a non-zero displacement");
        break;
    }
  }
};

struct ControlPoint {
  double omega_sq = 0.0;
  double q0 = 0.0;
  double g = 0.0;

  /// Signed square root: negative for an expulsive trap.
  double omega() const {
    return omega_sq >= 0.0 ? std::sqrt(omega_sq) : -std::sqrt(-omega_sq);
  }
};

/// Reference trajectory X(t) of the co-moving frame used by the propagator.
struct FramePoint {
  double position = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
};

/// Virtual harmonic trap realised by a protocol (shortcut schemes only).
struct VirtualPoint {
  double omega_tilde_sq = 0.0;
  double x_min = 0.0;
};

struct ControlSample {
  double t = 0.0;
  ControlPoint control;
};

struct Endpoints {
  ControlPoint start;
  ControlPoint end;
};

enum class PerturbationKind { None, Position, Frequency };

constexpr std::string_view perturbation_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::None: return "none";
    case PerturbationKind::Position: return "position";
    case PerturbationKind::Frequency: return "frequency";
  }
  return "unknown";
}

class ControlProtocol {
 public:
  using ControlFn = std::function<ControlPoint(double)>;
  using FrameFn = std::function<FramePoint(double)>;
  using VirtualFn = std::function<VirtualPoint(double)>;

  static constexpr std::size_t default_samples = 4096;

  ControlProtocol(Scheme scheme, double t_f, ControlFn control, FrameFn frame,
                  VirtualFn virtual_trap = {}, std::size_t n_samples = default_samples)
      : scheme_(scheme),
        t_f_(t_f),
        control_(std::move(control)),
        frame_(std::move(frame)),
        virtual_(std::move(virtual_trap)) {
    if (!(t_f > 0.0)) throw Error(ErrorKind::InvalidArgument, "protocol duration must be positive");
    if (!control_ || !frame_) throw Error(ErrorKind::InvalidArgument, "protocol needs evaluators");
    if (n_samples < 2) n_samples = 2;
    samples_.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double t = (i + 1 == n_samples) ? t_f : t_f * static_cast<double>(i) / (n_samples - 1);
      const ControlPoint c = control_(t);
      if (!std::isfinite(c.omega_sq) || !std::isfinite(c.q0) || !std::isfinite(c.g)) {
        throw Error(ErrorKind::NanDetected, "non-finite control value at t = " + std::to_string(t));
      }
      samples_.push_back({t, c});
    }
    endpoints_ = {samples_.front().control, samples_.back().control};
  }

  Scheme scheme() const { return scheme_; }
  double t_f() const { return t_f_; }

  ControlPoint at(double t) const { return control_(t); }
  FramePoint frame(double t) const { return frame_(t); }
  bool has_virtual() const { return static_cast<bool>(virtual_); }
  VirtualPoint virtual_at(double t) const {
    if (!virtual_) throw Error(ErrorKind::InvalidArgument, "protocol carries no virtual trap");
    return virtual_(t);
  }

  const std::vector<ControlSample>& samples() const { return samples_; }
  const Endpoints& endpoints() const { return endpoints_; }

  PerturbationKind perturbation() const { return perturbation_; }
  double perturbation_epsilon() const { return epsilon_; }

  const ControlFn& control_fn() const { return control_; }
  const FrameFn& frame_fn() const { return frame_; }
  const VirtualFn& virtual_fn() const { return virtual_; }

  ControlProtocol with_perturbation(PerturbationKind kind, double eps, ControlFn control) const {
    ControlProtocol p(scheme_, t_f_, std::move(control), frame_, {}, samples_.size());
    p.perturbation_ = kind;
    p.epsilon_ = eps;
    return p;
  }

 private:
  Scheme scheme_;
  double t_f_;
  ControlFn control_;
  FrameFn frame_;
  VirtualFn virtual_;
  std::vector<ControlSample> samples_;
  Endpoints endpoints_;
  PerturbationKind perturbation_ = PerturbationKind::None;
  double epsilon_ = 0.0;
};

/// Trap centre offset by eps * d strictly inside (0, t_f); d is the site spacing.
inline ControlProtocol perturb_position(const ControlProtocol& p, double eps, double site_spacing) {
  const double tf = p.t_f();
  auto inner = p.control_fn();
  const double shift = eps * site_spacing;
  return p.with_perturbation(PerturbationKind::Position, eps, [inner, tf, shift](double t) {
    ControlPoint c = inner(t);
    if (t > 0.0 && t < tf) c.q0 += shift;
    return c;
  });
}

/// Trap frequency scaled by (1 + eps) strictly inside (0, t_f).
inline ControlProtocol perturb_frequency(const ControlProtocol& p, double eps) {
  const double tf = p.t_f();
  auto inner = p.control_fn();
  const double scale = (1.0 + eps) * (1.0 + eps);
  return p.with_perturbation(PerturbationKind::Frequency, eps, [inner, tf, scale](double t) {
    ControlPoint c = inner(t);
    if (t > 0.0 && t < tf) c.omega_sq *= scale;
    return c;
  });
}

namespace detail {

inline double max_abs(const std::vector<ControlSample>& s, double ControlPoint::*field) {
  double m = 0.0;
  for (const auto& x : s) m = std::max(m, std::abs(x.control.*field));
  return m;
}

inline bool close(double a, double b, double scale) {
  return std::abs(a - b) <= 1e-9 * std::max(scale, 1e-300);
}

}  // namespace detail

/// Concatenate blocks in time. Adjacent blocks must agree on omega, q0 and g
/// at the junction to 1e-9 of the blocks' control scale.
inline ControlProtocol concat_protocols(const std::vector<ControlProtocol>& blocks) {
  if (blocks.empty()) throw Error(ErrorKind::InvalidArgument, "nothing to concatenate");
  std::vector<double> offsets;
  double total = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) {
      const auto& a = blocks[i - 1];
      const auto& b = blocks[i];
      const ControlPoint ea = a.endpoints().end;
      const ControlPoint sb = b.endpoints().start;
      double w_scale = 0.0;
      double q_scale = 0.0;
      double g_scale = 0.0;
      for (const ControlProtocol* p : {&a, &b}) {
        for (const auto& s : p->samples()) {
          w_scale = std::max(w_scale, std::sqrt(std::abs(s.control.omega_sq)));
        }
        q_scale = std::max(q_scale, detail::max_abs(p->samples(), &ControlPoint::q0));
        g_scale = std::max(g_scale, detail::max_abs(p->samples(), &ControlPoint::g));
      }
      const bool ok = detail::close(ea.omega(), sb.omega(), w_scale) &&
                      detail::close(ea.q0, sb.q0, q_scale) && detail::close(ea.g, sb.g, g_scale) &&
                      detail::close(a.frame(a.t_f()).position, b.frame(0.0).position, q_scale);
      if (!ok) {
        throw Error(ErrorKind::JunctionMismatch,
                    "blocks " + std::to_string(i - 1) + " (" + std::string(scheme_name(a.scheme())) +
                        ") and " + std::to_string(i) + " (" + std::string(scheme_name(b.scheme())) +
                        ") do not match at the junction");
      }
    }
    offsets.push_back(total);
    total += blocks[i].t_f();
  }

  // The lambdas own copies of the blocks so the composite stays valid on its own.
  auto holder = std::make_shared<std::pair<std::vector<ControlProtocol>, std::vector<double>>>(
      blocks, offsets);
  auto find = [holder](double t) -> std::pair<const ControlProtocol*, double> {
    const auto& bl = holder->first;
    const auto& off = holder->second;
    std::size_t i = 0;
    while (i + 1 < bl.size() && t >= off[i + 1]) ++i;
    double local = t - off[i];
    if (i + 1 == bl.size()) local = std::min(local, bl[i].t_f());
    return {&bl[i], std::max(local, 0.0)};
  };
  const double tf_total = total;
  auto control = [find, tf_total, holder](double t) {
    if (t >= tf_total) return holder->first.back().endpoints().end;
    auto [p, local] = find(t);
    return p->at(local);
  };
  auto frame = [find](double t) {
    auto [p, local] = find(t);
    return p->frame(local);
  };
  ControlProtocol::VirtualFn virt;
  bool all_virtual = std::all_of(blocks.begin(), blocks.end(),
                                 [](const ControlProtocol& p) { return p.has_virtual(); });
  if (all_virtual) {
    virt = [find](double t) {
      auto [p, local] = find(t);
      return p->virtual_at(local);
    };
  }
  return ControlProtocol(Scheme::Composite, tf_total, control, frame, virt);
}

}  // namespace latsta
