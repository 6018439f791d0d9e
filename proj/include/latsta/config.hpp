#pragma once

// Run configuration: INI text with [model], [block], [sweep], [threshold],
// [transport], [solver], [output] and [run] sections. Physical inputs are in
// units of (hbar, m, sigma) with frequencies in Omega and times in T.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latsta/error.hpp"
#include "latsta/experiments.hpp"
#include "latsta/model.hpp"
#include "latsta/protocol.hpp"

namespace latsta {

struct RunConfig {
  double depth_ratio = 547.7;
  double hbar = 1.0;
  double mass = 1.0;
  double sigma = 1.0;

  BlockKind block = BlockKind::Load;
  double omega = 18.257;  // Omega
  double g = 0.0;         // hbar*Omega*sigma
  double t_f = 1.10;      // T
  int displacement = 1;
  int origin_site = 0;

  std::vector<Scheme> schemes;  // empty: every scheme of the block
  std::vector<double> t_f_grid;  // empty: the standard grid of the block
  std::vector<double> g_grid{0.0, 0.91};
  std::vector<double> omega_grid{18.257};
  std::vector<double> epsilon_grid = latsta::epsilon_grid();
  std::vector<PerturbationKind> perturbations{PerturbationKind::Position, PerturbationKind::Frequency};
  std::vector<double> export_t_f{0.55, 1.10, 2.19};

  ThresholdOptions threshold;
  TransportSpec transport;

  std::string resolution_name = "fast";
  Resolution resolution = Resolution::fast();
  bool convergence = true;

  std::string output_dir = "results";
  std::size_t samples = 201;
  unsigned threads = 1;

  ModelParams params() const {
    if (!(depth_ratio > 0.0)) throw Error(ErrorKind::InvalidArgument, "depth ratio must be positive");
    ModelParams p;
    p.hbar = hbar;
    p.mass = mass;
    p.sigma = sigma;
    p.U0 = 2.0 * depth_ratio * depth_ratio * hbar * hbar / (mass * sigma * sigma);
    p.validate();
    return p;
  }

  std::vector<Scheme> block_schemes() const {
    if (!schemes.empty()) return schemes;
    std::vector<Scheme> out;
    for (Scheme s : all_block_schemes) {
      if (block_of(s) == block) out.push_back(s);
    }
    return out;
  }

  std::vector<double> block_t_f_grid() const {
    if (!t_f_grid.empty()) return t_f_grid;
    return block == BlockKind::Shift ? shifting_tf_grid() : loading_tf_grid();
  }

  /// Block template with kind, displacement and origin set.
  BuildingBlockSpec block_template() const {
    BuildingBlockSpec b;
    b.kind = block;
    b.origin_site = origin_site;
    b.displacement = block == BlockKind::Shift ? displacement : 0;
    return b;
  }

  BuildingBlockSpec block_spec() const {
    const ModelParams p = params();
    return configure_block(block_template(), omega * p.Omega(), g * p.g_unit(), t_f * p.T());
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::Config, key + ": '" + s + "' is not a number");
}

inline long parse_integer(const std::string& key, const std::string& s) {
  const double v = parse_number(key, s);
  if (v != std::floor(v)) throw Error(ErrorKind::Config, key + ": '" + s + "' is not an integer");
  return static_cast<long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw Error(ErrorKind::Config, key + ": '" + s + "' is not a boolean");
}

/// Number list: "a, b, c", "log:lo:hi:n" or "lin:lo:hi:n".
inline std::vector<double> parse_grid(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  for (const char* kind : {"log:", "lin:"}) {
    if (t.rfind(kind, 0) == 0) {
      std::vector<std::string> parts;
      std::stringstream ss(t.substr(4));
      std::string item;
      while (std::getline(ss, item, ':')) parts.push_back(trim(item));
      if (parts.size() != 3) throw Error(ErrorKind::Config, key + ": expected " + kind + "lo:hi:n");
      const double lo = parse_number(key, parts[0]);
      const double hi = parse_number(key, parts[1]);
      const long n = parse_integer(key, parts[2]);
      if (n < 2) throw Error(ErrorKind::Config, key + ": need at least two points");
      try {
        return kind[1] == 'o' ? log_grid(lo, hi, static_cast<std::size_t>(n))
                              : linear_grid(lo, hi, static_cast<std::size_t>(n));
      } catch (const Error& e) {
        throw Error(ErrorKind::Config, key + ": " + e.what());
      }
    }
  }
  std::vector<double> out;
  for (const auto& item : split_list(t)) out.push_back(parse_number(key, item));
  if (out.empty()) throw Error(ErrorKind::Config, key + ": empty list");
  return out;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
  return s;
}

}  // namespace detail

/// Applies one key; throws a config error for unknown keys or bad values.
inline void apply_config_key(RunConfig& c, const std::string& section, const std::string& key,
                             const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  const std::string id = section + "." + key;
  auto num = [&] { return parse_number(id, v); };
  auto integer = [&] { return parse_integer(id, v); };

  if (section == "model") {
    if (key == "depth_ratio") return void(c.depth_ratio = num());
    if (key == "hbar") return void(c.hbar = num());
    if (key == "mass") return void(c.mass = num());
    if (key == "sigma") return void(c.sigma = num());
  } else if (section == "block") {
    if (key == "kind") {
      const auto b = parse_block(v);
      if (!b) throw Error(ErrorKind::Config, id + ": unknown block '" + v + "'");
      return void(c.block = *b);
    }
    if (key == "omega") return void(c.omega = num());
    if (key == "g") return void(c.g = num());
    if (key == "t_f") return void(c.t_f = num());
    if (key == "displacement") return void(c.displacement = static_cast<int>(integer()));
    if (key == "origin_site") return void(c.origin_site = static_cast<int>(integer()));
  } else if (section == "sweep") {
    if (key == "schemes") {
      c.schemes.clear();
      for (const auto& name : split_list(v)) {
        const auto s = parse_scheme(name);
        if (!s || *s == Scheme::Composite) throw Error(ErrorKind::Config, id + ": unknown scheme '" + name + "'");
        c.schemes.push_back(*s);
      }
      return;
    }
    if (key == "t_f") return void(c.t_f_grid = parse_grid(id, v));
    if (key == "g") return void(c.g_grid = parse_grid(id, v));
    if (key == "omega_0") return void(c.omega_grid = parse_grid(id, v));
    if (key == "epsilon") return void(c.epsilon_grid = parse_grid(id, v));
    if (key == "export_t_f") return void(c.export_t_f = parse_grid(id, v));
    if (key == "perturbations") {
      c.perturbations.clear();
      for (const auto& name : split_list(v)) {
        if (name == "position") c.perturbations.push_back(PerturbationKind::Position);
        else if (name == "frequency") c.perturbations.push_back(PerturbationKind::Frequency);
        else throw Error(ErrorKind::Config, id + ": unknown perturbation '" + name + "'");
      }
      return;
    }
  } else if (section == "threshold") {
    if (key == "start") return void(c.threshold.start_over_T = num());
    if (key == "cap") return void(c.threshold.cap_over_T = num());
    if (key == "ratio") return void(c.threshold.ratio = num());
    if (key == "resolution") return void(c.threshold.resolution_over_T = num());
    if (key == "level") return void(c.threshold.level = num());
    if (key == "tail_factor") return void(c.threshold.tail_factor = num());
  } else if (section == "transport") {
    if (key == "n_sites") return void(c.transport.n_sites = static_cast<int>(integer()));
    if (key == "t_f_load") return void(c.transport.load_t_f_over_T = num());
    if (key == "t_f_shift") return void(c.transport.shift_t_f_over_T = num());
    if (key == "t_f_unload") return void(c.transport.unload_t_f_over_T = num());
  } else if (section == "solver") {
    if (key == "resolution") {
      const auto r = parse_resolution(v);
      if (!r) throw Error(ErrorKind::Config, id + ": expected 'fast' or 'paper'");
      c.resolution_name = v;
      c.resolution = *r;
      return;
    }
    if (key == "n_points") return void(c.resolution.n_points = static_cast<std::size_t>(integer()));
    if (key == "periods") return void(c.resolution.periods = static_cast<int>(integer()));
    if (key == "dt") return void(c.resolution.dt_over_T = num());
    if (key == "convergence") return void(c.convergence = parse_bool(id, v));
  } else if (section == "output") {
    if (key == "dir") return void(c.output_dir = v);
    if (key == "samples") return void(c.samples = static_cast<std::size_t>(integer()));
  } else if (section == "run") {
    if (key == "threads") return void(c.threads = static_cast<unsigned>(integer()));
  }
  throw Error(ErrorKind::Config, "unknown key '" + id + "'");
}

inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  try {
    c.params();
  } catch (const Error& e) {
    fail(std::string("model: ") + e.what());
  }
  if (!(c.omega > 0.0)) fail("block.omega must be positive");
  if (c.g < 0.0) fail("block.g must be non-negative");
  if (!(c.t_f > 0.0)) fail("block.t_f must be positive");
  if (c.block == BlockKind::Shift && c.displacement == 0) fail("block.displacement must be non-zero");
  for (Scheme s : c.schemes) {
    if (block_of(s) != c.block) fail("sweep.schemes: '" + std::string(scheme_name(s)) + "' is not a " +
                                     std::string(block_name(c.block)) + " scheme");
  }
  if (!(c.threshold.ratio > 1.0)) fail("threshold.ratio must exceed 1");
  if (!(c.threshold.start_over_T > 0.0) || !(c.threshold.cap_over_T > c.threshold.start_over_T)) {
    fail("threshold window must satisfy 0 < start < cap");
  }
  if (!(c.threshold.resolution_over_T > 0.0)) fail("threshold.resolution must be positive");
  if (c.transport.n_sites < 0) fail("transport.n_sites must be non-negative");
  if (c.samples < 2) fail("output.samples must be at least 2");
  if (c.threads < 1) fail("run.threads must be at least 1");
  if (!(c.resolution.dt_over_T > 0.0)) fail("solver.dt must be positive");
  if (c.resolution.periods < 1) fail("solver.periods must be positive");
  const std::size_t n = c.resolution.n_points;
  if (n < 1024 || (n & (n - 1)) != 0) fail("solver.n_points must be a power of two >= 1024");
  if (c.perturbations.empty()) fail("sweep.perturbations is empty");
}

inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  RunConfig c;
  // Resolution presets apply first so explicit solver keys can override them.
  if (auto solver = tree.get_child_optional("solver")) {
    if (auto r = solver->get_optional<std::string>("resolution")) apply_config_key(c, "solver", "resolution", *r);
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error(ErrorKind::Config, "key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      if (section == "solver" && key == "resolution") continue;
      apply_config_key(c, section, key, value.data());
    }
  }
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  return parse_config(in);
}

/// Canonical text of every input that affects results. Output location and
/// thread count are excluded: they do not change any number.
inline std::string canonical_config(const RunConfig& c) {
  using detail::format_list;
  using detail::format_number;
  std::ostringstream os;
  os << "[model]\ndepth_ratio = " << format_number(c.depth_ratio) << "\nhbar = " << format_number(c.hbar)
     << "\nmass = " << format_number(c.mass) << "\nsigma = " << format_number(c.sigma) << "\n\n";
  os << "[block]\nkind = " << block_name(c.block) << "\nomega = " << format_number(c.omega)
     << "\ng = " << format_number(c.g) << "\nt_f = " << format_number(c.t_f)
     << "\ndisplacement = " << c.displacement << "\norigin_site = " << c.origin_site << "\n\n";
  os << "[sweep]\nschemes = ";
  const auto sch = c.block_schemes();
  for (std::size_t i = 0; i < sch.size(); ++i) os << (i ? ", " : "") << scheme_name(sch[i]);
  os << "\nt_f = " << format_list(c.block_t_f_grid()) << "\ng = " << format_list(c.g_grid)
     << "\nomega_0 = " << format_list(c.omega_grid) << "\nepsilon = " << format_list(c.epsilon_grid)
     << "\nperturbations = ";
  for (std::size_t i = 0; i < c.perturbations.size(); ++i) {
    os << (i ? ", " : "") << perturbation_name(c.perturbations[i]);
  }
  os << "\nexport_t_f = " << format_list(c.export_t_f) << "\n\n";
  const auto& t = c.threshold;
  os << "[threshold]\nstart = " << format_number(t.start_over_T) << "\ncap = " << format_number(t.cap_over_T)
     << "\nratio = " << format_number(t.ratio) << "\nresolution = " << format_number(t.resolution_over_T)
     << "\nlevel = " << format_number(t.level) << "\ntail_factor = " << format_number(t.tail_factor) << "\n\n";
  const auto& tr = c.transport;
  os << "[transport]\nn_sites = " << tr.n_sites << "\nt_f_load = " << format_number(tr.load_t_f_over_T)
     << "\nt_f_shift = " << format_number(tr.shift_t_f_over_T)
     << "\nt_f_unload = " << format_number(tr.unload_t_f_over_T) << "\n\n";
  os << "[solver]\nn_points = " << c.resolution.n_points << "\nperiods = " << c.resolution.periods
     << "\ndt = " << format_number(c.resolution.dt_over_T) << "\nconvergence = " << (c.convergence ? "true" : "false")
     << "\n\n";
  os << "[output]\nsamples = " << c.samples << "\n";
  return os.str();
}

/// 64-bit FNV-1a of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_config(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace latsta
