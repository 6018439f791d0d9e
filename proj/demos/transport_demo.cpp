// Moves a condensate two lattice sites: load into the trap, shift twice,
// unload. Usage: transport_demo [n_sites] [g in hbar*Omega*sigma]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "latsta/latsta.hpp"

int main(int argc, char** argv) {
  using namespace latsta;
  TransportSpec spec;
  spec.n_sites = argc > 1 ? std::atoi(argv[1]) : 2;
  spec.g = argc > 2 ? std::atof(argv[2]) : 0.91;

  const ModelParams params = ModelParams::from_depth_ratio(547.7);
  try {
    const TransportResult r = full_transport(spec, params, Resolution::fast());
    for (const Record& s : r.stages) {
      std::printf("%-20s t_f = %.2fT  F = %.6f\n", std::string(scheme_name(s.scheme)).c_str(), s.t_f_over_T,
                  s.fidelity);
    }
    std::printf("%-20s t_f = %.2fT  F = %.6f\n", "end to end", r.total.t_f_over_T, r.total.fidelity);
    if (!r.total.ok()) std::printf("error: %s\n", r.total.error.c_str());
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
}
