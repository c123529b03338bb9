// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <cstdio>

#include "decolab/checks.hpp"

int main() {
  bool all = true;
  for (int id = 1; id <= 8; ++id) {
    decolab::checks::CheckResult r;
    switch (id) {
      case 1: r = decolab::checks::check_decoherence_table(); break;
      case 2: r = decolab::checks::check_analytic_decay(); break;
      case 3: r = decolab::checks::check_milburn_expansion(); break;
      case 4: r = decolab::checks::check_stochastic_equivalence(); break;
      case 5: r = decolab::checks::check_diosi_penrose(); break;
      case 6: r = decolab::checks::check_critical_radius(); break;
      case 7: r = decolab::checks::check_trace_conservation(); break;
      default: r = decolab::checks::check_structural(); break;
    }
    std::printf("%s\n", decolab::checks::format_line(r).c_str());
    std::fflush(stdout);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
