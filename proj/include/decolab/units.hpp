#ifndef DECOLAB_UNITS_HPP
#define DECOLAB_UNITS_HPP

#include <cmath>
#include <string>

#include "decolab/errors.hpp"

namespace decolab {

/// Physical constants in SI. All engine quantities are SI internally.
struct UnitsContext {
  double hbar = 1.0546e-34;        // J s
  double G = 6.674e-11;            // m^3 kg^-1 s^-2
  double c = 2.998e8;              // m s^-1
  double tau_planck = 5.391e-44;   // s
  double ev = 1.602e-19;           // J per eV

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string("UnitsContext.") + name + " must be finite and > 0");
    };
    positive(hbar, "hbar");
    positive(G, "G");
    positive(c, "c");
    positive(tau_planck, "tau_planck");
    positive(ev, "ev");
  }

  double from_ev(double e_ev) const { return e_ev * ev; }
  double to_ev(double e_joule) const { return e_joule / ev; }
};

// Interface-layer conversions.
inline constexpr double kGramPerCubicCentimetre = 1000.0;  // kg m^-3
inline constexpr double kCentimetre = 1e-2;                // m

}  // namespace decolab

#endif  // DECOLAB_UNITS_HPP
