#ifndef DECOLAB_MASTER_HPP
#define DECOLAB_MASTER_HPP

// Deterministic master-equation engines: right-hand sides, a fixed-step RK4 integrator,
// decoherence-time formulas and off-diagonal decay fitting.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "decolab/core.hpp"
#include "decolab/errors.hpp"
#include "decolab/kernels.hpp"
#include "decolab/units.hpp"

namespace decolab {

/// H = sum_r H_r, one Hermitian part per cell (J).
class LocalHamiltonian {
 public:
  explicit LocalHamiltonian(std::vector<CMatrix> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw DimensionMismatch("local Hamiltonian needs at least one part");
    const Eigen::Index d = parts_.front().rows();
    double scale = 0.0;
    for (const auto& p : parts_) {
      if (p.rows() != d || p.cols() != d) throw DimensionMismatch("local Hamiltonian parts must share one square dimension");
      scale = std::max(scale, max_abs(p));
    }
    for (const auto& p : parts_)
      if (hermiticity_residual(p) > kHermitianTol * std::max(scale, std::numeric_limits<double>::min()))
        throw NotHermitian("local Hamiltonian part is not Hermitian");
    for (auto& p : parts_) p = hermitian_part(p);
  }

  Eigen::Index dim() const { return parts_.front().rows(); }
  std::size_t size() const { return parts_.size(); }
  const std::vector<CMatrix>& parts() const { return parts_; }
  const CMatrix& operator[](std::size_t r) const { return parts_[r]; }

  CMatrix total() const {
    CMatrix h = CMatrix::Zero(dim(), dim());
    for (const auto& p : parts_) h += p;
    return h;
  }

  /// True when every pair of parts commutes to within `rel_tol` of |H_r||H_s|.
  bool commuting(double rel_tol = 1e-12) const {
    for (std::size_t r = 0; r < parts_.size(); ++r)
      for (std::size_t s = r + 1; s < parts_.size(); ++s)
        if (max_abs(commutator(parts_[r], parts_[s])) > rel_tol * max_abs(parts_[r]) * max_abs(parts_[s]) * dim()) return false;
    return true;
  }

 private:
  std::vector<CMatrix> parts_;
};

struct GlobalDoubleCommutator {
  HamiltonianSpec h;
  double tau;
};
struct LocalDoubleCommutator {
  LocalHamiltonian parts;
  CorrelationKernel kernel;
};
struct MilburnExact {
  HamiltonianSpec h;
  double tau_planck;
};
struct MilburnFirstOrder {
  HamiltonianSpec h;
  double tau_planck;
};
struct AdlerEffective {
  HamiltonianSpec h_eff;
  double tau;
};
/// Pointer-basis dephasing: d/dt rho_nm = -i w_nm rho_nm - Gamma_nm rho_nm.
struct DiosiPenrosePointer {
  RMatrix rates;  // s^-1, symmetric, >= 0, zero diagonal
  HamiltonianSpec h_diag;
};

using EvolutionModel = std::variant<GlobalDoubleCommutator, LocalDoubleCommutator, MilburnExact, MilburnFirstOrder,
                                    AdlerEffective, DiosiPenrosePointer>;

inline std::string describe(const EvolutionModel& model) {
  struct V {
    std::string operator()(const GlobalDoubleCommutator& m) const { return fmt::format("GlobalDoubleCommutator(tau={:.4e} s)", m.tau); }
    std::string operator()(const LocalDoubleCommutator& m) const {
      return std::string("LocalDoubleCommutator(cells=") + std::to_string(m.parts.size()) + ",kernel=" + to_string(m.kernel.variant()) + ")";
    }
    std::string operator()(const MilburnExact& m) const { return fmt::format("MilburnExact(tau_planck={:.4e} s)", m.tau_planck); }
    std::string operator()(const MilburnFirstOrder& m) const { return fmt::format("MilburnFirstOrder(tau_planck={:.4e} s)", m.tau_planck); }
    std::string operator()(const AdlerEffective& m) const { return fmt::format("AdlerEffective(tau={:.4e} s)", m.tau); }
    std::string operator()(const DiosiPenrosePointer&) const { return "DiosiPenrosePointer"; }
  };
  return std::visit(V{}, model);
}

namespace detail {

inline void require_tau(double tau, const char* what) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError(std::string(what) + ": tau must be finite and >= 0");
}

inline void check_rates(const RMatrix& rates, Eigen::Index dim) {
  if (rates.rows() != dim || rates.cols() != dim) throw DimensionMismatch("pointer rates must be dim x dim");
  if (!rates.allFinite()) throw DomainError("pointer rates must be finite");
  const double scale = max_abs(rates);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (rates(i, i) != 0.0) throw DomainError("pointer rates must have zero diagonal");
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (rates(i, j) < 0.0) throw DomainError("pointer rate is negative");
      if (std::abs(rates(i, j) - rates(j, i)) > 1e-12 * scale) throw DomainError("pointer rates must be symmetric");
    }
  }
}

/// Diagonal of a pointer-basis Hamiltonian; a dense one must already be diagonal.
inline RVector pointer_energies(const HamiltonianSpec& h) {
  if (h.is_diagonal()) return h.spectrum().energies;
  const CMatrix m = h.matrix();
  const CMatrix off = m - CMatrix(m.diagonal().asDiagonal());
  if (max_abs(off) > kHermitianTol * std::max(max_abs(m), std::numeric_limits<double>::min()))
    throw DomainError("pointer-basis Hamiltonian must be diagonal");
  return m.diagonal().real();
}

using Rhs = std::function<CMatrix(const CMatrix&)>;

/// -i[h, rho] - tau/2 [h, [h, rho]] with h = H / hbar.
inline Rhs global_rhs(const HamiltonianSpec& h, double tau, double hbar) {
  if (h.is_diagonal()) {
    const RVector w = h.spectrum().energies / hbar;
    return [w, tau](const CMatrix& rho) {
      CMatrix r(rho.rows(), rho.cols());
      for (Eigen::Index n = 0; n < rho.cols(); ++n)
        for (Eigen::Index m = 0; m < rho.rows(); ++m) {
          const double om = w(m) - w(n);
          r(m, n) = cd(-0.5 * tau * om * om, -om) * rho(m, n);
        }
      return r;
    };
  }
  const CMatrix hs = h.matrix() / hbar;
  return [hs, tau](const CMatrix& rho) {
    const CMatrix c1 = commutator(hs, rho);
    const CMatrix c2 = commutator(hs, c1);
    return CMatrix(cd(0.0, -1.0) * c1 - (0.5 * tau) * c2);
  };
}

inline Rhs local_rhs(const LocalHamiltonian& parts, const CorrelationKernel& kernel, double hbar) {
  if (static_cast<std::size_t>(kernel.n_cells()) != parts.size())
    throw DimensionMismatch("rhs_local: kernel has " + std::to_string(kernel.n_cells()) + " cells but there are " +
                            std::to_string(parts.size()) + " Hamiltonian parts");
  const std::size_t n = parts.size();
  std::vector<CMatrix> hr(n), gr(n);
  for (std::size_t r = 0; r < n; ++r) hr[r] = parts[r] / hbar;
  for (std::size_t r = 0; r < n; ++r) {
    gr[r] = CMatrix::Zero(parts.dim(), parts.dim());
    for (std::size_t s = 0; s < n; ++s) gr[r] += kernel(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) * hr[s];
  }
  const CMatrix htot = parts.total() / hbar;
  return [hr, gr, htot](const CMatrix& rho) {
    CMatrix r = cd(0.0, -1.0) * commutator(htot, rho);
    for (std::size_t c = 0; c < hr.size(); ++c) r -= 0.5 * commutator(hr[c], commutator(gr[c], rho));
    return r;
  };
}

/// (1/tau) (U rho U^dag - rho); in the eigenbasis rho_mn -> (e^{-i w_mn tau} - 1)/tau rho_mn.
inline Rhs milburn_rhs(const HamiltonianSpec& h, double tau_pl, double hbar) {
  if (!(tau_pl > 0.0) || !std::isfinite(tau_pl)) throw DomainError("Milburn master equation requires tau_planck > 0");
  const Spectrum s = h.spectrum();
  const Eigen::Index d = s.dim();
  CMatrix factor(d, d);
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index m = 0; m < d; ++m) {
      const double x = (s.energies(m) - s.energies(n)) * tau_pl / hbar;
      const double half = std::sin(0.5 * x);
      factor(m, n) = cd(-2.0 * half * half, -std::sin(x)) / tau_pl;  // e^{-ix} - 1 without cancellation
    }
  return [s, factor](const CMatrix& rho) {
    CMatrix r = s.to_eigenbasis(rho);
    r.array() *= factor.array();
    return s.from_eigenbasis(r);
  };
}

inline Rhs pointer_rhs(const RMatrix& rates, const HamiltonianSpec& h, double hbar) {
  check_rates(rates, h.dim());
  const RVector e = pointer_energies(h);
  const Eigen::Index d = e.size();
  CMatrix factor(d, d);
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index m = 0; m < d; ++m) factor(m, n) = cd(-rates(m, n), -(e(m) - e(n)) / hbar);
  return [factor](const CMatrix& rho) { return CMatrix(factor.cwiseProduct(rho)); };
}

inline Rhs make_rhs(const EvolutionModel& model, const UnitsContext& units) {
  units.validate();
  struct V {
    double hbar;
    Rhs operator()(const GlobalDoubleCommutator& m) const { require_tau(m.tau, "GlobalDoubleCommutator"); return global_rhs(m.h, m.tau, hbar); }
    Rhs operator()(const LocalDoubleCommutator& m) const { return local_rhs(m.parts, m.kernel, hbar); }
    Rhs operator()(const MilburnExact& m) const { return milburn_rhs(m.h, m.tau_planck, hbar); }
    Rhs operator()(const MilburnFirstOrder& m) const {
      if (!(m.tau_planck > 0.0)) throw DomainError("MilburnFirstOrder requires tau_planck > 0");
      return global_rhs(m.h, m.tau_planck, hbar);
    }
    Rhs operator()(const AdlerEffective& m) const { require_tau(m.tau, "AdlerEffective"); return global_rhs(m.h_eff, m.tau, hbar); }
    Rhs operator()(const DiosiPenrosePointer& m) const { return pointer_rhs(m.rates, m.h_diag, hbar); }
  };
  return std::visit(V{units.hbar}, model);
}

inline Eigen::Index model_dim(const EvolutionModel& model) {
  struct V {
    Eigen::Index operator()(const GlobalDoubleCommutator& m) const { return m.h.dim(); }
    Eigen::Index operator()(const LocalDoubleCommutator& m) const { return m.parts.dim(); }
    Eigen::Index operator()(const MilburnExact& m) const { return m.h.dim(); }
    Eigen::Index operator()(const MilburnFirstOrder& m) const { return m.h.dim(); }
    Eigen::Index operator()(const AdlerEffective& m) const { return m.h_eff.dim(); }
    Eigen::Index operator()(const DiosiPenrosePointer& m) const { return m.h_diag.dim(); }
  };
  return std::visit(V{}, model);
}

}  // namespace detail

inline CMatrix rhs_global(const HamiltonianSpec& h, double tau, const DensityMatrix& rho, const UnitsContext& units = {}) {
  detail::require_tau(tau, "rhs_global");
  detail::require_same_dim(h.dim(), rho.dim(), "rhs_global");
  return detail::global_rhs(h, tau, units.hbar)(rho.matrix());
}

inline CMatrix rhs_local(const LocalHamiltonian& parts, const CorrelationKernel& kernel, const DensityMatrix& rho,
                         const UnitsContext& units = {}) {
  detail::require_same_dim(parts.dim(), rho.dim(), "rhs_local");
  return detail::local_rhs(parts, kernel, units.hbar)(rho.matrix());
}

inline CMatrix rhs_milburn_exact(const HamiltonianSpec& h, double tau_pl, const DensityMatrix& rho, const UnitsContext& units = {}) {
  detail::require_same_dim(h.dim(), rho.dim(), "rhs_milburn_exact");
  return detail::milburn_rhs(h, tau_pl, units.hbar)(rho.matrix());
}

inline CMatrix rhs_dp_pointer(const RMatrix& rates, const HamiltonianSpec& h_diag, const DensityMatrix& rho,
                              const UnitsContext& units = {}) {
  detail::require_same_dim(h_diag.dim(), rho.dim(), "rhs_dp_pointer");
  return detail::pointer_rhs(rates, h_diag, units.hbar)(rho.matrix());
}

inline CMatrix rhs(const EvolutionModel& model, const DensityMatrix& rho, const UnitsContext& units = {}) {
  detail::require_same_dim(detail::model_dim(model), rho.dim(), "rhs");
  return detail::make_rhs(model, units)(rho.matrix());
}

namespace detail {

struct RateScales {
  double spread = 0.0;  // J, spectral spread of the Hamiltonian
  double gamma = 0.0;   // s^-1, fastest dissipative rate (bound)
};

inline RateScales rate_scales(const EvolutionModel& model, double hbar) {
  struct V {
    double hbar;
    RateScales dc(const HamiltonianSpec& h, double tau) const {
      const double s = h.spread();
      return {s, 0.5 * tau * s * s / (hbar * hbar)};
    }
    RateScales operator()(const GlobalDoubleCommutator& m) const { return dc(m.h, m.tau); }
    RateScales operator()(const AdlerEffective& m) const { return dc(m.h_eff, m.tau); }
    RateScales operator()(const MilburnFirstOrder& m) const { return dc(m.h, m.tau_planck); }
    RateScales operator()(const MilburnExact& m) const {
      const double s = m.h.spread();
      const double x = s * m.tau_planck / hbar;
      return {s, x < std::numbers::pi ? (1.0 - std::cos(x)) / m.tau_planck : 2.0 / m.tau_planck};
    }
    RateScales operator()(const LocalDoubleCommutator& m) const {
      const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(m.parts.total(), Eigen::EigenvaluesOnly).eigenvalues();
      // |sum tau_rr' [H_r,[H_r',.]]| <= 4 sum |tau_rr'| |H_r| |H_r'|
      const std::size_t n = m.parts.size();
      std::vector<double> norms(n);
      for (std::size_t r = 0; r < n; ++r) norms[r] = m.parts[r].operatorNorm();
      double g = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t s = 0; s < n; ++s)
          g += std::abs(m.kernel(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s))) * norms[r] * norms[s];
      return {ev.maxCoeff() - ev.minCoeff(), 2.0 * g / (hbar * hbar)};
    }
    RateScales operator()(const DiosiPenrosePointer& m) const {
      return {m.h_diag.spread(), m.rates.size() ? m.rates.maxCoeff() : 0.0};
    }
  };
  return std::visit(V{hbar}, model);
}

}  // namespace detail

/// Largest step allowed for `model`: min(hbar / (10 |H|), t_D / 100), |H| the spectral spread
/// and t_D the inverse of the fastest dissipative rate.
inline double max_step(const EvolutionModel& model, const UnitsContext& units = {}) {
  const auto sc = detail::rate_scales(model, units.hbar);
  double h = std::numeric_limits<double>::infinity();
  if (sc.spread > 0.0) h = std::min(h, units.hbar / (10.0 * sc.spread));
  if (sc.gamma > 0.0) h = std::min(h, 1.0 / (100.0 * sc.gamma));
  return h;
}

inline constexpr double kDefaultGlobalErrorTarget = 1e-10;

/// Step count over [0, t_final] that respects `max_step` and keeps the RK4 global error estimate
/// t |lambda|^5 h^4 / 120 below `tol`, |lambda| = |H| / hbar + gamma the fastest eigenrate.
inline long long recommended_steps(const EvolutionModel& model, double t_final, const UnitsContext& units = {},
                                   double tol = kDefaultGlobalErrorTarget) {
  if (!(t_final > 0.0)) throw DomainError("recommended_steps: t_final must be > 0");
  if (!(tol > 0.0)) throw DomainError("recommended_steps: tol must be > 0");
  double h = max_step(model, units);
  if (!std::isfinite(h)) return 1;
  const auto sc = detail::rate_scales(model, units.hbar);
  const double lam = sc.spread / units.hbar + sc.gamma;
  h = std::min(h, std::pow(120.0 * tol / (t_final * std::pow(lam, 5)), 0.25));
  return std::max<long long>(1, static_cast<long long>(std::ceil(t_final / h)));
}

struct TraceCorrection {
  long long step;
  double drift;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::string model;
  std::vector<TraceCorrection> corrections;

  std::size_t size() const { return times.size(); }
};

struct IntegrateOptions {
  long long store_every = 1;  // store every k-th step (the final state is always stored)
  double positivity_tol = kIntegratedPositivityTol;
};

/// Classical fixed-step RK4. Hermiticity is restored every step; trace drift above 1e-12 is
/// renormalized and logged, drift above 1e-6 aborts. Positivity is checked, never forced.
inline Trajectory integrate(const EvolutionModel& model, const DensityMatrix& rho0, double t_final, long long n_steps,
                            const UnitsContext& units = {}, const IntegrateOptions& opt = {}) {
  if (n_steps < 1) throw DomainError("integrate: n_steps must be >= 1");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw DomainError("integrate: t_final must be finite and > 0");
  if (opt.store_every < 1) throw DomainError("integrate: store_every must be >= 1");
  detail::require_same_dim(detail::model_dim(model), rho0.dim(), "integrate");
  if (auto v = validate_state(rho0); !v.empty()) throw DomainError("integrate: invalid initial state: " + describe(v));

  const detail::Rhs f = detail::make_rhs(model, units);
  const double h = t_final / static_cast<double>(n_steps);
  const StateTolerances stored_tol{kHermitianTol, kTraceTol, opt.positivity_tol};

  Trajectory traj;
  traj.model = describe(model);
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);

  CMatrix rho = rho0.matrix();
  for (long long step = 1; step <= n_steps; ++step) {
    const CMatrix k1 = f(rho);
    const CMatrix k2 = f(rho + (0.5 * h) * k1);
    const CMatrix k3 = f(rho + (0.5 * h) * k2);
    const CMatrix k4 = f(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = hermitian_part(rho);

    if (!rho.allFinite()) throw IntegrationError("integrate: non-finite state at step " + std::to_string(step));
    const double tr = rho.trace().real();
    const double drift = std::abs(tr - 1.0);
    if (drift > 1e-6)
      throw IntegrationError("integrate: trace drift " + std::to_string(drift) + " at step " + std::to_string(step) +
                             " (step size " + std::to_string(h) + " s too large)");
    if (drift > kTraceTol) {
      rho /= tr;
      traj.corrections.push_back({step, drift});
    }

    if (step % opt.store_every == 0 || step == n_steps) {
      DensityMatrix s(rho);
      if (auto v = validate_state(s, stored_tol); !v.empty())
        throw IntegrationError("integrate: state at step " + std::to_string(step) + " is unphysical: " + describe(v));
      traj.times.push_back(h * static_cast<double>(step));
      traj.states.push_back(std::move(s));
    }
  }
  return traj;
}

enum class DecoherenceConvention {
  Tabulated,    // t_D = hbar^2 / (tau dE^2), the usual quoted form
  InverseRate,  // t_D = 2 hbar^2 / (tau dE^2), inverse of the double-commutator rate
};

inline double decoherence_time(double delta_e, double tau, DecoherenceConvention conv, const UnitsContext& units = {}) {
  if (!(delta_e > 0.0) || !std::isfinite(delta_e)) throw DomainError("decoherence_time: delta_e must be > 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("decoherence_time: tau must be > 0");
  const double base = units.hbar * units.hbar / (tau * delta_e * delta_e);
  return conv == DecoherenceConvention::Tabulated ? base : 2.0 * base;
}

struct DecayFit {
  double rate;        // s^-1, |rho_ij| ~ exp(-rate t)
  double phase_rate;  // rad s^-1, arg rho_ij ~ phase_rate t
  double residual;    // RMS of the log-magnitude fit
};

/// Least-squares line fits of log|rho_ij(t)| and of the unwrapped phase of rho_ij(t).
inline DecayFit fit_offdiag_decay(const Trajectory& traj, Eigen::Index i, Eigen::Index j) {
  if (i == j) throw DomainError("fit_offdiag_decay: need i != j");
  if (traj.size() < 2) throw DomainError("fit_offdiag_decay: need at least two samples");
  const Eigen::Index d = traj.states.front().dim();
  if (i < 0 || j < 0 || i >= d || j >= d) throw DimensionMismatch("fit_offdiag_decay: index out of range");
  if (std::abs(traj.states.front()(i, j)) <= 1e-10) throw DomainError("fit_offdiag_decay: off-diagonal element is zero");

  std::vector<double> t, logm, ph;
  double prev = std::arg(traj.states.front()(i, j));
  double unwrapped = prev;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const cd z = traj.states[k](i, j);
    const double mag = std::abs(z);
    if (!(mag > 0.0)) break;
    const double a = std::arg(z);
    if (k > 0) {
      double da = a - prev;
      da -= 2.0 * std::numbers::pi * std::round(da / (2.0 * std::numbers::pi));
      unwrapped += da;
    }
    prev = a;
    t.push_back(traj.times[k]);
    logm.push_back(std::log(mag));
    ph.push_back(unwrapped);
  }
  if (t.size() < 2) throw DomainError("fit_offdiag_decay: off-diagonal element vanishes immediately");

  // shift by the first sample so constant data gives an exactly zero slope
  const double l0 = logm.front(), p0 = ph.front();
  for (std::size_t k = 0; k < t.size(); ++k) {
    logm[k] -= l0;
    ph[k] -= p0;
  }
  const auto n = static_cast<double>(t.size());
  double tm = 0.0, lm = 0.0, pm = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    tm += t[k];
    lm += logm[k];
    pm += ph[k];
  }
  tm /= n;
  lm /= n;
  pm /= n;
  double stt = 0.0, stl = 0.0, stp = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double dt = t[k] - tm;
    stt += dt * dt;
    stl += dt * (logm[k] - lm);
    stp += dt * (ph[k] - pm);
  }
  const double slope_l = stl / stt;
  const double slope_p = stp / stt;
  double ss = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double e = logm[k] - (lm + slope_l * (t[k] - tm));
    ss += e * e;
  }
  return {-slope_l + 0.0, slope_p, std::sqrt(ss / n)};  // + 0.0 turns -0 into 0
}

}  // namespace decolab

#endif  // DECOLAB_MASTER_HPP
