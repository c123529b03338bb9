#ifndef DECOLAB_CHECKS_HPP
#define DECOLAB_CHECKS_HPP

// Built-in acceptance suite, shared by the acceptance binary and `decolab check`.
// Each check returns a worst-case residual and the tolerance it is held to.

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "decolab/gravity.hpp"
#include "decolab/master.hpp"
#include "decolab/stochastic.hpp"
#include "decolab/tracedyn.hpp"

namespace decolab::checks {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double residual = 0.0;   // worst observed deviation, in the check's own measure
  double tolerance = 0.0;  // pass iff residual <= tolerance (and any sub-conditions hold)
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

using Rng = std::mt19937_64;

inline CMatrix random_hermitian(Rng& rng, Eigen::Index d, double scale) {
  std::normal_distribution<double> n;
  CMatrix m(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = scale * cd(n(rng), n(rng));
  return hermitian_part(m);
}

inline DensityMatrix random_density(Rng& rng, Eigen::Index d) {
  const CMatrix a = random_hermitian(rng, d, 1.0) + cd(0.0, 1.0) * random_hermitian(rng, d, 1.0);
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(hermitian_part(rho));
}

inline DensityMatrix random_pure(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  CVector psi(d);
  for (Eigen::Index i = 0; i < d; ++i) psi(i) = cd(n(rng), n(rng));
  psi.normalize();
  return DensityMatrix::pure(psi);
}

inline DensityMatrix balanced_qubit() { return DensityMatrix(CMatrix::Constant(2, 2, cd(0.5))); }

inline std::vector<double> linspace(double t_final, int n) {
  std::vector<double> t;
  for (int k = 1; k <= n; ++k) t.push_back(t_final * k / n);
  return t;
}

inline long long steps_on_grid(const EvolutionModel& m, double tf, int n_out, const UnitsContext& u) {
  const long long n = recommended_steps(m, tf, u);
  return (n + n_out - 1) / n_out * n_out;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline CheckResult timed(int id, std::string name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.residual = std::numeric_limits<double>::infinity();
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Round to two significant figures.
inline double round_sig2(double x) {
  const double p = std::pow(10.0, std::floor(std::log10(std::abs(x))) - 1.0);
  return std::round(x / p) * p;
}

}  // namespace detail

/// 1. Decoherence times for 1 eV, 1 GeV and 1 J at tau = Planck time.
inline CheckResult check_decoherence_table(const UnitsContext& u = {}) {
  return detail::timed(1, "decoherence-time table", [&](CheckResult& r) {
    const double de[3] = {u.from_ev(1.0), u.from_ev(1e9), 1.0};
    const double quoted[3] = {8.0e12, 8.0e-6, 2.1e-25};
    const int orders[3] = {13, -5, -25};
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      const double t = decoherence_time(de[k], u.tau_planck, DecoherenceConvention::Tabulated, u);
      const double arithmetic = (u.hbar / de[k]) * (u.hbar / de[k]) / u.tau_planck;
      r.residual = std::max(r.residual, detail::rel(t, arithmetic));
      const bool printed = detail::rel(detail::round_sig2(t), quoted[k]) < 1e-9;
      const bool order = std::lround(std::log10(t)) == orders[k];
      ok = ok && printed && order;
      r.detail += fmt::format("{}t_D({:.4g} J) = {:.4e} s{}", k ? "; " : "", de[k], t, printed && order ? "" : " (mismatch)");
    }
    r.tolerance = 0.01;
    r.pass = ok && r.residual <= r.tolerance;
  });
}

/// 2. Two-level double-commutator coherence against exp(-tau dE^2 t / 2 hbar^2), 5 decay times.
inline CheckResult check_analytic_decay(const UnitsContext& u = {}) {
  return detail::timed(2, "analytic decay law", [&](CheckResult& r) {
    const double de = u.from_ev(1e-2);
    const double tau = 0.2 * u.hbar / de;
    const double gamma = tau * de * de / (2.0 * u.hbar * u.hbar);
    const double tf = 5.0 / gamma;
    const EvolutionModel m = GlobalDoubleCommutator{HamiltonianSpec::diagonal({0.0, de}), tau};
    const auto traj = integrate(m, detail::balanced_qubit(), tf, recommended_steps(m, tf, u), u);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double exact = 0.5 * std::exp(-gamma * traj.times[k]);
      r.residual = std::max(r.residual, detail::rel(std::abs(traj.states[k](0, 1)), exact));
    }
    r.tolerance = 1e-6;
    r.pass = r.residual <= r.tolerance;
    r.detail = fmt::format("{} samples to t = {:.3e} s", traj.size(), tf);
  });
}

/// Relative deviation of Milburn's exact rhs from its first-order expansion at x = dE tau / hbar.
inline double milburn_deviation(double x, const UnitsContext& u = {}) {
  const double de = u.from_ev(1.0);
  const double tau = x * u.hbar / de;
  const auto h = HamiltonianSpec::diagonal({0.0, de});
  const auto rho = detail::balanced_qubit();
  const CMatrix a = rhs_milburn_exact(h, tau, rho, u);
  const CMatrix b = rhs_global(h, tau, rho, u);
  return max_abs(CMatrix(a - b)) / max_abs(b);
}

/// 3. Exact versus expanded Milburn equation: quadratic deviation, <= 1e-6 at x = 1e-3.
inline CheckResult check_milburn_expansion(const UnitsContext& u = {}) {
  return detail::timed(3, "Milburn exact vs first order", [&](CheckResult& r) {
    const double d2 = milburn_deviation(1e-2, u), d3 = milburn_deviation(1e-3, u), d4 = milburn_deviation(1e-4, u);
    const double q1 = d2 / d3, q2 = d3 / d4;
    r.residual = std::max(std::abs(q1 - 100.0), std::abs(q2 - 100.0));
    r.tolerance = 10.0;
    r.pass = r.residual <= r.tolerance && d3 <= 1e-6;
    r.detail = fmt::format("deviation {:.3e} / {:.3e} / {:.3e}; ratios {:.2f}, {:.2f}", d2, d3, d4, q1, q2);
  });
}

/// 4. Each noise model's ensemble (1e4 realizations) against its master equation.
inline CheckResult check_stochastic_equivalence(const UnitsContext& u = {}, long long n_traj = 10000, std::uint64_t seed = 2024) {
  return detail::timed(4, "stochastic vs master equivalence", [&](CheckResult& r) {
    detail::Rng rng(seed);
    const double de = u.from_ev(1e-2);
    const double t0 = u.hbar / de;
    std::vector<std::pair<std::string, double>> zs;

    {  // Gaussian global time vs the double commutator
      const auto h = HamiltonianSpec::dense(detail::random_hermitian(rng, 3, de));
      const auto rho0 = detail::random_pure(rng, 3);
      const double tau = 0.1 * t0, tf = 8 * t0;
      const EvolutionModel me = GlobalDoubleCommutator{h, tau};
      const auto traj = integrate(me, rho0, tf, detail::steps_on_grid(me, tf, 8, u), u);
      const auto ens = ensemble_average(GaussianGlobalTime{tau}, rho0, h, detail::linspace(tf, 8), n_traj, stream_seed(seed, 1), u);
      zs.emplace_back("gaussian-global", compare_to_master(ens, traj).max_z);
    }
    {  // Poisson discrete time vs Milburn's exact equation
      const auto h = HamiltonianSpec::diagonal({0.0, de});
      const double tpl = 0.5 * t0, tf = 20 * tpl;
      const EvolutionModel me = MilburnExact{h, tpl};
      const auto traj = integrate(me, detail::balanced_qubit(), tf, detail::steps_on_grid(me, tf, 20, u), u);
      const auto ens = ensemble_average(PoissonDiscreteTime{tpl}, detail::balanced_qubit(), h, detail::linspace(tf, 20), n_traj,
                                        stream_seed(seed, 2), u);
      zs.emplace_back("poisson", compare_to_master(ens, traj).max_z);
    }
    {  // fluctuating Planck constant vs the effective equation, one fixed horizon per ensemble
      const auto h = HamiltonianSpec::dense(detail::random_hermitian(rng, 3, de));
      const auto rho0 = detail::random_pure(rng, 3);
      const double tau = 0.05 * t0, tf = 10 * t0;
      const EvolutionModel me = AdlerEffective{h, tau};
      const auto traj = integrate(me, rho0, tf, detail::steps_on_grid(me, tf, 10, u), u);
      double worst = 0.0;
      for (double frac : {0.5, 1.0}) {
        const auto ens = ensemble_average(FluctuatingPlanck{tau}, rho0, h, {frac * tf}, n_traj, stream_seed(seed, 3), u);
        worst = std::max(worst, compare_to_master(ens, traj).max_z);
      }
      zs.emplace_back("fluctuating-planck", worst);
    }
    {  // local time field: commuting parts, then non-commuting at short horizon
      CMatrix h1 = CMatrix::Zero(3, 3), h2 = CMatrix::Zero(3, 3);
      h1(1, 1) = de;
      h1(2, 2) = 2 * de;
      h2(1, 1) = -0.5 * de;
      h2(2, 2) = 1.5 * de;
      const LocalHamiltonian lh({h1, h2});
      const auto rho0 = detail::random_pure(rng, 3);
      const double tau = 0.1 * t0;
      RMatrix k(2, 2);
      k << tau, 0.4 * tau, 0.4 * tau, 0.5 * tau;
      const CorrelationKernel kernel(k, KernelVariant::Custom);
      const double tf = 6 * t0;
      const EvolutionModel me = LocalDoubleCommutator{lh, kernel};
      const auto traj = integrate(me, rho0, tf, detail::steps_on_grid(me, tf, 6, u), u);
      const auto ens = ensemble_average(GaussianLocalTimeField{kernel, lh}, rho0, HamiltonianSpec::dense(lh.total()),
                                        detail::linspace(tf, 6), n_traj, stream_seed(seed, 4), u);
      zs.emplace_back("local-commuting", compare_to_master(ens, traj).max_z);

      const LocalHamiltonian nc({detail::random_hermitian(rng, 3, de), detail::random_hermitian(rng, 3, de)});
      double hmax = 0.0;
      for (const auto& p : nc.parts()) hmax = std::max(hmax, p.operatorNorm());
      const double ts = 0.1 * u.hbar / hmax;
      RMatrix k2(2, 2);
      k2 << ts, 0.3 * ts, 0.3 * ts, 0.8 * ts;
      const CorrelationKernel kernel2(k2, KernelVariant::Custom);
      const auto rho1 = detail::random_pure(rng, 3);
      const auto traj2 = integrate(LocalDoubleCommutator{nc, kernel2}, rho1, ts, 1000, u);
      const auto ens2 = ensemble_average(GaussianLocalTimeField{kernel2, nc}, rho1, HamiltonianSpec::dense(nc.total()), {0.5 * ts, ts},
                                         n_traj, stream_seed(seed, 5), u);
      zs.emplace_back("local-noncommuting", compare_to_master(ens2, traj2).max_z);
    }
    for (const auto& [name, z] : zs) {
      r.residual = std::max(r.residual, z);
      r.detail += fmt::format("{}{} z={:.2f}", r.detail.empty() ? "" : "; ", name, z);
    }
    r.tolerance = 5.0;
    r.pass = r.residual <= r.tolerance;
  });
}

/// 5. Pointer-model decay rate equals e_grav / hbar on several lump geometries; e_grav of
/// well-separated balls against the continuum oracle and (6/5) G M^2 / R.
inline CheckResult check_diosi_penrose(const UnitsContext& u = {}) {
  return detail::timed(5, "Diosi-Penrose rate equivalence", [&](CheckResult& r) {
    const double a = 1e-7, rho = 1000.0;
    double worst_rate = 0.0;
    int geometries = 0;
    {
      const double rad = 5 * a;
      const double m = 4.0 / 3.0 * std::numbers::pi * rad * rad * rad * rho;
      const auto g = CellGrid::cubic(Vec3::Zero(), a, {30, 16, 16}, 1u << 16);
      const Vec3 c(8 * a, 8 * a, 8 * a);
      // overlapping (shift < 2R) and separated (shift > 2R) pairs, plus one diagonal offset
      for (const Vec3& shift : {Vec3(1 * a, 0, 0), Vec3(3 * a, 0, 0), Vec3(6 * a, 0, 0), Vec3(10 * a, 0, 0), Vec3(14 * a, 0, 0)}) {
        const auto rc = dp_rate_check(LumpPair(uniform_ball(m, rad, g, a, c), uniform_ball(m, rad, g, a, c + shift)), u);
        worst_rate = std::max(worst_rate, detail::rel(rc.rate_from_me, rc.rate_from_egrav));
        ++geometries;
      }
      const auto g2 = CellGrid::cubic(Vec3::Zero(), a, {20, 20, 20}, 1u << 16);
      const auto rc = dp_rate_check(LumpPair(uniform_ball(m, rad, g2, a, Vec3(8 * a, 8 * a, 8 * a)),
                                             uniform_ball(m, rad, g2, a, Vec3(12 * a, 12 * a, 11 * a))),
                                    u);
      worst_rate = std::max(worst_rate, detail::rel(rc.rate_from_me, rc.rate_from_egrav));
      ++geometries;
    }
    double sep8 = 0.0, sep16 = 0.0;
    {  // R/a = 8, d = 6R: grid against the continuum quadrature of the smeared balls
      const double rad = 8 * a, d = 48 * a;
      const double m = 4.0 / 3.0 * std::numbers::pi * rad * rad * rad * rho;
      const auto g = CellGrid::cubic(Vec3::Zero(), a, {70, 22, 22}, 1u << 20);
      const auto res = egrav(LumpPair(uniform_ball(m, rad, g, a, Vec3(11 * a, 11 * a, 11 * a)),
                                      uniform_ball(m, rad, g, a, Vec3(59 * a, 11 * a, 11 * a))),
                             u);
      sep8 = detail::rel(res.e_grav, egrav_displaced_balls(m, rad, d, a, u));
    }
    {  // R/a = 16, d = 4R: e_grav + G M^2 / d approaches (6/5) G M^2 / R
      const double rad = 16 * a, d = 64 * a;
      const double m = 4.0 / 3.0 * std::numbers::pi * rad * rad * rad * rho;
      const auto g = CellGrid::cubic(Vec3::Zero(), a, {102, 38, 38}, 1u << 20);
      const auto res = egrav(LumpPair(uniform_ball(m, rad, g, a, Vec3(19 * a, 19 * a, 19 * a)),
                                      uniform_ball(m, rad, g, a, Vec3(83 * a, 19 * a, 19 * a))),
                             u);
      sep16 = detail::rel(res.e_grav + u.G * m * m / d, 1.2 * u.G * m * m / rad);
    }
    r.residual = worst_rate;
    r.tolerance = 1e-6;
    r.pass = geometries >= 5 && worst_rate <= 1e-6 && sep8 <= 0.02 && sep16 <= 0.02;
    r.detail = fmt::format("{} geometries, worst rate deviation {:.2e}; well separated R/a=8 vs oracle {:.2e}, R/a=16 vs 6/5 {:.2e} (tol 0.02)",
                           geometries, worst_rate, sep8, sep16);
  });
}

/// 6. Critical radius of a 1 g/cm^3 ball with sigma = R/10.
inline CheckResult check_critical_radius(const UnitsContext& u = {}) {
  return detail::timed(6, "critical radius", [&](CheckResult& r) {
    const auto res = critical_radius(kGramPerCubicCentimetre, u, {.sigma_ratio = 0.1, .sigma_floor = 0.0});
    r.tolerance = 2.0;  // decades
    if (!res.r_crit) {
      r.residual = std::numeric_limits<double>::infinity();
      r.detail = fmt::format("{} crossings in the sweep", res.crossings);
      return;
    }
    r.residual = std::abs(std::log10(*res.r_crit / 1e-7));
    r.pass = res.crossings == 1 && r.residual <= r.tolerance;
    r.detail = fmt::format("r_crit = {:.3e} m, {} crossing(s), {} rows", *res.r_crit, res.crossings, res.table.size());
  });
}

/// 7. Trace dynamics: conservation of C over 1e6 steps, bounded energy, unitary invariance,
/// and drift of the matrix-coefficient control.
inline CheckResult check_trace_conservation(std::size_t n_steps = 1000000, int n_seeds = 5) {
  return detail::timed(7, "trace-dynamics conservation", [&](CheckResult& r) {
    const TraceModelSpec spec{4, 4, 1.0, 0.1, 0.3};
    const double dt = 1e-3;
    double c_ratio = 0.0, e_drift = 0.0, inv = 0.0;
    for (int s = 1; s <= n_seeds; ++s) {
      const auto s0 = random_trace_state(spec, static_cast<std::uint64_t>(s), 0.5);
      const auto rep = conservation_run(spec, s0, dt, n_steps, 10000);
      c_ratio = std::max(c_ratio, rep.max_c_drift / (1e-8 * (1.0 + rep.c0_max)));
      e_drift = std::max(e_drift, rep.max_energy_drift);
      detail::Rng rng(static_cast<std::uint64_t>(100 + s));
      const CMatrix g = detail::random_hermitian(rng, spec.n, 1.0);
      inv = std::max(inv, unitary_invariance_residual(spec, s0, g, 0.3) / std::abs(hamiltonian(spec, s0)) / 1e-12);
    }
    TraceModelSpec control = spec;
    CMatrix a = CMatrix::Zero(4, 4);
    a.diagonal() << 1.0, -1.0, 0.5, 0.0;
    control.matrix_coefficient = a;
    control.mu = 0.2;
    const auto neg = conservation_run(control, random_trace_state(control, 1, 0.5), dt, n_steps, 10000);
    // residual: worst of the three bounds as a fraction of its tolerance
    r.residual = std::max({c_ratio, e_drift / 1e-6, inv});
    r.tolerance = 1.0;
    r.pass = r.residual <= 1.0 && neg.max_c_drift > 1e-4;
    r.detail = fmt::format("{} seeds x {} steps: C drift {:.2e} of bound, energy drift {:.2e}, invariance {:.2e} of bound; control C drift {:.3e}",
                           n_seeds, n_steps, c_ratio, e_drift, inv, neg.max_c_drift);
  });
}

namespace detail {

inline EvolutionModel random_model(Rng& rng, int variant, Eigen::Index d, const UnitsContext& u) {
  std::uniform_real_distribution<double> un(0.1, 2.0);
  const double e = u.from_ev(0.05);
  const double tau = un(rng) * u.hbar / e;
  auto energies = [&] {
    std::uniform_real_distribution<double> s(-1.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = e * s(rng);
    return v;
  };
  auto ham = [&] { return rng() % 2 ? HamiltonianSpec::dense(random_hermitian(rng, d, e)) : HamiltonianSpec::diagonal(energies()); };
  switch (variant) {
    case 0: return GlobalDoubleCommutator{ham(), tau};
    case 1: {
      const int n = 1 + static_cast<int>(rng() % 4);
      std::vector<CMatrix> parts;
      for (int k = 0; k < n; ++k) parts.push_back(random_hermitian(rng, d, e));
      RMatrix b = random_hermitian(rng, n, 1.0).real();
      RMatrix k = tau * b * b.transpose() / n;
      k = 0.5 * (k + k.transpose()).eval();
      return LocalDoubleCommutator{LocalHamiltonian(parts), CorrelationKernel(k, KernelVariant::Custom)};
    }
    case 2: return MilburnExact{ham(), tau};
    case 3: return MilburnFirstOrder{ham(), tau};
    case 4: return AdlerEffective{ham(), tau};
    default: {
      RMatrix rates = RMatrix::Zero(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) rates(i, j) = rates(j, i) = un(rng) * e / u.hbar;
      return DiosiPenrosePointer{rates, HamiltonianSpec::diagonal(energies())};
    }
  }
}

}  // namespace detail

/// 8. Randomized structural invariants, 100 cases each.
inline CheckResult check_structural(const UnitsContext& u = {}, int cases = 100, std::uint64_t seed = 8) {
  return detail::timed(8, "structural invariants", [&](CheckResult& r) {
    detail::Rng rng(seed);
    double rhs_worst = 0.0, psd_worst = 0.0, pop_worst = 0.0;
    for (int c = 0; c < cases; ++c) {
      const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 5);
      const auto model = detail::random_model(rng, c % 6, d, u);
      const CMatrix f = rhs(model, detail::random_density(rng, d), u);
      const double scale = max_abs(f);
      rhs_worst = std::max({rhs_worst, std::abs(f.trace()) / scale, hermiticity_residual(f) / scale});
    }
    for (int c = 0; c < cases; ++c) {
      const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 3);
      const auto model = detail::random_model(rng, 1, d, u);
      const auto rho = rng() % 2 ? detail::random_pure(rng, d) : detail::random_density(rng, d);
      const double tf = 10.0 * 100.0 * max_step(model, u);  // 10 of the fastest dissipative times
      const auto traj = integrate(model, rho, tf, recommended_steps(model, tf, u), u, {.store_every = 10});
      for (const auto& s : traj.states) psd_worst = std::max(psd_worst, -s.eigenvalues()(0));
    }
    for (int c = 0; c < cases; ++c) {
      const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 5);
      const int variant = std::array{0, 2, 4}[static_cast<std::size_t>(c % 3)];
      const auto model = detail::random_model(rng, variant, d, u);
      const HamiltonianSpec& h = variant == 0 ? std::get<GlobalDoubleCommutator>(model).h
                                 : variant == 2 ? std::get<MilburnExact>(model).h
                                                : std::get<AdlerEffective>(model).h_eff;
      const CMatrix f = h.spectrum().to_eigenbasis(rhs(model, detail::random_density(rng, d), u));
      const double scale = max_abs(f);
      for (Eigen::Index n = 0; n < d; ++n) pop_worst = std::max(pop_worst, std::abs(f(n, n)) / scale);
    }
    r.residual = std::max({rhs_worst / 1e-12, psd_worst / 1e-8, pop_worst / 1e-12});
    r.tolerance = 1.0;
    r.pass = r.residual <= 1.0;
    r.detail = fmt::format("{} cases each: rhs trace/Hermiticity {:.1e} (tol 1e-12), min eigenvalue {:.1e} (tol -1e-8), population rate {:.1e} (tol 1e-12)",
                           cases, rhs_worst, -psd_worst, pop_worst);
  });
}

inline std::vector<CheckResult> run_all(const UnitsContext& u = {}) {
  return {check_decoherence_table(u),   check_analytic_decay(u),  check_milburn_expansion(u),  check_stochastic_equivalence(u),
          check_diosi_penrose(u),       check_critical_radius(u), check_trace_conservation(), check_structural(u)};
}

inline std::string format_line(const CheckResult& r) {
  return fmt::format("[{}] criterion {}: {} | residual {:.3e} (tol {:.3e}) | {:.2f} s | {}", r.pass ? "PASS" : "FAIL", r.id, r.name,
                     r.residual, r.tolerance, r.seconds, r.detail);
}

}  // namespace decolab::checks

#endif  // DECOLAB_CHECKS_HPP
