#ifndef DECOLAB_COMMANDS_HPP
#define DECOLAB_COMMANDS_HPP

// Scenario dispatch: runs one command, writes its CSV file and returns the run report.

#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "decolab/checks.hpp"
#include "decolab/gravity.hpp"
#include "decolab/master.hpp"
#include "decolab/scenario.hpp"
#include "decolab/stochastic.hpp"
#include "decolab/tracedyn.hpp"
#include "decolab/version.hpp"

namespace decolab::cli {

/// Round-trip decimal; infinities as "inf".
inline std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { line(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(csv_number(v));
    line(s);
  }
  void line(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw Error(fmt::format("csv: row has {} cells, header has {}", cells.size(), width_));
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

struct ReportCheck {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct RunReport {
  Echo echo;
  std::vector<std::pair<std::string, std::string>> results;
  std::vector<ReportCheck> checks;
  std::vector<std::string> files;
  double wall_time_s = 0.0;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  void result(const std::string& k, double v) { results.emplace_back(k, csv_number(v)); }
  void result(const std::string& k, std::string v) { results.emplace_back(k, std::move(v)); }
  void check(std::string name, double residual, double tolerance) {
    checks.push_back({std::move(name), residual <= tolerance, residual, tolerance});
  }

  std::string to_text() const {
    std::string s;
    auto kv = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    kv("report.format", "decolab-run-report/1");
    for (const auto& [k, v] : echo) kv("scenario." + k, v);
    kv("engine.decolab", kVersion);
    kv("engine.eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION));
    kv("engine.boost", fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100));
    kv("engine.fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100));
    for (const auto& [k, v] : results) kv("result." + k, v);
    for (const auto& c : checks) {
      kv("check." + c.name + ".status", c.pass ? "pass" : "fail");
      kv("check." + c.name + ".residual", fmt::format("{:.6e}", c.residual));
      kv("check." + c.name + ".tolerance", fmt::format("{:.6e}", c.tolerance));
    }
    for (const auto& f : files) kv("output.file", f);
    kv("wall_time_s", fmt::format("{:.3f}", wall_time_s));
    kv("status", ok() ? "ok" : "failed");
    return s;
  }
};

/// Replaces the scenario seed (command-line override) and its echo line.
inline void override_seed(Scenario& sc, std::uint64_t seed) {
  sc.seed = seed;
  for (auto& [k, v] : sc.echo)
    if (k == "seed") v = std::to_string(seed) + " (command line)";
}

namespace detail {

using checks::detail::Rng;

inline long long round_up(long long n, long long m) { return (n + m - 1) / m * m; }

inline void write_file(const std::filesystem::path& path, const std::string& text, RunReport& rep) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open output file " + path.string());
  out << text;
  if (!out) throw Error("failed writing output file " + path.string());
  rep.files.push_back(path.string());
}

inline void run_two_level(const TwoLevelDecayParams& p, Csv*& csv, RunReport& rep, std::optional<Csv>& slot) {
  const UnitsContext u;
  const auto h = HamiltonianSpec::diagonal({0.0, p.delta_e});
  EvolutionModel model = GlobalDoubleCommutator{h, p.tau};
  double analytic = p.tau * p.delta_e * p.delta_e / (2.0 * u.hbar * u.hbar);
  if (p.model == "milburn-exact") {
    model = MilburnExact{h, p.tau};
    const double x = p.delta_e * p.tau / u.hbar;
    analytic = p.tau > 0.0 ? 2.0 * std::pow(std::sin(0.5 * x), 2) / p.tau : 0.0;
  } else if (p.model == "milburn-first-order") {
    model = MilburnFirstOrder{h, p.tau};
  } else if (p.model == "adler") {
    model = AdlerEffective{h, p.tau};
  }
  const double period = 2.0 * std::numbers::pi * u.hbar / p.delta_e;
  const double tf = p.t_final ? *p.t_final : analytic > 0.0 ? 5.0 / analytic : 10.0 * period;
  const long long steps = round_up(p.steps ? *p.steps : recommended_steps(model, tf, u), p.samples);
  const auto traj = integrate(model, checks::detail::balanced_qubit(), tf, steps, u, {.store_every = steps / p.samples});
  const auto fit = fit_offdiag_decay(traj, 0, 1);

  slot.emplace(std::vector<std::string>{"time [s]", "Re rho_01 [1]", "Im rho_01 [1]", "|rho_01| [1]", "rho_00 [1]", "rho_11 [1]"});
  csv = &*slot;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj.states[k];
    csv->row({traj.times[k], s(0, 1).real(), s(0, 1).imag(), std::abs(s(0, 1)), s(0, 0).real(), s(1, 1).real()});
  }
  rep.result("model", describe(model));
  rep.result("t_final_s", tf);
  rep.result("steps", static_cast<double>(steps));
  rep.result("analytic_rate_per_s", analytic);
  rep.result("fitted_rate_per_s", fit.rate);
  rep.result("fitted_phase_rate_rad_per_s", fit.phase_rate);
  rep.result("fit_rms_residual", fit.residual);
  rep.result("trace_corrections", static_cast<double>(traj.corrections.size()));
  // with no dissipation the residual is the log-amplitude lost over the whole run
  rep.check("rate_agreement", analytic > 0.0 ? std::abs(fit.rate - analytic) / analytic : std::abs(fit.rate) * tf, p.tolerance);
}

inline void run_milburn_table(const MilburnTableParams& p, Csv& csv, RunReport& rep) {
  const UnitsContext u;
  for (std::size_t k = 0; k < p.energies.size(); ++k) {
    const double de = p.energies[k];
    const double a = decoherence_time(de, p.tau, DecoherenceConvention::Tabulated, u);
    const double b = decoherence_time(de, p.tau, DecoherenceConvention::InverseRate, u);
    csv.row({de, u.to_ev(de), a, b});
    rep.result(fmt::format("row{}.t_d_s", k), fmt::format("{:.1e}", a));
    rep.result(fmt::format("row{}.t_d_inverse_rate_s", k), fmt::format("{:.1e}", b));
  }
}

inline void run_mc_compare(const McCompareParams& p, std::uint64_t seed, Csv& csv, RunReport& rep) {
  const UnitsContext u;
  Rng rng(stream_seed(seed, 0));
  const auto d = static_cast<Eigen::Index>(p.dim);
  std::optional<EvolutionModel> master;
  std::optional<NoiseModel> noise;
  std::optional<HamiltonianSpec> h;
  if (p.noise == "local-field") {
    std::vector<CMatrix> parts;
    std::uniform_real_distribution<double> un(-1.0, 1.0);
    for (long long r = 0; r < p.cells; ++r) {
      if (p.commuting) {
        CMatrix m = CMatrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) m(i, i) = p.delta_e * un(rng);
        parts.push_back(m);
      } else {
        parts.push_back(checks::detail::random_hermitian(rng, d, p.delta_e));
      }
    }
    const LocalHamiltonian lh(parts);
    const auto n = static_cast<Eigen::Index>(p.cells);
    RMatrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        k(i, j) = p.tau * (p.kernel.empty() ? (i == j ? 1.0 : 0.5) : p.kernel[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    const CorrelationKernel kernel(k, KernelVariant::Custom);
    master = LocalDoubleCommutator{lh, kernel};
    noise = GaussianLocalTimeField{kernel, lh};
    h = HamiltonianSpec::dense(lh.total());
    double hmax = 0.0;
    for (const auto& part : lh.parts()) hmax = std::max(hmax, part.operatorNorm());
    rep.result("parts_commute", lh.commuting() ? "true" : "false");
    rep.result("horizon_hr_t_over_hbar", hmax * p.t_final / u.hbar);
  } else {
    h = HamiltonianSpec::dense(checks::detail::random_hermitian(rng, d, p.delta_e));
    if (p.noise == "gaussian-global") {
      master = GlobalDoubleCommutator{*h, p.tau};
      noise = GaussianGlobalTime{p.tau};
    } else if (p.noise == "poisson") {
      master = MilburnExact{*h, p.tau};
      noise = PoissonDiscreteTime{p.tau};
    } else {
      master = AdlerEffective{*h, p.tau};
      noise = FluctuatingPlanck{p.tau};
    }
  }
  const auto rho0 = checks::detail::random_pure(rng, d);
  const long long steps = round_up(p.steps ? *p.steps : recommended_steps(*master, p.t_final, u), p.n_times);
  const auto traj = integrate(*master, rho0, p.t_final, steps, u, {.store_every = steps / p.n_times});
  const auto ens = ensemble_average(*noise, rho0, *h, checks::detail::linspace(p.t_final, static_cast<int>(p.n_times)), p.n_traj,
                                    stream_seed(seed, 1), u, {.threads = static_cast<unsigned>(p.threads)});
  const auto cmp = compare_to_master(ens, traj);
  for (const auto& z : cmp.table)
    csv.line({csv_number(z.time), std::to_string(z.i), std::to_string(z.j), std::string(1, z.part), csv_number(z.mean),
              csv_number(z.reference), csv_number(z.std_error), csv_number(z.z)});
  rep.result("master_model", describe(*master));
  rep.result("master_steps", static_cast<double>(steps));
  rep.result("n_traj", static_cast<double>(p.n_traj));
  rep.result("max_z", cmp.max_z);
  rep.check("max_z_score", cmp.max_z, p.z_max);
}

inline void run_local_me(const LocalMeParams& p, std::uint64_t seed, Csv& csv, RunReport& rep) {
  const UnitsContext u;
  Rng rng(stream_seed(seed, 0));
  const auto d = static_cast<Eigen::Index>(p.dim);
  std::vector<CMatrix> parts;
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (long long r = 0; r < p.cells; ++r) {
    if (p.commuting) {
      CMatrix m = CMatrix::Zero(d, d);
      for (Eigen::Index i = 0; i < d; ++i) m(i, i) = p.delta_e * un(rng);
      parts.push_back(m);
    } else {
      parts.push_back(checks::detail::random_hermitian(rng, d, p.delta_e));
    }
  }
  const LocalHamiltonian lh(parts);
  const auto n = static_cast<Eigen::Index>(p.cells);
  const CorrelationKernel kernel = p.kernel == "global"     ? global_kernel(n, p.tau)
                                   : p.kernel == "diagonal" ? diagonal_kernel(std::vector<double>(static_cast<std::size_t>(n), p.tau))
                                                            : newtonian_kernel(CellGrid::line(n, p.spacing), {p.sigma, p.prefactor}, u);
  const EvolutionModel model = LocalDoubleCommutator{lh, kernel};
  const auto rho0 = checks::detail::random_pure(rng, d);
  const long long steps = round_up(p.steps ? *p.steps : recommended_steps(model, p.t_final, u), p.samples);
  const auto traj = integrate(model, rho0, p.t_final, steps, u, {.store_every = steps / p.samples});
  double min_eig = 1.0, trace_dev = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj.states[k];
    const double e0 = s.eigenvalues()(0);
    const double tr = s.matrix().trace().real();
    min_eig = std::min(min_eig, e0);
    trace_dev = std::max(trace_dev, std::abs(tr - 1.0));
    csv.row({traj.times[k], tr, e0, (s.matrix() * s.matrix()).trace().real(), hermiticity_residual(s.matrix()), std::abs(s(0, 1))});
  }
  rep.result("kernel", to_string(kernel.variant()));
  rep.result("kernel_min_eigenvalue_s", validate_psd(kernel));
  rep.result("kernel_max_entry_s", max_abs(kernel.matrix()));
  rep.result("parts_commute", lh.commuting() ? "true" : "false");
  rep.result("steps", static_cast<double>(steps));
  rep.result("trace_corrections", static_cast<double>(traj.corrections.size()));
  rep.result("min_eigenvalue", min_eig);
  rep.check("positivity", std::max(0.0, -min_eig), kIntegratedPositivityTol);
  rep.check("trace", trace_dev, kTraceTol);
}

inline void run_dp_lumps(const DpLumpsParams& p, Csv*& csv, RunReport& rep, std::optional<Csv>& slot) {
  const UnitsContext u;
  const auto grid = CellGrid::cubic(Vec3::Zero(), p.spacing, {static_cast<int>(p.cells[0]), static_cast<int>(p.cells[1]), static_cast<int>(p.cells[2])});
  std::vector<MassDensityField> f;
  for (const auto& l : p.lumps) {
    const double m = l.mass ? *l.mass : *l.density * 4.0 / 3.0 * std::numbers::pi * l.radius * l.radius * l.radius;
    f.push_back(uniform_ball(m, l.radius, grid, p.sigma, Vec3(l.center[0], l.center[1], l.center[2])));
  }
  const LumpPair pair(f[0], f[1]);
  std::vector<std::string> header{"D11 [J]", "D22 [J]", "D12 [J]", "e_grav [J]", "e_magnitudes [J]", "t_d [s]"};
  if (p.rate_check) {
    header.push_back("rate master fit [s^-1]");
    header.push_back("rate e_grav/hbar [s^-1]");
  }
  slot.emplace(header);
  csv = &*slot;
  if (p.rate_check) {
    const auto rc = dp_rate_check(pair, u);
    const auto& g = rc.grav;
    csv->row({g.d11, g.d22, g.d12, g.e_grav, g.e_magnitudes, g.t_d, rc.rate_from_me, rc.rate_from_egrav});
    rep.result("e_grav_J", g.e_grav);
    rep.result("t_d_s", g.t_d);
    rep.result("rate_from_master_per_s", rc.rate_from_me);
    rep.result("rate_from_egrav_per_s", rc.rate_from_egrav);
    const double dev = rc.rate_from_egrav > 0.0 ? std::abs(rc.rate_from_me - rc.rate_from_egrav) / rc.rate_from_egrav : std::abs(rc.rate_from_me);
    rep.check("rate_agreement", dev, p.tolerance);
  } else {
    const auto g = egrav(pair, u);
    csv->row({g.d11, g.d22, g.d12, g.e_grav, g.e_magnitudes, g.t_d});
    rep.result("e_grav_J", g.e_grav);
    rep.result("t_d_s", g.t_d);
  }
  rep.result("mass_1_kg", f[0].total_mass());
  rep.result("mass_2_kg", f[1].total_mass());
}

inline void run_critical_radius(const CriticalRadiusParams& p, Csv& csv, RunReport& rep) {
  const UnitsContext u;
  const auto res = critical_radius(p.density, u,
                                   {p.r_min, p.r_max, static_cast<int>(p.points_per_decade), p.sigma_ratio, p.sigma_floor});
  for (const auto& row : res.table) csv.row({row.radius, row.sigma, row.mass, row.e_grav, row.t_dyn, row.t_d});
  rep.result("crossings", static_cast<double>(res.crossings));
  rep.result("r_crit_m", res.r_crit ? csv_number(*res.r_crit) : std::string("none"));
}

inline void run_trace_demo(const TraceDemoParams& p, std::uint64_t seed, Csv*& csv, RunReport& rep, std::optional<Csv>& slot) {
  TraceModelSpec spec{static_cast<int>(p.n), static_cast<int>(p.r_cells), p.omega2, p.lambda, p.kappa};
  if (p.matrix_coefficient) {
    CMatrix a = CMatrix::Zero(spec.n, spec.n);
    for (int i = 0; i < spec.n; ++i) a(i, i) = (*p.matrix_coefficient)[static_cast<std::size_t>(i)];
    spec.matrix_coefficient = a;
    spec.mu = p.mu;
  }
  const auto s0 = random_trace_state(spec, stream_seed(seed, 0), p.amplitude);
  const auto rep_run = conservation_run(spec, s0, p.dt, static_cast<std::size_t>(p.steps), static_cast<std::size_t>(p.record_every));
  std::vector<std::string> header{"t [1]", "H [1]", "|C - C0|max [1]"};
  for (long long r = 0; r < p.r_cells; ++r) header.push_back(fmt::format("site {} commutator drift [1]", r));
  slot.emplace(header);
  csv = &*slot;
  for (const auto& row : rep_run.rows) {
    std::vector<double> v{row.t, row.energy, row.c_drift};
    v.insert(v.end(), row.site_drift.begin(), row.site_drift.end());
    csv->row(v);
  }
  rep.result("energy0", rep_run.energy0);
  rep.result("c0_max", rep_run.c0_max);
  rep.result("max_c_drift", rep_run.max_c_drift);
  rep.result("max_energy_drift_relative", rep_run.max_energy_drift);
  const auto& last = rep_run.rows.back().site_drift;
  for (std::size_t r = 0; r < last.size(); ++r) rep.result(fmt::format("site{}_final_commutator_drift", r), last[r]);
  if (!p.matrix_coefficient) rep.check("c_conservation", rep_run.max_c_drift / (1.0 + rep_run.c0_max), 1e-8);
}

}  // namespace detail

/// Runs `sc`, writing `<dir>/<name>.csv`. `out_dir` overrides the scenario's output directory.
inline RunReport run(const Scenario& sc, const std::optional<std::string>& out_dir = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.echo = sc.echo;
  if (out_dir)
    for (auto& [k, v] : rep.echo)
      if (k == "output.dir") v = *out_dir + " (command line)";
  std::optional<Csv> slot;
  Csv* csv = nullptr;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoLevelDecayParams>) {
          detail::run_two_level(p, csv, rep, slot);
        } else if constexpr (std::is_same_v<T, MilburnTableParams>) {
          slot.emplace(std::vector<std::string>{"delta_e [J]", "delta_e [eV]", "t_D [s]", "t_D inverse rate [s]"});
          csv = &*slot;
          detail::run_milburn_table(p, *csv, rep);
        } else if constexpr (std::is_same_v<T, McCompareParams>) {
          slot.emplace(std::vector<std::string>{"time [s]", "row i [index]", "column j [index]", "part [r/i]", "ensemble mean [1]",
                                                "master [1]", "standard error [1]", "z [1]"});
          csv = &*slot;
          detail::run_mc_compare(p, sc.seed, *csv, rep);
        } else if constexpr (std::is_same_v<T, LocalMeParams>) {
          slot.emplace(std::vector<std::string>{"time [s]", "trace [1]", "min eigenvalue [1]", "purity [1]", "hermiticity residual [1]",
                                                "|rho_01| [1]"});
          csv = &*slot;
          detail::run_local_me(p, sc.seed, *csv, rep);
        } else if constexpr (std::is_same_v<T, DpLumpsParams>) {
          detail::run_dp_lumps(p, csv, rep, slot);
        } else if constexpr (std::is_same_v<T, CriticalRadiusParams>) {
          slot.emplace(std::vector<std::string>{"radius [m]", "sigma [m]", "mass [kg]", "e_grav [J]", "t_dyn [s]", "t_d [s]"});
          csv = &*slot;
          detail::run_critical_radius(p, *csv, rep);
        } else {
          detail::run_trace_demo(p, sc.seed, csv, rep, slot);
        }
      },
      sc.params);
  const std::filesystem::path dir = out_dir ? *out_dir : sc.output.dir;
  detail::write_file(dir / (sc.name + ".csv"), csv->text(), rep);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// The acceptance suite as a run report.
inline RunReport run_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.echo.emplace_back("command", "check");
  for (const auto& c : checks::run_all()) {
    const std::string name = fmt::format("criterion_{}", c.id);
    rep.checks.push_back({name, c.pass, c.residual, c.tolerance});
    rep.result(name + ".name", c.name);
    rep.result(name + ".detail", c.detail);
    rep.result(name + ".seconds", fmt::format("{:.2f}", c.seconds));
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace decolab::cli

#endif  // DECOLAB_COMMANDS_HPP
