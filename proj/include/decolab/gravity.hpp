#ifndef DECOLAB_GRAVITY_HPP
#define DECOLAB_GRAVITY_HPP

// Gridded smeared mass densities, Newtonian pair energies D_fg, the decay energy e_grav of a
// superposed pair of lumps and the critical-radius sweep.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "decolab/core.hpp"
#include "decolab/errors.hpp"
#include "decolab/kernels.hpp"
#include "decolab/master.hpp"
#include "decolab/units.hpp"

namespace decolab {

namespace detail {

struct NeumaierSum {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

/// Mass density (kg m^-3) per cell of `grid`, smeared with a Gaussian of width `sigma` (m).
class MassDensityField {
 public:
  MassDensityField(CellGrid grid, std::vector<double> values, double sigma)
      : grid_(std::move(grid)), values_(std::move(values)), sigma_(sigma) {
    if (values_.size() != grid_.n_cells())
      throw DimensionMismatch("mass density needs one value per cell (" + std::to_string(grid_.n_cells()) + ")");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("mass density values must be finite and >= 0");
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw DomainError("smearing sigma must be > 0");
    if (sigma_ < grid_.max_spacing() * (1.0 - 1e-12))
      throw GridError("smearing sigma " + std::to_string(sigma_) + " m is below the grid spacing " +
                      std::to_string(grid_.max_spacing()) + " m");
  }

  const CellGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double sigma() const { return sigma_; }

  double total_mass() const {
    detail::NeumaierSum s;
    for (double v : values_) s.add(v);
    return s.value() * grid_.cell_volume();
  }

  Vec3 center_of_mass() const {
    Vec3 m = Vec3::Zero();
    double w = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] == 0.0) continue;
      m += values_[i] * grid_.center(i);
      w += values_[i];
    }
    if (!(w > 0.0)) throw DomainError("center_of_mass: field has no mass");
    return m / w;
  }

  MassDensityField scaled(double lambda) const {
    std::vector<double> v = values_;
    for (double& x : v) x *= lambda;
    return MassDensityField(grid_, std::move(v), sigma_);
  }

  bool compatible(const MassDensityField& o) const { return grid_.same_geometry(o.grid_) && sigma_ == o.sigma_; }

 private:
  CellGrid grid_;
  std::vector<double> values_;
  double sigma_;
};

/// Two branches of a superposed mass distribution on one grid.
struct LumpPair {
  MassDensityField f1, f2;

  LumpPair(MassDensityField a, MassDensityField b) : f1(std::move(a)), f2(std::move(b)) {
    if (!f1.compatible(f2)) throw GridError("lump pair: fields must share grid and sigma");
    if (!(f1.total_mass() > 0.0) || !(f2.total_mass() > 0.0)) throw DomainError("lump pair: both lumps need mass > 0");
  }
};

struct GravResult {
  double d11 = 0.0, d22 = 0.0, d12 = 0.0;  // J, pair-energy magnitudes
  double e_grav = 0.0;                     // J, (G/2) quadratic form of f1 - f2
  double e_magnitudes = 0.0;                  // J, |D11 + D22 - D12|, the same combination taken in magnitude
  double t_d = std::numeric_limits<double>::infinity();  // s, hbar / e_grav
};

namespace detail {

/// K_sigma on every cell offset of `grid`, indexed by offset_code(b) - offset_code(a) + centre.
class OffsetKernel {
 public:
  OffsetKernel(const CellGrid& grid, double sigma) {
    const auto& n = grid.dims();
    for (int ax = 0; ax < 3; ++ax) span_[ax] = 2 * n[ax] - 1;
    table_.resize(static_cast<std::size_t>(span_[0]) * span_[1] * span_[2]);
    const Vec3& a = grid.spacing();
    for (int k = 0; k < span_[2]; ++k)
      for (int j = 0; j < span_[1]; ++j)
        for (int i = 0; i < span_[0]; ++i) {
          const Vec3 d((i - n[0] + 1) * a(0), (j - n[1] + 1) * a(1), (k - n[2] + 1) * a(2));
          table_[index(i, j, k)] = smeared_coulomb(d.norm(), sigma);
        }
    centre_ = static_cast<long long>(index(n[0] - 1, n[1] - 1, n[2] - 1));
  }

  long long code(const std::array<int, 3>& c) const {
    return c[0] + static_cast<long long>(span_[0]) * (c[1] + static_cast<long long>(span_[1]) * c[2]);
  }
  const double* at_centre() const { return table_.data() + centre_; }

 private:
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(span_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(span_[1]) * static_cast<std::size_t>(k));
  }
  std::array<int, 3> span_{};
  std::vector<double> table_;
  long long centre_ = 0;
};

struct SparseField {
  std::vector<double> value;
  std::vector<long long> code;
};

inline SparseField sparse(const CellGrid& grid, const OffsetKernel& k, const std::vector<double>& v) {
  SparseField s;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) {
      s.value.push_back(v[i]);
      s.code.push_back(k.code(grid.unflatten(i)));
    }
  return s;
}

/// sum_i sum_j a_i b_j K(r_i - r_j). Row sums in double, rows combined with Neumaier summation.
inline double bilinear_sum(const OffsetKernel& k, const SparseField& a, const SparseField& b) {
  const double* t = k.at_centre();
  NeumaierSum sum;
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    const double* row = t - a.code[i];
    double s = 0.0;
    for (std::size_t j = 0; j < b.value.size(); ++j) s += b.value[j] * row[b.code[j]];
    sum.add(a.value[i] * s);
  }
  return sum.value();
}

}  // namespace detail

/// D_fg = G sum_ij f_i g_j V^2 K_sigma(|r_i - r_j|) (J).
inline double pair_energy(const MassDensityField& f, const MassDensityField& g, const UnitsContext& units = {}) {
  units.validate();
  if (!f.compatible(g)) throw GridError("pair_energy: fields must share grid and sigma");
  const detail::OffsetKernel k(f.grid(), f.sigma());
  const double v = f.grid().cell_volume();
  return units.G * v * v * detail::bilinear_sum(k, detail::sparse(f.grid(), k, f.values()), detail::sparse(g.grid(), k, g.values()));
}

inline GravResult egrav(const LumpPair& pair, const UnitsContext& units = {}) {
  units.validate();
  const CellGrid& grid = pair.f1.grid();
  const detail::OffsetKernel k(grid, pair.f1.sigma());
  const double gv2 = units.G * grid.cell_volume() * grid.cell_volume();
  const auto s1 = detail::sparse(grid, k, pair.f1.values());
  const auto s2 = detail::sparse(grid, k, pair.f2.values());
  std::vector<double> diff(grid.n_cells());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pair.f1.values()[i] - pair.f2.values()[i];
  const auto sd = detail::sparse(grid, k, diff);

  GravResult r;
  r.d11 = gv2 * detail::bilinear_sum(k, s1, s1);
  r.d22 = gv2 * detail::bilinear_sum(k, s2, s2);
  r.d12 = gv2 * detail::bilinear_sum(k, s1, s2);
  r.e_grav = std::max(0.0, 0.5 * gv2 * detail::bilinear_sum(k, sd, sd));
  r.e_magnitudes = std::abs(r.d11 + r.d22 - r.d12);
  r.t_d = r.e_grav > 0.0 ? units.hbar / r.e_grav : std::numeric_limits<double>::infinity();
  return r;
}

struct RateCheck {
  double rate_from_me;     // s^-1, fitted from the integrated pointer model
  double rate_from_egrav;  // s^-1, e_grav / hbar
  GravResult grav;
};

/// Integrates the two-pointer dephasing model with Gamma_01 = e_grav / hbar and fits the decay.
inline RateCheck dp_rate_check(const LumpPair& pair, const UnitsContext& units = {}) {
  const GravResult g = egrav(pair, units);
  const double gamma = g.e_grav / units.hbar;
  RMatrix rates = RMatrix::Zero(2, 2);
  rates(0, 1) = rates(1, 0) = gamma;
  const EvolutionModel model = DiosiPenrosePointer{rates, HamiltonianSpec::diagonal({0.0, 0.0})};
  const double t_final = gamma > 0.0 ? 5.0 / gamma : 1.0;
  const auto traj = integrate(model, DensityMatrix(CMatrix::Constant(2, 2, cd(0.5))), t_final,
                              std::max<long long>(1000, recommended_steps(model, t_final, units)), units,
                              {.store_every = 10});
  return {fit_offdiag_decay(traj, 0, 1).rate, gamma, g};
}

/// Uniform ball of `mass` and `radius` centred at `center`: cells whose centre lies inside the ball.
/// With `renormalize` the values are rescaled so the discretized mass equals `mass` exactly.
inline MassDensityField uniform_ball(double mass, double radius, const CellGrid& grid, double sigma, const Vec3& center,
                                     bool renormalize = true) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("uniform_ball: mass must be > 0");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("uniform_ball: radius must be > 0");
  const Vec3 lo = grid.origin(), hi = grid.upper();
  for (int ax = 0; ax < 3; ++ax)
    if (center(ax) - radius - 3.0 * sigma < lo(ax) - 1e-12 * radius || center(ax) + radius + 3.0 * sigma > hi(ax) + 1e-12 * radius)
      throw GridError("uniform_ball: ball plus 3 sigma margin does not fit in the grid");
  const double rho = mass / (4.0 / 3.0 * std::numbers::pi * radius * radius * radius);
  std::vector<double> v(grid.n_cells(), 0.0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if ((grid.center(i) - center).norm() <= radius) {
      v[i] = rho;
      ++inside;
    }
  if (inside == 0) throw GridError("uniform_ball: no cell centre inside the ball (radius below resolution)");
  if (renormalize) {
    const double scale = mass / (static_cast<double>(inside) * rho * grid.cell_volume());
    for (double& x : v) x *= scale;
  }
  return MassDensityField(grid, std::move(v), sigma);
}

inline MassDensityField uniform_ball(double mass, double radius, const CellGrid& grid, double sigma) {
  return uniform_ball(mass, radius, grid, sigma, 0.5 * (grid.origin() + grid.upper()));
}

namespace detail {

/// Form factor of a uniform ball, F(x) = 3 (sin x - x cos x) / x^3.
inline double ball_form_factor(double x) {
  if (x < 1e-2) {
    const double x2 = x * x;
    return 1.0 - x2 / 10.0 + x2 * x2 / 280.0;
  }
  return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

}  // namespace detail

/// Continuum e_grav (J) of two identical Gaussian-smeared uniform balls whose centres are `d` apart:
/// (2/pi) G M^2 int_0^inf F(kR)^2 exp(-k^2 sigma^2) (1 - sinc(kd)) dk.
inline double egrav_displaced_balls(double mass, double radius, double d, double sigma, const UnitsContext& units = {}) {
  if (!(mass > 0.0) || !(radius > 0.0) || !(sigma > 0.0) || !(d >= 0.0)) throw DomainError("egrav_displaced_balls: invalid geometry");
  const double k_max = 10.0 / sigma;  // exp(-100) beyond
  // at least one panel per half period of F(kR) and sinc(kd)
  const int panels = std::max(64, static_cast<int>(std::ceil(k_max * std::max(radius, d) / std::numbers::pi)));
  const double width = k_max / panels;
  auto f = [&](double k) {
    const double ff = detail::ball_form_factor(k * radius);
    return ff * ff * std::exp(-k * k * sigma * sigma) * (1.0 - detail::sinc(k * d));
  };
  double sum = 0.0;
  for (int p = 0; p < panels; ++p)
    sum += boost::math::quadrature::gauss<double, 20>::integrate(f, p * width, (p + 1) * width);
  return 2.0 / std::numbers::pi * units.G * mass * mass * sum;
}

struct CriticalRadiusOptions {
  double r_min = 1e-9;         // m
  double r_max = 1e-3;         // m
  int points_per_decade = 20;
  double sigma_ratio = 0.1;    // sigma = max(sigma_ratio R, sigma_floor)
  double sigma_floor = 0.0;    // m
};

struct CriticalRadiusRow {
  double radius;  // m
  double sigma;   // m
  double mass;    // kg
  double e_grav;  // J
  double t_dyn;   // s, M R^2 / hbar
  double t_d;     // s, hbar / e_grav
};

struct CriticalRadiusResult {
  std::optional<double> r_crit;  // m, empty unless the sweep crosses exactly once
  int crossings = 0;
  std::vector<CriticalRadiusRow> table;
};

/// Sweeps R log-uniformly and locates t_dyn(R) = t_d(R) for two copies of a ball of `density`
/// displaced by 2R. The crossing is interpolated linearly in log-log coordinates.
inline CriticalRadiusResult critical_radius(double density, const UnitsContext& units = {}, const CriticalRadiusOptions& opt = {}) {
  units.validate();
  if (!(density > 0.0) || !std::isfinite(density)) throw DomainError("critical_radius: density must be > 0");
  if (!(opt.r_min > 0.0) || !(opt.r_max > opt.r_min) || opt.points_per_decade < 1)
    throw DomainError("critical_radius: invalid sweep range");
  if (!(opt.sigma_ratio > 0.0) || !(opt.sigma_floor >= 0.0)) throw DomainError("critical_radius: invalid smearing rule");

  CriticalRadiusResult res;
  const double decades = std::log10(opt.r_max / opt.r_min);
  const int n = static_cast<int>(std::lround(decades * opt.points_per_decade)) + 1;
  for (int i = 0; i < n; ++i) {
    const double r = opt.r_min * std::pow(10.0, decades * i / (n - 1));
    const double sigma = std::max(opt.sigma_ratio * r, opt.sigma_floor);
    const double m = 4.0 / 3.0 * std::numbers::pi * r * r * r * density;
    const double e = egrav_displaced_balls(m, r, 2.0 * r, sigma, units);
    res.table.push_back({r, sigma, m, e, m * r * r / units.hbar, e > 0.0 ? units.hbar / e : std::numeric_limits<double>::infinity()});
  }
  double root = 0.0;
  for (std::size_t i = 1; i < res.table.size(); ++i) {
    const auto& a = res.table[i - 1];
    const auto& b = res.table[i];
    const double ga = std::log(a.t_dyn / a.t_d), gb = std::log(b.t_dyn / b.t_d);
    if ((ga < 0.0) != (gb < 0.0)) {
      ++res.crossings;
      const double w = ga / (ga - gb);
      root = std::exp(std::log(a.radius) + w * (std::log(b.radius) - std::log(a.radius)));
    }
  }
  if (res.crossings == 1) res.r_crit = root;
  return res;
}

}  // namespace decolab

#endif  // DECOLAB_GRAVITY_HPP
