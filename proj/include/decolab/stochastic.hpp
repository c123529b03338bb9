#ifndef DECOLAB_STOCHASTIC_HPP
#define DECOLAB_STOCHASTIC_HPP

// Noise pictures whose ensemble means reproduce the master equations: Gaussian global time,
// Poisson discrete time, fluctuating 1/hbar and correlated local-time fields.
//
// Random streams: trajectory k of an ensemble with master seed S draws from
// std::mt19937_64 seeded with splitmix64(splitmix64(S) ^ k). sample_state(seed) uses stream k = 0.

#include <Eigen/Dense>
#include <fmt/format.h>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "decolab/core.hpp"
#include "decolab/errors.hpp"
#include "decolab/kernels.hpp"
#include "decolab/master.hpp"
#include "decolab/units.hpp"

namespace decolab {

/// t -> t + dt, dt ~ Normal(0, tau t).
struct GaussianGlobalTime {
  double tau;
};
/// Time advances in n steps of tau_planck, n ~ Poisson(t / tau_planck).
struct PoissonDiscreteTime {
  double tau_planck;
};
/// 1/hbar -> 1/hbar + d, d ~ Normal(0, tau / (hbar^2 t)); fixed-horizon.
struct FluctuatingPlanck {
  double tau;
};
/// t_r = t + dt_r, (dt_r) ~ Normal(0, kernel t); evolution exp(-i sum_r H_r t_r / hbar); fixed-horizon.
struct GaussianLocalTimeField {
  CorrelationKernel kernel;
  LocalHamiltonian parts;
};

using NoiseModel = std::variant<GaussianGlobalTime, PoissonDiscreteTime, FluctuatingPlanck, GaussianLocalTimeField>;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t k) { return splitmix64(splitmix64(master_seed) ^ k); }

using Engine = std::mt19937_64;

struct EnsembleResult {
  std::vector<double> times;
  std::vector<DensityMatrix> mean_state;
  long long n_traj = 0;
  std::vector<RMatrix> std_error_re;  // standard error of the mean, real parts
  std::vector<RMatrix> std_error_im;  // imaginary parts
};

namespace detail {

inline void require_nonneg_time(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be finite and >= 0");
}

/// Draws one realization over a non-decreasing list of times. Global-time and Poisson noises are
/// sampled as paths with independent increments; the fixed-horizon noises draw afresh per time.
class Sampler {
 public:
  Sampler(const NoiseModel& model, const DensityMatrix& rho0, const HamiltonianSpec& h, const UnitsContext& units)
      : model_(model), rho0_(rho0.matrix()), spectrum_(h.spectrum()), hbar_(units.hbar) {
    units.validate();
    require_same_dim(rho0.dim(), h.dim(), "stochastic sampler");
    std::visit([this, &h](const auto& m) { this->init(m, h); }, model_);
  }

  template <class Emit>
  void run(Engine& eng, std::span<const double> times, Emit&& emit) const {
    for (std::size_t i = 0; i < times.size(); ++i) {
      require_nonneg_time(times[i], "sample time");
      if (i > 0 && times[i] < times[i - 1]) throw DomainError("sample times must be non-decreasing");
    }
    std::visit([&](const auto& m) { this->path(m, eng, times, emit); }, model_);
  }

 private:
  void init(const GaussianGlobalTime& m, const HamiltonianSpec&) { require_nonneg_time(m.tau, "GaussianGlobalTime.tau"); }
  void init(const PoissonDiscreteTime& m, const HamiltonianSpec&) { require_nonneg_time(m.tau_planck, "PoissonDiscreteTime.tau_planck"); }
  void init(const FluctuatingPlanck& m, const HamiltonianSpec&) { require_nonneg_time(m.tau, "FluctuatingPlanck.tau"); }
  void init(const GaussianLocalTimeField& m, const HamiltonianSpec& h) {
    if (static_cast<std::size_t>(m.kernel.n_cells()) != m.parts.size())
      throw DimensionMismatch("local time field: kernel size differs from number of Hamiltonian parts");
    require_same_dim(m.parts.dim(), h.dim(), "local time field");
    const CMatrix total = m.parts.total();
    if (max_abs(CMatrix(total - h.matrix())) > 1e-12 * std::max(max_abs(total), std::numeric_limits<double>::min()))
      throw DomainError("local time field: Hamiltonian differs from the sum of its parts");
    factor_ = factor_for_sampling(m.kernel);
    diagonal_parts_ = true;
    for (const auto& p : m.parts.parts())
      if (max_abs(CMatrix(p - CMatrix(p.diagonal().asDiagonal()))) != 0.0) diagonal_parts_ = false;
    if (diagonal_parts_) {
      part_diag_ = RMatrix(m.parts.dim(), static_cast<Eigen::Index>(m.parts.size()));
      for (std::size_t r = 0; r < m.parts.size(); ++r) part_diag_.col(static_cast<Eigen::Index>(r)) = m.parts[r].diagonal().real();
    }
  }

  template <class Emit>
  void path(const GaussianGlobalTime& m, Engine& eng, std::span<const double> times, Emit& emit) const {
    std::normal_distribution<double> normal;
    double prev = 0.0, w = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      w += std::sqrt(m.tau * (times[i] - prev)) * normal(eng);
      prev = times[i];
      emit(i, propagate(spectrum_, rho0_, times[i] + w, 1.0 / hbar_));
    }
  }

  template <class Emit>
  void path(const PoissonDiscreteTime& m, Engine& eng, std::span<const double> times, Emit& emit) const {
    double prev = 0.0;
    double n = 0.0;  // jump count; exact integers far beyond the exact-sampling range
    for (std::size_t i = 0; i < times.size(); ++i) {
      double t_eff = times[i];
      if (m.tau_planck > 0.0) {
        n += poisson_count((times[i] - prev) / m.tau_planck, eng);
        t_eff = n * m.tau_planck;
      }
      prev = times[i];
      emit(i, propagate(spectrum_, rho0_, t_eff, 1.0 / hbar_));
    }
  }

  // Above 1e15 expected jumps the normal limit replaces exact sampling (skewness 1/sqrt(mean) < 1e-7).
  static double poisson_count(double mean, Engine& eng) {
    if (!(mean > 0.0)) return 0.0;
    if (mean <= 1e15) return static_cast<double>(std::poisson_distribution<long long>(mean)(eng));
    return std::max(0.0, std::round(mean + std::sqrt(mean) * std::normal_distribution<double>()(eng)));
  }

  template <class Emit>
  void path(const FluctuatingPlanck& m, Engine& eng, std::span<const double> times, Emit& emit) const {
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      if (!(t > 0.0)) throw DomainError("FluctuatingPlanck: t = 0 is rejected (variance tau / t diverges)");
      const double delta = std::sqrt(m.tau / t) / hbar_ * normal(eng);
      emit(i, propagate(spectrum_, rho0_, t, 1.0 / hbar_ + delta));
    }
  }

  template <class Emit>
  void path(const GaussianLocalTimeField& m, Engine& eng, std::span<const double> times, Emit& emit) const {
    std::normal_distribution<double> normal;
    const Eigen::Index n = factor_.rows();
    RVector z(n);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      for (Eigen::Index r = 0; r < n; ++r) z(r) = normal(eng);
      const RVector tr = RVector::Constant(n, t) + std::sqrt(t) * (factor_ * z);
      if (diagonal_parts_) {
        const RVector phase = part_diag_ * tr / hbar_;  // per basis state
        CMatrix out = rho0_;
        for (Eigen::Index b = 0; b < out.cols(); ++b)
          for (Eigen::Index a = 0; a < out.rows(); ++a) out(a, b) *= std::polar(1.0, -(phase(a) - phase(b)));
        emit(i, std::move(out));
      } else {
        CMatrix gen = CMatrix::Zero(rho0_.rows(), rho0_.cols());
        for (std::size_t r = 0; r < m.parts.size(); ++r) gen += tr(static_cast<Eigen::Index>(r)) * m.parts[r];
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(gen));
        Spectrum s{es.eigenvalues(), es.eigenvectors()};
        emit(i, propagate(s, rho0_, 1.0, 1.0 / hbar_));
      }
    }
  }

  NoiseModel model_;
  CMatrix rho0_;
  Spectrum spectrum_;
  double hbar_;
  RMatrix factor_;
  bool diagonal_parts_ = false;
  RMatrix part_diag_;
};

/// Welford accumulator of complex matrices with separate real/imaginary second moments.
struct MomentAccumulator {
  long long n = 0;
  std::vector<CMatrix> mean;
  std::vector<RMatrix> m2_re, m2_im;

  MomentAccumulator(std::size_t n_times, Eigen::Index d)
      : mean(n_times, CMatrix::Zero(d, d)), m2_re(n_times, RMatrix::Zero(d, d)), m2_im(n_times, RMatrix::Zero(d, d)) {}

  void add(std::size_t i, const CMatrix& x, long long count) {
    const CMatrix delta = x - mean[i];
    mean[i] += delta / static_cast<double>(count);
    const CMatrix delta2 = x - mean[i];
    m2_re[i].array() += delta.real().array() * delta2.real().array();
    m2_im[i].array() += delta.imag().array() * delta2.imag().array();
  }

  /// Chan et al. pairwise merge.
  void merge(const MomentAccumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n), nt = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const CMatrix delta = o.mean[i] - mean[i];
      mean[i] += delta * (nb / nt);
      m2_re[i].array() += o.m2_re[i].array() + delta.real().array().square() * (na * nb / nt);
      m2_im[i].array() += o.m2_im[i].array() + delta.imag().array().square() * (na * nb / nt);
    }
    n += o.n;
  }
};

}  // namespace detail

/// One realization at time t. Deterministic function of `seed`.
inline DensityMatrix sample_state(const NoiseModel& model, const DensityMatrix& rho0, const HamiltonianSpec& h, double t,
                                  std::uint64_t seed, const UnitsContext& units = {}) {
  detail::require_nonneg_time(t, "sample_state: t");
  const detail::Sampler sampler(model, rho0, h, units);
  Engine eng(stream_seed(seed, 0));
  CMatrix out;
  const double ts[1] = {t};
  sampler.run(eng, ts, [&](std::size_t, CMatrix s) { out = std::move(s); });
  return DensityMatrix(std::move(out));
}

struct EnsembleOptions {
  unsigned threads = 0;         // 0: hardware concurrency
  long long block_size = 256;   // fixed partition, so results do not depend on the thread count
};

/// Per-time arithmetic mean over n_traj realizations with standard errors.
inline EnsembleResult ensemble_average(const NoiseModel& model, const DensityMatrix& rho0, const HamiltonianSpec& h,
                                       const std::vector<double>& times, long long n_traj, std::uint64_t seed,
                                       const UnitsContext& units = {}, const EnsembleOptions& opt = {}) {
  if (n_traj < 2) throw DomainError("ensemble_average: n_traj must be >= 2");
  if (times.empty()) throw DomainError("ensemble_average: no sample times");
  if (opt.block_size < 1) throw DomainError("ensemble_average: block_size must be >= 1");
  const detail::Sampler sampler(model, rho0, h, units);
  const Eigen::Index d = rho0.dim();
  const long long n_blocks = (n_traj + opt.block_size - 1) / opt.block_size;

  std::vector<detail::MomentAccumulator> blocks(static_cast<std::size_t>(n_blocks), detail::MomentAccumulator(times.size(), d));
  std::atomic<long long> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_blocks));
  auto worker = [&] {
    for (long long b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
      try {
        auto& acc = blocks[static_cast<std::size_t>(b)];
        const long long lo = b * opt.block_size, hi = std::min(n_traj, lo + opt.block_size);
        for (long long k = lo; k < hi; ++k) {
          Engine eng(stream_seed(seed, static_cast<std::uint64_t>(k)));
          const long long count = k - lo + 1;
          sampler.run(eng, times, [&](std::size_t i, const CMatrix& s) { acc.add(i, s, count); });
          acc.n = count;
        }
      } catch (...) {
        errors[static_cast<std::size_t>(b)] = std::current_exception();
      }
    }
  };
  unsigned n_threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<long long>(n_threads, n_blocks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  detail::MomentAccumulator total(times.size(), d);
  for (const auto& b : blocks) total.merge(b);

  EnsembleResult res;
  res.times = times;
  res.n_traj = n_traj;
  const double nn = static_cast<double>(n_traj);
  for (std::size_t i = 0; i < times.size(); ++i) {
    res.mean_state.emplace_back(total.mean[i]);
    res.std_error_re.push_back((total.m2_re[i] / (nn - 1.0) / nn).cwiseSqrt());
    res.std_error_im.push_back((total.m2_im[i] / (nn - 1.0) / nn).cwiseSqrt());
  }
  return res;
}

/// Standard errors below this are treated as this value when forming z-scores (entries are O(1)).
inline constexpr double kStdErrorFloor = 1e-12;

struct ZScoreRow {
  double time;
  Eigen::Index i, j;
  char part;  // 'r' or 'i'
  double mean, reference, std_error, z;
};

struct Comparison {
  double max_z = 0.0;
  std::vector<ZScoreRow> table;
};

namespace detail {

inline void push_z(Comparison& out, double t, Eigen::Index i, Eigen::Index j, char part, double mean, double ref, double se) {
  const double z = std::abs(mean - ref) / std::max(se, kStdErrorFloor);
  out.table.push_back({t, i, j, part, mean, ref, se, z});
  out.max_z = std::max(out.max_z, z);
}

inline std::size_t match_time(const std::vector<double>& grid, double t) {
  const double scale = std::max(std::abs(grid.back()), std::abs(t));
  const auto it = std::lower_bound(grid.begin(), grid.end(), t - 1e-9 * scale);
  if (it == grid.end() || std::abs(*it - t) > 1e-9 * scale)
    throw DimensionMismatch(fmt::format("time-grid mismatch: no reference state at t = {:.6e} s", t));
  return static_cast<std::size_t>(it - grid.begin());
}

}  // namespace detail

/// z = |mean - master| / std_error for every time, entry, and real/imaginary part.
/// Every ensemble time must appear in the trajectory's grid.
inline Comparison compare_to_master(const EnsembleResult& ens, const Trajectory& traj) {
  if (traj.size() == 0) throw DimensionMismatch("compare_to_master: empty trajectory");
  Comparison out;
  for (std::size_t a = 0; a < ens.times.size(); ++a) {
    const std::size_t b = detail::match_time(traj.times, ens.times[a]);
    const CMatrix& m = ens.mean_state[a].matrix();
    const CMatrix& r = traj.states[b].matrix();
    detail::require_same_dim(m.rows(), r.rows(), "compare_to_master");
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        detail::push_z(out, ens.times[a], i, j, 'r', m(i, j).real(), r(i, j).real(), ens.std_error_re[a](i, j));
        detail::push_z(out, ens.times[a], i, j, 'i', m(i, j).imag(), r(i, j).imag(), ens.std_error_im[a](i, j));
      }
  }
  return out;
}

/// Two-sample comparison with combined standard error sqrt(se_a^2 + se_b^2).
inline Comparison compare_ensembles(const EnsembleResult& a, const EnsembleResult& b) {
  if (a.times.size() != b.times.size()) throw DimensionMismatch("compare_ensembles: time-grid mismatch");
  Comparison out;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(std::abs(a.times[k]), std::abs(b.times[k])))
      throw DimensionMismatch("compare_ensembles: time-grid mismatch");
    const CMatrix& x = a.mean_state[k].matrix();
    const CMatrix& y = b.mean_state[k].matrix();
    detail::require_same_dim(x.rows(), y.rows(), "compare_ensembles");
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        detail::push_z(out, a.times[k], i, j, 'r', x(i, j).real(), y(i, j).real(),
                       std::hypot(a.std_error_re[k](i, j), b.std_error_re[k](i, j)));
        detail::push_z(out, a.times[k], i, j, 'i', x(i, j).imag(), y(i, j).imag(),
                       std::hypot(a.std_error_im[k](i, j), b.std_error_im[k](i, j)));
      }
  }
  return out;
}

}  // namespace decolab

#endif  // DECOLAB_STOCHASTIC_HPP
