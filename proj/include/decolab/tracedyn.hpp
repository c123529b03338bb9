#ifndef DECOLAB_TRACEDYN_HPP
#define DECOLAB_TRACEDYN_HPP

// Classical trace dynamics of Hermitian matrix variables on an open chain,
//   L = Tr sum_r (p_r^2/2 - omega2 q_r^2/2 - lambda q_r^4 - kappa q_r q_{r+1}),
// with a kick-drift-kick integrator and the conserved charge C = sum_r [q_r, p_r].
// Dimensionless throughout (unit mass).

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "decolab/core.hpp"
#include "decolab/errors.hpp"

namespace decolab {

struct TraceModelSpec {
  int n = 4;
  int r_cells = 4;
  double omega2 = 1.0;
  double lambda = 0.0;
  double kappa = 0.0;
  /// Negative control only: adds mu Tr(A q_r^2) per site with a fixed Hermitian A. A
  /// non-scalar A breaks unitary invariance, and with it conservation of C.
  std::optional<CMatrix> matrix_coefficient;
  double mu = 1.0;

  void validate() const {
    if (n < 2) throw DomainError("trace model: n must be >= 2");
    if (r_cells < 1) throw DomainError("trace model: r_cells must be >= 1");
    if (!std::isfinite(omega2) || omega2 < 0.0) throw DomainError("trace model: omega2 must be finite and >= 0");
    if (!std::isfinite(lambda) || lambda < 0.0) throw DomainError("trace model: lambda must be finite and >= 0");
    if (!std::isfinite(kappa)) throw DomainError("trace model: kappa must be finite");
    if (!std::isfinite(mu)) throw DomainError("trace model: mu must be finite");
    if (matrix_coefficient) {
      const CMatrix& a = *matrix_coefficient;
      if (a.rows() != n || a.cols() != n) throw DimensionMismatch("trace model: matrix coefficient must be n x n");
      if (!a.allFinite()) throw DomainError("trace model: matrix coefficient not finite");
      if (hermiticity_residual(a) > 1e-12 * std::max(1.0, max_abs(a))) throw NotHermitian("trace model: matrix coefficient must be Hermitian");
    }
  }
};

struct TraceState {
  std::vector<CMatrix> q, p;
  double t = 0.0;

  static TraceState zero(const TraceModelSpec& spec) {
    TraceState s;
    s.q.assign(static_cast<std::size_t>(spec.r_cells), CMatrix::Zero(spec.n, spec.n));
    s.p = s.q;
    return s;
  }
};

inline void validate_state(const TraceModelSpec& spec, const TraceState& s) {
  const auto r = static_cast<std::size_t>(spec.r_cells);
  if (s.q.size() != r || s.p.size() != r)
    throw DimensionMismatch(fmt::format("trace state: expected {} sites, got q {} p {}", r, s.q.size(), s.p.size()));
  auto check = [&](const CMatrix& m, const char* which, std::size_t i) {
    if (m.rows() != spec.n || m.cols() != spec.n)
      throw DimensionMismatch(fmt::format("trace state: {}[{}] is {}x{}, expected {}x{}", which, i, m.rows(), m.cols(), spec.n, spec.n));
    if (!m.allFinite()) throw DomainError(fmt::format("trace state: {}[{}] not finite", which, i));
    if (hermiticity_residual(m) > 1e-12 * std::max(1.0, max_abs(m))) throw NotHermitian(fmt::format("trace state: {}[{}] not Hermitian", which, i));
  };
  for (std::size_t i = 0; i < r; ++i) {
    check(s.q[i], "q", i);
    check(s.p[i], "p", i);
  }
}

namespace detail {

inline double re_trace(const CMatrix& m) { return m.trace().real(); }

// Tr(a b) without forming the product.
inline double re_trace_product(const CMatrix& a, const CMatrix& b) { return (a.transpose().cwiseProduct(b)).sum().real(); }

}  // namespace detail

/// Tr sum_r (omega2 q_r^2/2 + lambda q_r^4 + kappa q_r q_{r+1}) [+ mu Tr(A q_r^2)].
inline double potential(const TraceModelSpec& spec, const std::vector<CMatrix>& q) {
  double v = 0.0;
  for (std::size_t r = 0; r < q.size(); ++r) {
    const CMatrix q2 = q[r] * q[r];
    v += 0.5 * spec.omega2 * detail::re_trace(q2);
    if (spec.lambda != 0.0) v += spec.lambda * detail::re_trace_product(q2, q2);
    if (spec.kappa != 0.0 && r + 1 < q.size()) v += spec.kappa * detail::re_trace_product(q[r], q[r + 1]);
    if (spec.matrix_coefficient) v += spec.mu * detail::re_trace_product(*spec.matrix_coefficient, q2);
  }
  return v;
}

inline double hamiltonian(const TraceModelSpec& spec, const TraceState& s) {
  spec.validate();
  validate_state(spec, s);
  double k = 0.0;
  for (const auto& p : s.p) k += 0.5 * detail::re_trace_product(p, p);
  return k + potential(spec, s.q);
}

namespace detail {

// -dV/dq_r with the cyclic convention dTr(q^k)/dq = k q^(k-1).
inline void forces_into(const TraceModelSpec& spec, const std::vector<CMatrix>& q, std::vector<CMatrix>& f) {
  const std::size_t r_n = q.size();
  f.resize(r_n);
  for (std::size_t r = 0; r < r_n; ++r) {
    f[r].noalias() = -spec.omega2 * q[r];
    if (spec.lambda != 0.0) {
      const CMatrix q2 = q[r] * q[r];
      f[r].noalias() -= (4.0 * spec.lambda) * (q2 * q[r]);
    }
    if (spec.kappa != 0.0) {
      if (r > 0) f[r] -= spec.kappa * q[r - 1];
      if (r + 1 < r_n) f[r] -= spec.kappa * q[r + 1];
    }
    if (spec.matrix_coefficient) {
      const CMatrix& a = *spec.matrix_coefficient;
      f[r].noalias() -= spec.mu * (a * q[r]);
      f[r].noalias() -= spec.mu * (q[r] * a);
    }
  }
}

inline void rehermitize(CMatrix& m) { m = 0.5 * (m + m.adjoint()).eval(); }

}  // namespace detail

inline std::vector<CMatrix> forces(const TraceModelSpec& spec, const TraceState& s) {
  spec.validate();
  validate_state(spec, s);
  std::vector<CMatrix> f;
  detail::forces_into(spec, s.q, f);
  return f;
}

/// Called with the state after `step` steps (step = 0 is the initial state).
using TraceObserver = std::function<void(std::size_t step, const TraceState&)>;

/// Kick-drift-kick with qdot = p. Every matrix is re-Hermitized after each step.
inline TraceState leapfrog(const TraceModelSpec& spec, TraceState s, double dt, std::size_t n_steps,
                           const TraceObserver& observer = {}, std::size_t observe_every = 0) {
  spec.validate();
  validate_state(spec, s);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("leapfrog: dt must be > 0");
  const double t0 = s.t;
  const double half = 0.5 * dt;
  std::vector<CMatrix> f;
  detail::forces_into(spec, s.q, f);
  if (observer && observe_every > 0) observer(0, s);
  for (std::size_t step = 1; step <= n_steps; ++step) {
    for (std::size_t r = 0; r < s.q.size(); ++r) {
      s.p[r] += half * f[r];
      s.q[r] += dt * s.p[r];
      detail::rehermitize(s.q[r]);
    }
    detail::forces_into(spec, s.q, f);
    bool finite = true;
    for (std::size_t r = 0; r < s.q.size(); ++r) {
      s.p[r] += half * f[r];
      detail::rehermitize(s.p[r]);
      finite = finite && s.q[r].allFinite() && s.p[r].allFinite();
    }
    s.t = t0 + static_cast<double>(step) * dt;
    if (!finite) throw IntegrationError(fmt::format("leapfrog: non-finite state at step {} (t = {:.6e})", step, s.t));
    if (observer && observe_every > 0 && (step % observe_every == 0 || step == n_steps)) observer(step, s);
  }
  return s;
}

/// [q_r, p_r] per site.
inline std::vector<CMatrix> site_commutators(const TraceState& s) {
  if (s.q.size() != s.p.size()) throw DimensionMismatch("site_commutators: q and p differ in length");
  std::vector<CMatrix> c;
  c.reserve(s.q.size());
  for (std::size_t r = 0; r < s.q.size(); ++r) {
    if (s.q[r].rows() != s.p[r].rows() || s.q[r].cols() != s.p[r].cols()) throw DimensionMismatch("site_commutators: shape mismatch");
    c.push_back(commutator(s.q[r], s.p[r]));
  }
  return c;
}

/// C = sum_r [q_r, p_r]. Anti-Hermitian; the diagonal is made purely imaginary, and the
/// trace is removed exactly so the result is traceless in floating point too.
inline CMatrix c_tilde(const TraceState& s) {
  if (s.q.empty()) throw DimensionMismatch("c_tilde: empty state");
  const auto parts = site_commutators(s);
  CMatrix c = CMatrix::Zero(parts.front().rows(), parts.front().cols());
  for (const auto& m : parts) {
    if (m.rows() != c.rows()) throw DimensionMismatch("c_tilde: sites differ in dimension");
    c += m;
  }
  c = 0.5 * (c - c.adjoint()).eval();
  const Eigen::Index n = c.rows();
  double im_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) im_sum += c(i, i).imag();
  const double shift = im_sum / static_cast<double>(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) c(i, i) = cd(0.0, c(i, i).imag() - shift);
  // last entry absorbs the rounding so the diagonal sums to zero exactly
  double rest = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) rest += c(i, i).imag();
  c(n - 1, n - 1) = cd(0.0, -rest);
  return c;
}

/// Conjugate every q_r, p_r by U.
inline TraceState conjugated(const TraceState& s, const CMatrix& u) {
  TraceState out = s;
  for (std::size_t r = 0; r < s.q.size(); ++r) {
    out.q[r] = u * s.q[r] * u.adjoint();
    out.p[r] = u * s.p[r] * u.adjoint();
    detail::rehermitize(out.q[r]);
    detail::rehermitize(out.p[r]);
  }
  return out;
}

/// exp(i eps G) for Hermitian G.
inline CMatrix unitary_from_generator(const CMatrix& g, double eps) {
  if (g.rows() != g.cols()) throw DimensionMismatch("generator must be square");
  if (hermiticity_residual(g) > 1e-12 * std::max(1.0, max_abs(g))) throw NotHermitian("generator must be Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(g));
  CVector phase(g.rows());
  for (Eigen::Index i = 0; i < g.rows(); ++i) phase(i) = std::polar(1.0, eps * es.eigenvalues()(i));
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

/// |H(U s U^dag) - H(s)| with U = exp(i eps G).
inline double unitary_invariance_residual(const TraceModelSpec& spec, const TraceState& s, const CMatrix& generator, double eps) {
  spec.validate();
  validate_state(spec, s);
  if (generator.rows() != spec.n || generator.cols() != spec.n) throw DimensionMismatch("generator must be n x n");
  if (!std::isfinite(eps)) throw DomainError("epsilon must be finite");
  if (hermiticity_residual(generator) > 1e-12 * std::max(1.0, max_abs(generator))) throw NotHermitian("generator must be Hermitian");
  // a multiple of the identity commutes with everything: the conjugation is the identity map
  const cd g0 = generator(0, 0);
  if (CMatrix(generator - g0 * CMatrix::Identity(spec.n, spec.n)).isZero(0.0)) return 0.0;
  return std::abs(hamiltonian(spec, conjugated(s, unitary_from_generator(generator, eps))) - hamiltonian(spec, s));
}


/// Random Hermitian q_r, p_r with complex Gaussian entries of standard deviation `scale`.
inline TraceState random_trace_state(const TraceModelSpec& spec, std::uint64_t seed, double scale = 1.0) {
  spec.validate();
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("random_trace_state: scale must be >= 0");
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  auto draw = [&] {
    CMatrix m(spec.n, spec.n);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = cd(nd(eng), nd(eng));
    return hermitian_part(m);
  };
  TraceState s = TraceState::zero(spec);
  for (auto& q : s.q) q = draw();
  for (auto& p : s.p) p = draw();
  return s;
}

struct TraceRow {
  double t = 0.0;
  double energy = 0.0;
  double c_drift = 0.0;                 // max |C(t) - C(0)|
  std::vector<double> site_drift;       // max |[q_r,p_r](t) - [q_r,p_r](0)| per site
};

struct ConservationReport {
  std::vector<TraceRow> rows;
  double energy0 = 0.0;
  double c0_max = 0.0;
  double max_c_drift = 0.0;
  double max_energy_drift = 0.0;  // relative to |H(0)|
  TraceState final_state;
};

/// Leapfrog run that records energy and commutator drift every `record_every` steps.
inline ConservationReport conservation_run(const TraceModelSpec& spec, const TraceState& s0, double dt, std::size_t n_steps,
                                           std::size_t record_every) {
  if (record_every == 0) throw DomainError("conservation_run: record_every must be >= 1");
  ConservationReport rep;
  rep.energy0 = hamiltonian(spec, s0);
  const CMatrix c0 = c_tilde(s0);
  const auto sites0 = site_commutators(s0);
  rep.c0_max = max_abs(c0);
  const double e_scale = rep.energy0 != 0.0 ? std::abs(rep.energy0) : 1.0;
  auto observe = [&](std::size_t, const TraceState& s) {
    TraceRow row;
    row.t = s.t;
    row.energy = hamiltonian(spec, s);
    row.c_drift = max_abs(CMatrix(c_tilde(s) - c0));
    const auto sites = site_commutators(s);
    for (std::size_t r = 0; r < sites.size(); ++r) row.site_drift.push_back(max_abs(CMatrix(sites[r] - sites0[r])));
    rep.max_c_drift = std::max(rep.max_c_drift, row.c_drift);
    rep.max_energy_drift = std::max(rep.max_energy_drift, std::abs(row.energy - rep.energy0) / e_scale);
    rep.rows.push_back(std::move(row));
  };
  rep.final_state = leapfrog(spec, s0, dt, n_steps, observe, record_every);
  return rep;
}

}  // namespace decolab

#endif  // DECOLAB_TRACEDYN_HPP
