#ifndef DECOLAB_CORE_HPP
#define DECOLAB_CORE_HPP

// Quantum state and Hamiltonian value types plus exact unitary evolution.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "decolab/errors.hpp"
#include "decolab/units.hpp"

namespace decolab {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPositivityTol = 1e-10;
inline constexpr double kIntegratedPositivityTol = 1e-8;

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_residual(const CMatrix& m) { return max_abs(CMatrix(m - m.adjoint())); }

inline CMatrix hermitian_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

inline CMatrix commutator(const CMatrix& a, const CMatrix& b) {
  CMatrix r = a * b;
  r.noalias() -= b * a;
  return r;
}

/// A density matrix. Holds any square matrix; `validate_state` reports whether it is physical.
class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
      throw DimensionMismatch("density matrix must be square and non-empty");
  }

  static DensityMatrix pure(const CVector& psi) { return DensityMatrix(psi * psi.adjoint()); }

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  cd operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  cd trace() const { return m_.trace(); }

  /// Eigenvalues of the Hermitian part, ascending.
  RVector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m_), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

 private:
  CMatrix m_;
};

struct Violation {
  std::string invariant;  // "hermitian" | "unit_trace" | "positive_semidefinite" | "finite"
  double residual;
};

struct StateTolerances {
  double hermitian = kHermitianTol;
  double trace = kTraceTol;
  double positivity = kPositivityTol;
};

/// Empty iff all density-matrix invariants hold.
inline std::vector<Violation> validate_state(const DensityMatrix& rho, const StateTolerances& tol = {}) {
  std::vector<Violation> out;
  const CMatrix& m = rho.matrix();
  if (!m.allFinite()) {
    out.push_back({"finite", std::numeric_limits<double>::infinity()});
    return out;
  }
  if (double r = hermiticity_residual(m); r > tol.hermitian) out.push_back({"hermitian", r});
  if (double r = std::abs(m.trace() - cd(1.0)); r > tol.trace) out.push_back({"unit_trace", r});
  if (double lmin = rho.eigenvalues()(0); lmin < -tol.positivity)
    out.push_back({"positive_semidefinite", -lmin});
  return out;
}

inline std::string describe(const std::vector<Violation>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += "; ";
    s += x.invariant + " violated (residual " + std::to_string(x.residual) + ")";
  }
  return s;
}

/// Eigen-decomposition of a Hamiltonian. `basis` is empty when the Hamiltonian is diagonal.
struct Spectrum {
  RVector energies;
  CMatrix basis;

  bool diagonal() const { return basis.size() == 0; }
  Eigen::Index dim() const { return energies.size(); }

  CMatrix to_eigenbasis(const CMatrix& m) const {
    if (diagonal()) return m;
    return basis.adjoint() * m * basis;
  }
  CMatrix from_eigenbasis(const CMatrix& m) const {
    if (diagonal()) return m;
    return basis * m * basis.adjoint();
  }
};

struct DenseHamiltonian {
  CMatrix matrix;
};
struct DiagonalHamiltonian {
  std::vector<double> energies;
};

/// Dense Hermitian or diagonal Hamiltonian in joules. The spectrum is computed once on construction.
class HamiltonianSpec {
 public:
  static HamiltonianSpec dense(CMatrix h) {
    if (h.rows() == 0 || h.rows() != h.cols()) throw DimensionMismatch("Hamiltonian must be square and non-empty");
    const double scale = std::max(max_abs(h), std::numeric_limits<double>::min());
    if (hermiticity_residual(h) > kHermitianTol * scale)
      throw NotHermitian("dense Hamiltonian is not Hermitian");
    HamiltonianSpec s;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(h));
    s.spectrum_.energies = es.eigenvalues();
    s.spectrum_.basis = es.eigenvectors();
    s.repr_ = DenseHamiltonian{hermitian_part(h)};
    return s;
  }

  static HamiltonianSpec diagonal(std::vector<double> energies) {
    if (energies.empty()) throw DimensionMismatch("Hamiltonian must be non-empty");
    for (double e : energies)
      if (!std::isfinite(e)) throw DomainError("Hamiltonian eigenvalues must be finite");
    HamiltonianSpec s;
    s.spectrum_.energies = Eigen::Map<const RVector>(energies.data(), static_cast<Eigen::Index>(energies.size()));
    s.repr_ = DiagonalHamiltonian{std::move(energies)};
    return s;
  }

  Eigen::Index dim() const { return spectrum_.dim(); }
  bool is_diagonal() const { return std::holds_alternative<DiagonalHamiltonian>(repr_); }
  const Spectrum& spectrum() const { return spectrum_; }
  const std::variant<DenseHamiltonian, DiagonalHamiltonian>& repr() const { return repr_; }

  CMatrix matrix() const {
    if (const auto* d = std::get_if<DenseHamiltonian>(&repr_)) return d->matrix;
    return spectrum_.energies.cast<cd>().asDiagonal();
  }

  /// max - min eigenvalue.
  double spread() const { return spectrum_.energies.maxCoeff() - spectrum_.energies.minCoeff(); }

 private:
  HamiltonianSpec() = default;
  std::variant<DenseHamiltonian, DiagonalHamiltonian> repr_;
  Spectrum spectrum_;
};

struct SuperpositionSpec {
  std::vector<cd> amplitudes;
  std::vector<double> energies;  // J

  double delta_e(std::size_t i, std::size_t j) const { return std::abs(energies.at(i) - energies.at(j)); }
};

inline std::pair<DensityMatrix, HamiltonianSpec> make_superposition(const SuperpositionSpec& spec) {
  if (spec.amplitudes.empty() || spec.amplitudes.size() != spec.energies.size())
    throw DimensionMismatch("superposition needs one energy per amplitude");
  double norm = 0.0;
  for (const cd& c : spec.amplitudes) norm += std::norm(c);
  if (std::abs(norm - 1.0) > 1e-12)
    throw NormalizationError("amplitudes are not normalized: sum |c|^2 = " + std::to_string(norm));
  CVector psi(static_cast<Eigen::Index>(spec.amplitudes.size()));
  for (std::size_t n = 0; n < spec.amplitudes.size(); ++n) psi(static_cast<Eigen::Index>(n)) = spec.amplitudes[n];
  return {DensityMatrix::pure(psi), HamiltonianSpec::diagonal(spec.energies)};
}

namespace detail {

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) + " vs " + std::to_string(b));
}

/// Applies rho'_mn = factor(m, n) * rho_mn in the eigenbasis of `s`.
template <class Factor>
CMatrix apply_in_eigenbasis(const Spectrum& s, const CMatrix& rho, Factor&& factor) {
  CMatrix r = s.to_eigenbasis(rho);
  const Eigen::Index d = r.rows();
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index m = 0; m < d; ++m) r(m, n) *= factor(m, n);
  return s.from_eigenbasis(r);
}

/// e^{-i H t s} rho e^{+i H t s} with s = 1/hbar possibly perturbed; t may be negative.
inline CMatrix propagate(const Spectrum& s, const CMatrix& rho, double t, double inv_hbar) {
  const RVector& e = s.energies;
  return apply_in_eigenbasis(s, rho, [&](Eigen::Index m, Eigen::Index n) {
    return std::polar(1.0, -(e(m) - e(n)) * t * inv_hbar);
  });
}

}  // namespace detail

/// rho(t) = e^{-iHt/hbar} rho e^{+iHt/hbar}.
inline DensityMatrix unitary_evolve(const DensityMatrix& rho, const HamiltonianSpec& h, double t,
                                    const UnitsContext& units = {}) {
  if (!(t >= 0.0)) throw DomainError("unitary_evolve: t must be >= 0");
  detail::require_same_dim(rho.dim(), h.dim(), "unitary_evolve");
  if (t == 0.0) return rho;
  return DensityMatrix(detail::propagate(h.spectrum(), rho.matrix(), t, 1.0 / units.hbar));
}

}  // namespace decolab

#endif  // DECOLAB_CORE_HPP
