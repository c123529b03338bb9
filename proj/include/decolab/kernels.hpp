#ifndef DECOLAB_KERNELS_HPP
#define DECOLAB_KERNELS_HPP

// Time-uncertainty correlation kernels tau_rr' (units of seconds) and their sampling factors.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "decolab/core.hpp"
#include "decolab/errors.hpp"
#include "decolab/units.hpp"

namespace decolab {

using Vec3 = Eigen::Vector3d;

inline constexpr std::size_t kDefaultCellCap = 32768;

/// Regular 3-D grid of cells. Cell (i, j, k) has centre origin + (idx + 1/2) * spacing.
class CellGrid {
 public:
  CellGrid(Vec3 origin, Vec3 spacing, std::array<int, 3> dims, std::size_t cell_cap = kDefaultCellCap)
      : origin_(origin), spacing_(spacing), dims_(dims) {
    for (int ax = 0; ax < 3; ++ax) {
      if (!(spacing_(ax) > 0.0) || !std::isfinite(spacing_(ax))) throw GridError("grid spacing must be > 0");
      if (dims_[ax] < 1) throw GridError("grid dims must be >= 1 per axis");
    }
    if (n_cells() > cell_cap)
      throw GridError("grid has " + std::to_string(n_cells()) + " cells, above the cap of " + std::to_string(cell_cap));
  }

  /// Cubic grid with isotropic spacing `a`.
  static CellGrid cubic(Vec3 origin, double a, std::array<int, 3> dims, std::size_t cell_cap = kDefaultCellCap) {
    return CellGrid(origin, Vec3::Constant(a), dims, cell_cap);
  }

  /// `n` cells along x with spacing `a`.
  static CellGrid line(int n, double a, std::size_t cell_cap = kDefaultCellCap) {
    return cubic(Vec3::Zero(), a, {n, 1, 1}, cell_cap);
  }

  std::size_t n_cells() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
  }
  const Vec3& origin() const { return origin_; }
  const Vec3& spacing() const { return spacing_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double max_spacing() const { return spacing_.maxCoeff(); }
  double cell_volume() const { return spacing_.prod(); }

  std::array<int, 3> unflatten(std::size_t idx) const {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(dims_[0]));
    const std::size_t rest = idx / static_cast<std::size_t>(dims_[0]);
    const int j = static_cast<int>(rest % static_cast<std::size_t>(dims_[1]));
    const int k = static_cast<int>(rest / static_cast<std::size_t>(dims_[1]));
    return {i, j, k};
  }
  std::size_t flatten(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  Vec3 center(std::size_t idx) const {
    const auto c = unflatten(idx);
    return origin_ + Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5).cwiseProduct(spacing_);
  }
  Vec3 upper() const { return origin_ + Vec3(dims_[0], dims_[1], dims_[2]).cwiseProduct(spacing_); }

  bool same_geometry(const CellGrid& o) const {
    return dims_ == o.dims_ && origin_ == o.origin_ && spacing_ == o.spacing_;
  }

 private:
  Vec3 origin_;
  Vec3 spacing_;
  std::array<int, 3> dims_;
};

/// Gaussian-smeared Coulomb kernel K_sigma(d) = erf(d / 2 sigma) / d, with K_sigma(0) = 1 / (sigma sqrt(pi)).
inline double smeared_coulomb(double d, double sigma) {
  const double x = d / (2.0 * sigma);
  if (x < 1e-4) {
    // erf(x)/x = 2/sqrt(pi) (1 - x^2/3 + x^4/10 - ...)
    const double x2 = x * x;
    return (1.0 - x2 / 3.0 + x2 * x2 / 10.0) / (sigma * std::sqrt(std::numbers::pi));
  }
  return std::erf(x) / d;
}

enum class KernelVariant { Global, Diagonal, Newtonian, Custom };

inline const char* to_string(KernelVariant v) {
  switch (v) {
    case KernelVariant::Global: return "global";
    case KernelVariant::Diagonal: return "diagonal";
    case KernelVariant::Newtonian: return "newtonian";
    case KernelVariant::Custom: return "custom";
  }
  return "?";
}

namespace detail {

// Symmetry check plus (lambda_min, lambda_max).
inline std::pair<double, double> kernel_extremes(const RMatrix& k) {
  if (k.rows() != k.cols()) throw DimensionMismatch("kernel must be square");
  if (k.size() == 0) throw DimensionMismatch("kernel must be non-empty");
  if (!k.allFinite()) throw DomainError("kernel has non-finite entries");
  const double scale = max_abs(k);
  if (max_abs(RMatrix(k - k.transpose())) > 1e-15 * scale) throw DomainError("kernel is not symmetric");
  Eigen::SelfAdjointEigenSolver<RMatrix> es(k, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(k.rows() - 1)};
}

}  // namespace detail

/// Smallest eigenvalue of a symmetric matrix. Throws on asymmetric input.
inline double validate_psd(const RMatrix& k) { return detail::kernel_extremes(k).first; }

/// Symmetric positive-semidefinite covariance tau_rr' (s). Invariants are checked on construction.
class CorrelationKernel {
 public:
  CorrelationKernel(RMatrix m, KernelVariant v) : m_(std::move(m)), variant_(v) {
    const auto [lmin, lmax] = detail::kernel_extremes(m_);
    if (lmin < -1e-10 * std::max(lmax, 0.0))
      throw NotPositiveSemidefinite("correlation kernel has eigenvalue " + std::to_string(lmin));
  }

  Eigen::Index n_cells() const { return m_.rows(); }
  const RMatrix& matrix() const { return m_; }
  KernelVariant variant() const { return variant_; }
  double operator()(Eigen::Index r, Eigen::Index s) const { return m_(r, s); }

 private:
  RMatrix m_;
  KernelVariant variant_;
};

struct NewtonianNoiseSpec {
  double sigma = 1e-7;     // m, coarse-graining length
  double prefactor = 1.0;  // dimensionless "const"

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("smearing sigma must be > 0");
    if (!(prefactor >= 0.0) || !std::isfinite(prefactor)) throw DomainError("kernel prefactor must be >= 0");
  }
};

inline double validate_psd(const CorrelationKernel& k) { return validate_psd(k.matrix()); }

inline CorrelationKernel global_kernel(Eigen::Index n_cells, double tau) {
  if (n_cells < 1) throw DomainError("global_kernel: n_cells must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("global_kernel: tau must be >= 0");
  return CorrelationKernel(RMatrix::Constant(n_cells, n_cells, tau), KernelVariant::Global);
}

inline CorrelationKernel diagonal_kernel(const std::vector<double>& taus) {
  if (taus.empty()) throw DomainError("diagonal_kernel: need at least one cell");
  RMatrix m = RMatrix::Zero(static_cast<Eigen::Index>(taus.size()), static_cast<Eigen::Index>(taus.size()));
  for (std::size_t r = 0; r < taus.size(); ++r) {
    if (!(taus[r] >= 0.0) || !std::isfinite(taus[r])) throw DomainError("diagonal_kernel: tau must be >= 0");
    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) = taus[r];
  }
  return CorrelationKernel(std::move(m), KernelVariant::Diagonal);
}

/// Dense kernels are n_cells x n_cells and get eigen-solved, so they have their own cap.
inline constexpr std::size_t kDefaultKernelCellCap = 2048;

/// tau_rr' = const G hbar c^-4 K_sigma(|r_r - r_r'|) evaluated at cell centres.
inline CorrelationKernel newtonian_kernel(const CellGrid& grid, const NewtonianNoiseSpec& spec, const UnitsContext& units = {},
                                          std::size_t cell_cap = kDefaultKernelCellCap) {
  spec.validate();
  units.validate();
  if (grid.n_cells() > cell_cap)
    throw GridError("newtonian_kernel: " + std::to_string(grid.n_cells()) + " cells exceed the kernel cap of " +
                    std::to_string(cell_cap));
  const double scale = spec.prefactor * units.G * units.hbar / std::pow(units.c, 4);
  const auto n = static_cast<Eigen::Index>(grid.n_cells());
  RMatrix m(n, n);
  std::vector<Vec3> centers(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) centers[static_cast<std::size_t>(r)] = grid.center(static_cast<std::size_t>(r));
  for (Eigen::Index r = 0; r < n; ++r) {
    m(r, r) = scale * smeared_coulomb(0.0, spec.sigma);
    for (Eigen::Index s = r + 1; s < n; ++s) {
      const double d = (centers[static_cast<std::size_t>(r)] - centers[static_cast<std::size_t>(s)]).norm();
      m(r, s) = m(s, r) = scale * smeared_coulomb(d, spec.sigma);
    }
  }
  return CorrelationKernel(std::move(m), KernelVariant::Newtonian);
}

/// Lower-triangular L with L L^T = k. Eigenvalues within -1e-10 lambda_max are clamped to zero first;
/// zero pivots produce zero columns, so rank-deficient kernels factor exactly.
inline RMatrix factor_for_sampling(const CorrelationKernel& kernel) {
  const RMatrix& k = kernel.matrix();
  const Eigen::Index n = k.rows();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(k);
  const RVector& lam = es.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  if (lam(0) < -1e-10 * lmax) throw NotPositiveSemidefinite("factor_for_sampling: kernel is not PSD");

  RMatrix a = k;
  if (lam(0) < 0.0) {
    const RVector clamped = lam.cwiseMax(0.0);
    a = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
    a = 0.5 * (a + a.transpose()).eval();
  }

  const double drop = 1e-20 * std::max(a.diagonal().maxCoeff(), 0.0);
  RMatrix l = RMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (d <= drop) continue;  // zero column
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace decolab

#endif  // DECOLAB_KERNELS_HPP
