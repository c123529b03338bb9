#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "decolab/kernels.hpp"
#include "generators.hpp"

using namespace decolab;
using Catch::Approx;

namespace {

const UnitsContext kUnits{};
const double kScale = kUnits.G * kUnits.hbar / std::pow(kUnits.c, 4);

// erf(x) = 2/sqrt(pi) int_0^x exp(-u^2) du, evaluated by adaptive quadrature.
double erf_by_quadrature(double x) {
  auto f = [](double u) { return std::exp(-u * u); };
  return 2.0 / std::sqrt(std::numbers::pi) * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, x, 10, 1e-14);
}

}  // namespace

TEST_CASE("CellGrid", "[kernels]") {
  const auto g = CellGrid::cubic(Vec3(1.0, 2.0, 3.0), 0.5, {2, 3, 4});
  CHECK(g.n_cells() == 24);
  CHECK(g.cell_volume() == Approx(0.125));
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    const auto c = g.unflatten(i);
    CHECK(g.flatten(c[0], c[1], c[2]) == i);
  }
  CHECK((g.center(0) - Vec3(1.25, 2.25, 3.25)).norm() < 1e-15);
  CHECK_THROWS_AS(CellGrid::cubic(Vec3::Zero(), 0.0, {1, 1, 1}), GridError);
  CHECK_THROWS_AS(CellGrid::cubic(Vec3::Zero(), 1.0, {0, 1, 1}), GridError);
  CHECK_THROWS_AS(CellGrid::cubic(Vec3::Zero(), 1.0, {33, 33, 33}), GridError);
  CHECK_NOTHROW(CellGrid::cubic(Vec3::Zero(), 1.0, {32, 32, 32}));
  CHECK_NOTHROW(CellGrid::cubic(Vec3::Zero(), 1.0, {40, 40, 40}, 64000));
}

TEST_CASE("smeared Coulomb kernel", "[kernels]") {
  const double sigma = 1e-7;
  SECTION("series branch matches the quadrature oracle") {
    for (double d : {0.0, 1e-13, 1e-12, 2e-11, 1.99e-11}) {
      const double x = d / (2 * sigma);
      const double oracle = d == 0.0 ? 1.0 / (sigma * std::sqrt(std::numbers::pi)) : erf_by_quadrature(x) / d;
      CHECK(smeared_coulomb(d, sigma) == Approx(oracle).epsilon(1e-13));
    }
  }
  SECTION("closed form branch") {
    for (double d : {1e-10, 1e-8, 1e-7, 5e-7, 1e-5}) {
      CHECK(smeared_coulomb(d, sigma) == Approx(erf_by_quadrature(d / (2 * sigma)) / d).epsilon(1e-13));
    }
  }
  SECTION("continuous across the series switch") {
    const double d0 = 2e-4 * sigma;
    CHECK(smeared_coulomb(d0 * (1 - 1e-9), sigma) == Approx(smeared_coulomb(d0 * (1 + 1e-9), sigma)).epsilon(1e-12));
  }
  SECTION("far field is 1/d") {
    CHECK(smeared_coulomb(20 * sigma, sigma) * 20 * sigma == Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("global_kernel", "[kernels]") {
  const auto k1 = global_kernel(1, kUnits.tau_planck);
  CHECK(k1.n_cells() == 1);
  CHECK(k1(0, 0) == kUnits.tau_planck);
  const auto k3 = global_kernel(3, 2.0);
  CHECK(k3.matrix() == RMatrix::Constant(3, 3, 2.0));
  CHECK(k3.variant() == KernelVariant::Global);
  CHECK(validate_psd(global_kernel(3, 1.0)) == Approx(0.0).margin(1e-14));
  CHECK(global_kernel(4, 0.0).matrix().isZero());
  CHECK_THROWS_AS(global_kernel(3, -1.0), DomainError);
  CHECK_THROWS_AS(global_kernel(0, 1.0), DomainError);
}

TEST_CASE("diagonal kernel and validate_psd", "[kernels]") {
  CHECK(validate_psd(diagonal_kernel({3.0, 3.0, 3.0})) == Approx(3.0));
  CHECK_THROWS_AS(diagonal_kernel({1.0, -1.0}), DomainError);
  RMatrix asym(2, 2);
  asym << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(validate_psd(asym), DomainError);
  RMatrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK(validate_psd(indefinite) == Approx(-1.0));
  CHECK_THROWS_AS(CorrelationKernel(indefinite, KernelVariant::Custom), NotPositiveSemidefinite);
}

TEST_CASE("newtonian_kernel", "[kernels]") {
  const NewtonianNoiseSpec spec{};
  CHECK(spec.sigma == 1e-7);
  CHECK(spec.prefactor == 1.0);

  SECTION("far separated cells: off-diagonal approaches G hbar c^-4 / d") {
    const double d = 1e-5;  // 100 sigma
    const auto g = CellGrid::line(2, d);
    const auto k = newtonian_kernel(g, spec, kUnits);
    CHECK(k(0, 1) == Approx(kScale / d).epsilon(1e-12));
    CHECK(k(0, 0) == Approx(kScale / (spec.sigma * std::sqrt(std::numbers::pi))).epsilon(1e-14));
  }
  SECTION("diagonal entry as the numerical limit d -> 0") {
    const auto g = CellGrid::line(2, 1e-12);
    const auto k = newtonian_kernel(g, spec, kUnits);
    CHECK(k(0, 1) == Approx(k(0, 0)).epsilon(1e-9));
  }
  SECTION("8-cell line is PSD") {
    const auto k = newtonian_kernel(CellGrid::line(8, 1e-7), spec, kUnits);
    const auto [lmin, lmax] = detail::kernel_extremes(k.matrix());
    CHECK(lmin >= -1e-10 * lmax);
    CHECK(k.variant() == KernelVariant::Newtonian);
  }
  SECTION("translation of the grid leaves the kernel unchanged") {
    const auto a = newtonian_kernel(CellGrid::cubic(Vec3::Zero(), 5e-8, {3, 2, 2}), spec, kUnits);
    const auto b = newtonian_kernel(CellGrid::cubic(Vec3(1e-3, -2e-3, 7e-4), 5e-8, {3, 2, 2}), spec, kUnits);
    CHECK(max_abs(RMatrix(a.matrix() - b.matrix())) <= 1e-12 * max_abs(a.matrix()));
  }
  SECTION("prefactor scales linearly") {
    const auto g = CellGrid::line(4, 1e-7);
    const auto a = newtonian_kernel(g, spec, kUnits);
    const auto b = newtonian_kernel(g, NewtonianNoiseSpec{1e-7, 3.0}, kUnits);
    CHECK(max_abs(RMatrix(b.matrix() - 3.0 * a.matrix())) <= 1e-15 * max_abs(b.matrix()));
  }
  SECTION("cell cap") {
    CHECK_THROWS_AS(newtonian_kernel(CellGrid::cubic(Vec3::Zero(), 1e-7, {13, 13, 13}), spec, kUnits), GridError);
    CHECK_THROWS_AS(newtonian_kernel(CellGrid::line(8, 1e-7), NewtonianNoiseSpec{0.0, 1.0}, kUnits), DomainError);
  }
}

TEST_CASE("newtonian kernel entries are non-increasing in separation", "[kernels][property]") {
  testing::Rng rng(3);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng) * 1e-7;
    const NewtonianNoiseSpec spec{u(rng) * 1e-7, 1.0};
    const auto g = CellGrid::cubic(Vec3::Zero(), a, {4, 3, 2});
    const auto k = newtonian_kernel(g, spec, kUnits);
    std::vector<std::pair<double, double>> pairs;
    for (Eigen::Index s = 1; s < k.n_cells(); ++s) pairs.push_back({(g.center(0) - g.center(static_cast<std::size_t>(s))).norm(), k(0, s)});
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i].second <= pairs[i - 1].second * (1 + 1e-14));
    const auto [lmin, lmax] = detail::kernel_extremes(k.matrix());
    CHECK(lmin >= -1e-10 * lmax);
  }
}

TEST_CASE("factor_for_sampling", "[kernels]") {
  SECTION("1x1") {
    RMatrix m(1, 1);
    m << 4.0;
    CHECK(factor_for_sampling(CorrelationKernel(m, KernelVariant::Custom))(0, 0) == Approx(2.0));
  }
  SECTION("diagonal") {
    const auto l = factor_for_sampling(diagonal_kernel({2.0, 9.0}));
    CHECK(l(0, 0) == Approx(std::sqrt(2.0)));
    CHECK(l(1, 1) == Approx(3.0));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == 0.0);
  }
  SECTION("global kernel is rank 1 with identical rows") {
    const double tau = 3.7e-44;
    const auto k = global_kernel(5, tau);
    const auto l = factor_for_sampling(k);
    CHECK(max_abs(RMatrix(l * l.transpose() - k.matrix())) <= 1e-10 * tau);
    // only the first column is populated, so every cell receives the same noise value
    CHECK(l.rightCols(4).isZero());
    for (Eigen::Index r = 0; r < 5; ++r) CHECK(l(r, 0) == l(0, 0));
  }
  SECTION("lower triangular") {
    const auto l = factor_for_sampling(newtonian_kernel(CellGrid::line(6, 1e-7), {}, kUnits));
    CHECK(RMatrix(l.triangularView<Eigen::StrictlyUpper>()).isZero());
  }
}

TEST_CASE("factor_for_sampling round trip", "[kernels][property]") {
  testing::Rng rng(7);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(d));
    RMatrix b(d, rank);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
    RMatrix k = b * b.transpose();
    k = 0.5 * (k + k.transpose()).eval();
    const CorrelationKernel kern(k, KernelVariant::Custom);
    const RMatrix l = factor_for_sampling(kern);
    CHECK(max_abs(RMatrix(l * l.transpose() - k)) <= 1e-10 * max_abs(k));
    CHECK(RMatrix(l.triangularView<Eigen::StrictlyUpper>()).isZero());
  }
}
