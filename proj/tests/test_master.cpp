#include <catch_amalgamated.hpp>

#include <cstring>

#include "decolab/master.hpp"
#include "generators.hpp"

using namespace decolab;
using Catch::Approx;

namespace {

const UnitsContext kUnits{};
const double kHbar = kUnits.hbar;

DensityMatrix balanced() {
  CMatrix m = CMatrix::Constant(2, 2, cd(0.5));
  return DensityMatrix(m);
}

// Reference double-commutator rhs written out with explicit products.
CMatrix reference_global(const CMatrix& h, double tau, const CMatrix& rho) {
  const CMatrix hr = h * rho - rho * h;
  const CMatrix hhr = h * hr - hr * h;
  return cd(0.0, -1.0 / kHbar) * hr - (tau / (2.0 * kHbar * kHbar)) * hhr;
}

double rel_dev(const CMatrix& a, const CMatrix& b) { return max_abs(CMatrix(a - b)) / max_abs(b); }

// Deviation of Milburn's exact rhs from its first-order form, relative to the first-order rhs.
double milburn_deviation(double x) {
  const double de = 1e-20;
  const double tau = x * kHbar / de;
  const auto h = HamiltonianSpec::diagonal({0.0, de});
  const auto rho = balanced();
  return rel_dev(rhs_milburn_exact(h, tau, rho), rhs_global(h, tau, rho));
}

}  // namespace

TEST_CASE("LocalHamiltonian", "[master]") {
  CMatrix a = CMatrix::Zero(2, 2), b = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  b(0, 1) = b(1, 0) = 2.0;
  const LocalHamiltonian lh({a, b});
  CHECK(lh.size() == 2);
  CHECK(lh.total() == a + b);
  CHECK_FALSE(lh.commuting());
  CHECK(LocalHamiltonian({a, a}).commuting());
  CMatrix nh = CMatrix::Zero(2, 2);
  nh(0, 1) = 1.0;
  CHECK_THROWS_AS(LocalHamiltonian({nh}), NotHermitian);
  CHECK_THROWS_AS(LocalHamiltonian({a, CMatrix::Zero(3, 3)}), DimensionMismatch);
  CHECK_THROWS_AS(LocalHamiltonian(std::vector<CMatrix>{}), DimensionMismatch);
}

TEST_CASE("rhs_global", "[master]") {
  const double e0 = 1e-20, e1 = 4e-20, tau = 1e-15;
  const auto h = HamiltonianSpec::diagonal({e0, e1});
  SECTION("diagonal rho gives zero") {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 0.25;
    m(1, 1) = 0.75;
    CHECK(rhs_global(h, tau, DensityMatrix(m)).isZero(0.0));
  }
  SECTION("tau = 0 is the von Neumann term") {
    const auto rho = balanced();
    const CMatrix vn = cd(0.0, -1.0 / kHbar) * commutator(h.matrix(), rho.matrix());
    CHECK(rel_dev(rhs_global(h, 0.0, rho), vn) < 1e-15);
  }
  SECTION("two-level off-diagonal closed form") {
    const auto rho = balanced();
    const double de = e0 - e1;  // rho_01 picks up exp(-i (E0 - E1) t / hbar)
    const cd expected = cd(-de * de * tau / (2 * kHbar * kHbar), -de / kHbar) * rho(0, 1);
    const CMatrix r = rhs_global(h, tau, rho);
    CHECK(std::abs(r(0, 1) - expected) <= 1e-14 * std::abs(expected));
    CHECK(std::abs(r(1, 0) - std::conj(expected)) <= 1e-14 * std::abs(expected));
    CHECK(r(0, 0) == cd(0.0));
  }
  SECTION("dense path agrees with the explicit products") {
    testing::Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      const CMatrix hm = testing::random_hermitian(rng, 4, 1e-20);
      const auto rho = testing::random_density(rng, 4);
      CHECK(rel_dev(rhs_global(HamiltonianSpec::dense(hm), tau, rho), reference_global(hm, tau, rho.matrix())) < 1e-12);
    }
  }
  SECTION("diagonal path agrees with the explicit products") {
    testing::Rng rng(2);
    const auto en = testing::random_energies(rng, 5, 1e-20);
    const auto hd = HamiltonianSpec::diagonal(en);
    const auto rho = testing::random_density(rng, 5);
    CHECK(rel_dev(rhs_global(hd, tau, rho), reference_global(hd.matrix(), tau, rho.matrix())) < 1e-12);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(rhs_global(h, -1.0, balanced()), DomainError);
    CHECK_THROWS_AS(rhs_global(HamiltonianSpec::diagonal({0.0, 1.0, 2.0}), tau, balanced()), DimensionMismatch);
  }
}

TEST_CASE("rhs_local", "[master]") {
  testing::Rng rng(4);
  SECTION("global kernel reproduces rhs_global on the total Hamiltonian") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<CMatrix> parts;
      for (int r = 0; r < 3; ++r) parts.push_back(testing::random_hermitian(rng, 3, 1e-21));
      const LocalHamiltonian lh(parts);
      const double tau = 2e-14;
      const auto rho = testing::random_density(rng, 3);
      const CMatrix a = rhs_local(lh, global_kernel(3, tau), rho);
      const CMatrix b = rhs_global(HamiltonianSpec::dense(lh.total()), tau, rho);
      CHECK(rel_dev(a, b) < 1e-12);
    }
  }
  SECTION("zero kernel leaves the von Neumann term") {
    std::vector<CMatrix> parts{testing::random_hermitian(rng, 3, 1e-21), testing::random_hermitian(rng, 3, 1e-21)};
    const LocalHamiltonian lh(parts);
    const auto rho = testing::random_density(rng, 3);
    const CMatrix vn = cd(0.0, -1.0 / kHbar) * commutator(lh.total(), rho.matrix());
    CHECK(rel_dev(rhs_local(lh, global_kernel(2, 0.0), rho), vn) < 1e-14);
  }
  SECTION("diagonal kernel with commuting diagonal parts") {
    // two cells, each contributing a gap dE_r between basis states 0 and 1
    const double d1 = 1e-20, d2 = 3e-20, t1 = 1e-14, t2 = 4e-15;
    CMatrix h1 = CMatrix::Zero(2, 2), h2 = CMatrix::Zero(2, 2);
    h1(1, 1) = d1;
    h2(1, 1) = d2;
    const LocalHamiltonian lh({h1, h2});
    const CMatrix r = rhs_local(lh, diagonal_kernel({t1, t2}), balanced());
    const double rate = (t1 * d1 * d1 + t2 * d2 * d2) / (2 * kHbar * kHbar);
    CHECK(-(r(0, 1) / 0.5).real() == Approx(rate).epsilon(1e-13));
    CHECK((r(0, 1) / 0.5).imag() == Approx((d1 + d2) / kHbar).epsilon(1e-13));
  }
  SECTION("size mismatch") {
    const LocalHamiltonian lh({CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)});
    CHECK_THROWS_AS(rhs_local(lh, global_kernel(3, 1.0), balanced()), DimensionMismatch);
  }
}

TEST_CASE("rhs_milburn_exact", "[master]") {
  const double de = 1e-20;
  const auto h = HamiltonianSpec::diagonal({0.0, de});
  SECTION("diagonal rho gives zero") {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 0.4;
    m(1, 1) = 0.6;
    CHECK(rhs_milburn_exact(h, 1e-15, DensityMatrix(m)).isZero(0.0));
  }
  SECTION("x = pi gives the maximal decay 2 / tau") {
    const double tau = std::numbers::pi * kHbar / de;
    const CMatrix r = rhs_milburn_exact(h, tau, balanced());
    CHECK((r(0, 1) / 0.5).real() == Approx(-2.0 / tau).epsilon(1e-14));
    CHECK(std::abs((r(0, 1) / 0.5).imag()) < 1e-15 / tau);
  }
  SECTION("closed form on every entry") {
    const double tau = 0.7 * kHbar / de;
    const CMatrix r = rhs_milburn_exact(h, tau, balanced());
    const double x = (0.0 - de) * tau / kHbar;
    const cd expected = (std::exp(cd(0.0, -x)) - 1.0) / tau * 0.5;
    CHECK(std::abs(r(0, 1) - expected) < 1e-13 * std::abs(expected));
  }
  SECTION("x = 1e-3 matches the first-order form within 1e-6") {
    const double tau = 1e-3 * kHbar / de;
    const auto rho = balanced();
    const CMatrix a = rhs_milburn_exact(h, tau, rho), b = rhs_global(h, tau, rho);
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        if (i != j) CHECK(std::abs(a(i, j) - b(i, j)) <= 1e-6 * std::abs(b(i, j)));
  }
  SECTION("deviation is quadratic: halving dE reduces it 4x") {
    for (double x : {1e-1, 1e-2, 1e-3}) {
      CHECK(milburn_deviation(x) / milburn_deviation(0.5 * x) == Approx(4.0).epsilon(0.01));
    }
    CHECK(milburn_deviation(1e-2) / milburn_deviation(1e-3) == Approx(100.0).epsilon(0.01));
  }
  SECTION("dense Hamiltonian") {
    testing::Rng rng(9);
    const CMatrix hm = testing::random_hermitian(rng, 3, 1e-20);
    const auto hd = HamiltonianSpec::dense(hm);
    const auto rho = testing::random_density(rng, 3);
    const double tau = 2e-15;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hm);
    const CMatrix u = es.eigenvectors() * es.eigenvalues().unaryExpr([&](double e) { return std::polar(1.0, -e * tau / kHbar); }).asDiagonal() *
                      es.eigenvectors().adjoint();
    const CMatrix reference = (u * rho.matrix() * u.adjoint() - rho.matrix()) / tau;
    CHECK(rel_dev(rhs_milburn_exact(hd, tau, rho), reference) < 1e-10);
  }
  CHECK_THROWS_AS(rhs_milburn_exact(h, 0.0, balanced()), DomainError);
}

TEST_CASE("rhs_dp_pointer", "[master]") {
  const auto h = HamiltonianSpec::diagonal({0.0, 2e-20});
  RMatrix rates = RMatrix::Zero(2, 2);
  SECTION("zero rates is von Neumann") {
    CHECK(rel_dev(rhs_dp_pointer(rates, h, balanced()), rhs_global(h, 0.0, balanced())) < 1e-15);
  }
  SECTION("dephasing only touches coherences") {
    rates(0, 1) = rates(1, 0) = 3e5;
    const CMatrix r = rhs_dp_pointer(rates, HamiltonianSpec::diagonal({1.0, 1.0}), balanced());
    CHECK(r(0, 0) == cd(0.0));
    CHECK(r(0, 1) == cd(-1.5e5));
  }
  SECTION("diagonal rho stationary with degenerate H") {
    rates(0, 1) = rates(1, 0) = 1.0;
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 0.3;
    m(1, 1) = 0.7;
    CHECK(rhs_dp_pointer(rates, HamiltonianSpec::diagonal({5e-20, 5e-20}), DensityMatrix(m)).isZero(0.0));
  }
  SECTION("invalid rates") {
    rates(0, 1) = rates(1, 0) = -1.0;
    CHECK_THROWS_AS(rhs_dp_pointer(rates, h, balanced()), DomainError);
    rates(0, 1) = 1.0;
    rates(1, 0) = 2.0;
    CHECK_THROWS_AS(rhs_dp_pointer(rates, h, balanced()), DomainError);
    RMatrix diag = RMatrix::Identity(2, 2);
    CHECK_THROWS_AS(rhs_dp_pointer(diag, h, balanced()), DomainError);
  }
  SECTION("non-diagonal pointer Hamiltonian rejected") {
    CMatrix hm = CMatrix::Zero(2, 2);
    hm(0, 1) = hm(1, 0) = 1e-20;
    CHECK_THROWS_AS(rhs_dp_pointer(rates, HamiltonianSpec::dense(hm), balanced()), DomainError);
  }
}

TEST_CASE("Adler rhs is byte-identical to the global double commutator", "[master]") {
  testing::Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = trial % 2 ? HamiltonianSpec::dense(testing::random_hermitian(rng, 4, 1e-20))
                             : HamiltonianSpec::diagonal(testing::random_energies(rng, 4, 1e-20));
    const auto rho = testing::random_density(rng, 4);
    const CMatrix a = rhs(AdlerEffective{h, 3e-15}, rho);
    const CMatrix b = rhs(GlobalDoubleCommutator{h, 3e-15}, rho);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(cd) * static_cast<std::size_t>(a.size())) == 0);
  }
}

TEST_CASE("integrate", "[master]") {
  const double de = 1e-20;
  const auto h = HamiltonianSpec::diagonal({0.0, de});
  const auto rho0 = balanced();

  SECTION("tau = 0 matches unitary_evolve") {
    const double tf = 50 * kHbar / de;
    const EvolutionModel m = GlobalDoubleCommutator{h, 0.0};
    const auto traj = integrate(m, rho0, tf, recommended_steps(m, tf));
    for (std::size_t k = 0; k < traj.size(); ++k)
      CHECK(max_abs(CMatrix(traj.states[k].matrix() - unitary_evolve(rho0, h, traj.times[k]).matrix())) < 1e-8);
  }
  SECTION("two-level global dephasing over 5 decay times") {
    const double tau = 0.2 * kHbar / de;
    const double gamma = tau * de * de / (2 * kHbar * kHbar);
    const double tf = 5.0 / gamma;
    const EvolutionModel m = GlobalDoubleCommutator{h, tau};
    const auto traj = integrate(m, rho0, tf, recommended_steps(m, tf));
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double exact = 0.5 * std::exp(-gamma * traj.times[k]);
      worst = std::max(worst, std::abs(std::abs(traj.states[k](0, 1)) - exact) / exact);
    }
    CHECK(worst < 1e-6);
    const auto fit = fit_offdiag_decay(traj, 0, 1);
    CHECK(fit.rate == Approx(gamma).epsilon(1e-6));
  }
  SECTION("Milburn exact at x = pi/2 decays as exp(-t / tau)") {
    const double tau = 0.5 * std::numbers::pi * kHbar / de;
    const double tf = 5 * tau;
    const EvolutionModel m = MilburnExact{h, tau};
    const auto traj = integrate(m, rho0, tf, recommended_steps(m, tf));
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double exact = 0.5 * std::exp(-traj.times[k] / tau);
      CHECK(std::abs(std::abs(traj.states[k](0, 1)) - exact) <= 1e-6 * exact);
    }
  }
  SECTION("times strictly increasing, storage stride") {
    const EvolutionModel m = GlobalDoubleCommutator{h, 0.0};
    const auto traj = integrate(m, rho0, 1e-13, 1000, kUnits, {.store_every = 7});
    CHECK(traj.size() == 1 + 142 + 1);
    for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    CHECK(traj.times.back() == Approx(1e-13));
  }
  SECTION("step size too large aborts on trace drift") {
    // one step across a thousand decay times blows the state up
    const EvolutionModel m = GlobalDoubleCommutator{h, 1e3 * kHbar / de};
    CHECK_THROWS_AS(integrate(m, rho0, 1e3 * kHbar / de, 1), IntegrationError);
  }
  SECTION("invalid input") {
    const EvolutionModel m = GlobalDoubleCommutator{h, 0.0};
    CHECK_THROWS_AS(integrate(m, rho0, 1.0, 0), DomainError);
    CHECK_THROWS_AS(integrate(m, rho0, -1.0, 1), DomainError);
    CMatrix bad = CMatrix::Zero(2, 2);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(integrate(m, DensityMatrix(bad), 1.0, 1), DomainError);
  }
}

TEST_CASE("decoherence_time", "[master]") {
  const double tpl = kUnits.tau_planck;
  // independent arithmetic: hbar^2 / (tau_pl dE^2)
  const double ev = 1.602e-19, hbar = 1.0546e-34;
  struct Row {
    double de, expected_rounded;
  };
  for (const Row& r : {Row{ev, 8.0e12}, Row{1e9 * ev, 8.0e-6}, Row{1.0, 2.1e-25}}) {
    const double arith = hbar * hbar / (5.391e-44 * r.de * r.de);
    const double t = decoherence_time(r.de, tpl, DecoherenceConvention::Tabulated);
    CHECK(t == Approx(arith).epsilon(1e-12));
    CHECK(std::abs(t - r.expected_rounded) <= 0.05 * r.expected_rounded);  // two-significant-figure rounding
    CHECK(decoherence_time(r.de, tpl, DecoherenceConvention::InverseRate) == Approx(2 * arith).epsilon(1e-12));
  }
  CHECK(std::round(std::log10(decoherence_time(ev, tpl, DecoherenceConvention::Tabulated))) == 13);
  CHECK(std::round(std::log10(decoherence_time(1e9 * ev, tpl, DecoherenceConvention::Tabulated))) == -5);
  CHECK(std::round(std::log10(decoherence_time(1.0, tpl, DecoherenceConvention::Tabulated))) == -25);
  CHECK_THROWS_AS(decoherence_time(0.0, tpl, DecoherenceConvention::Tabulated), DomainError);
  CHECK_THROWS_AS(decoherence_time(1.0, -1.0, DecoherenceConvention::Tabulated), DomainError);
}

TEST_CASE("fit_offdiag_decay", "[master]") {
  const double e0 = 1e-20, e1 = 3e-20;
  const auto h = HamiltonianSpec::diagonal({e0, e1});
  const auto rho0 = balanced();
  SECTION("unitary trajectory") {
    const double tf = 40 * kHbar / (e1 - e0);
    const EvolutionModel m = GlobalDoubleCommutator{h, 0.0};
    const auto fit = fit_offdiag_decay(integrate(m, rho0, tf, recommended_steps(m, tf)), 0, 1);
    CHECK(std::abs(fit.rate) * kHbar / (e1 - e0) < 1e-10);
    CHECK(fit.phase_rate == Approx(-(e0 - e1) / kHbar).epsilon(1e-8));
  }
  SECTION("pointer model") {
    RMatrix rates = RMatrix::Zero(2, 2);
    rates(0, 1) = rates(1, 0) = 1.7e3;
    const EvolutionModel m = DiosiPenrosePointer{rates, HamiltonianSpec::diagonal({0.0, 0.0})};
    const auto fit = fit_offdiag_decay(integrate(m, rho0, 5.0 / 1.7e3, 1000), 0, 1);
    CHECK(fit.rate == Approx(1.7e3).epsilon(1e-6));
    CHECK(fit.residual < 1e-9);
  }
  SECTION("errors") {
    const auto traj = integrate(GlobalDoubleCommutator{h, 0.0}, rho0, 1e-14, 10);
    CHECK_THROWS_AS(fit_offdiag_decay(traj, 0, 0), DomainError);
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    CHECK_THROWS_AS(fit_offdiag_decay(integrate(GlobalDoubleCommutator{h, 0.0}, DensityMatrix(m), 1e-14, 10), 0, 1), DomainError);
  }
}

namespace {

// One random model of each variant, with time scales tied to hbar / |H|.
EvolutionModel random_model(testing::Rng& rng, int variant, Eigen::Index d) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const double e = 1e-20;
  const double tau = u(rng) * kHbar / e;
  auto ham = [&] {
    return rng() % 2 ? HamiltonianSpec::dense(testing::random_hermitian(rng, d, e))
                     : HamiltonianSpec::diagonal(testing::random_energies(rng, d, e));
  };
  switch (variant) {
    case 0: return GlobalDoubleCommutator{ham(), tau};
    case 1: {
      const int n = 1 + static_cast<int>(rng() % 4);
      std::vector<CMatrix> parts;
      for (int r = 0; r < n; ++r) parts.push_back(testing::random_hermitian(rng, d, e));
      RMatrix b = testing::random_complex(rng, n, n).real();
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
        for (Eigen::Index j = i + 1; j < d; ++j) rates(i, j) = rates(j, i) = u(rng) * e / kHbar;
      return DiosiPenrosePointer{rates, HamiltonianSpec::diagonal(testing::random_energies(rng, d, e))};
    }
  }
}

}  // namespace

TEST_CASE("every rhs is traceless and Hermitian", "[master][property]") {
  testing::Rng rng(31);
  for (int variant = 0; variant < 6; ++variant) {
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 5);
      const auto model = random_model(rng, variant, d);
      const auto rho = testing::random_density(rng, d);
      const CMatrix r = rhs(model, rho);
      const double scale = max_abs(r);
      INFO(describe(model));
      CHECK(std::abs(r.trace()) <= 1e-12 * scale);
      CHECK(hermiticity_residual(r) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("local master equation keeps states positive over 10 decay times", "[master][property]") {
  testing::Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 3);
    const auto model = random_model(rng, 1, d);
    const auto rho = rng() % 2 ? testing::random_pure(rng, d) : testing::random_density(rng, d);
    const double h = max_step(model);
    // fastest dissipative time is <= 100 h; run 10 of those
    const double gamma_bound = 1.0 / (100.0 * h);
    const double tf = 10.0 / gamma_bound;
    const auto traj = integrate(model, rho, tf, recommended_steps(model, tf), kUnits, {.store_every = 10});
    for (const auto& s : traj.states) CHECK(s.eigenvalues()(0) >= -1e-8);
  }
}

TEST_CASE("energy-basis populations are stationary under the energy dissipators", "[master][property]") {
  testing::Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 5);
    const int variant = std::array{0, 2, 4}[static_cast<std::size_t>(trial % 3)];
    const auto model = random_model(rng, variant, d);
    const HamiltonianSpec& h = std::visit(
        [](const auto& m) -> const HamiltonianSpec& {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, AdlerEffective>) return m.h_eff;
          else if constexpr (std::is_same_v<T, GlobalDoubleCommutator> || std::is_same_v<T, MilburnExact>) return m.h;
          else throw std::logic_error("unexpected variant");
        },
        model);
    const auto rho = testing::random_density(rng, d);
    const CMatrix r = h.spectrum().to_eigenbasis(rhs(model, rho));
    const double scale = max_abs(r);
    for (Eigen::Index n = 0; n < d; ++n) CHECK(std::abs(r(n, n)) <= 1e-12 * scale);
  }
}

TEST_CASE("energy expectation is conserved by the global and Milburn equations", "[master][property]") {
  testing::Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const int variant = trial % 2 ? 2 : 0;
    const auto model = random_model(rng, variant, 3);
    const HamiltonianSpec h = variant == 0 ? std::get<GlobalDoubleCommutator>(model).h : std::get<MilburnExact>(model).h;
    const auto rho = testing::random_density(rng, 3);
    const double tf = 2000 * max_step(model);
    const auto traj = integrate(model, rho, tf, 2000, kUnits, {.store_every = 100});
    const CMatrix hm = h.matrix();
    const double e0 = (hm * rho.matrix()).trace().real();
    const double escale = h.spectrum().energies.cwiseAbs().maxCoeff();
    for (const auto& s : traj.states) CHECK(std::abs((hm * s.matrix()).trace().real() - e0) <= 1e-8 * escale);
  }
}
