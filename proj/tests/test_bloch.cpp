#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "nesskubo/bloch.hpp"
#include "nesskubo/kubo_conductivity.hpp"
#include "nesskubo/oracles.hpp"

using namespace nesskubo;

namespace {

constexpr double pi = std::numbers::pi;

PeriodicProblem chain(int grid) { return {1, {1}, {0.0}, {grid}}; }
PeriodicProblem dimer(double v, int grid) { return {1, {2}, {v, -v}, {grid}}; }

}  // namespace

TEST(BlochHamiltonian, SingleSiteCell) {
  const auto prob = chain(8);
  for (double k : {-2.0, 0.0, 0.4, pi}) {
    const auto h = build_bloch_hamiltonian(prob, {k});
    ASSERT_EQ(h.dim(), 1);
    EXPECT_NEAR(h(0, 0).real(), -2 * std::cos(k), 1e-15);
  }
}

TEST(BlochHamiltonian, DimerMatrixAndSpectrum) {
  const double v = 0.7;
  const auto prob = dimer(v, 8);
  for (double k : {-1.2, 0.0, 0.3, pi / 2}) {
    const auto h = build_bloch_hamiltonian(prob, {k});
    const Complex off = -(1.0 + std::exp(Complex(0, -2 * k)));
    EXPECT_NEAR(std::abs(h(0, 1) - off), 0.0, 1e-15);
    EXPECT_NEAR(h(0, 0).real(), v, 1e-15);
    EXPECT_NEAR(h(1, 1).real(), -v, 1e-15);
    const auto dec = eig_hermitian(h);
    const double e = std::sqrt(v * v + 4 * std::cos(k) * std::cos(k));
    EXPECT_NEAR(dec.eigenvalues(0), -e, 1e-14);
    EXPECT_NEAR(dec.eigenvalues(1), e, 1e-14);
    // the position gauge is unitarily equivalent
    const auto dp = eig_hermitian(HermitianOperator(bloch_matrix(prob, std::vector<double>{k}, BlochGauge::position)));
    EXPECT_LT((dp.eigenvalues - dec.eigenvalues).norm(), 1e-14);
  }
}

TEST(BlochHamiltonian, ZeroMomentumIsPeriodicCell) {
  const PeriodicProblem prob{1, {4}, {0.1, 0.2, 0.3, 0.4}, {8}};
  const auto h = build_bloch_hamiltonian(prob, {0.0});
  ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
  for (int a = 0; a < 4; ++a) {
    expected(a, a) = prob.cell_potential[static_cast<std::size_t>(a)];
    expected(a, (a + 1) % 4) = -1.0;
    expected((a + 1) % 4, a) = -1.0;
  }
  EXPECT_LT((h.matrix() - expected).norm(), 1e-15);
}

TEST(BlochHamiltonian, MomentumOutsideZoneIsWrapped) {
  const auto prob = dimer(1.0, 8);
  const auto inside = build_bloch_hamiltonian(prob, {0.3});
  const auto outside = build_bloch_hamiltonian(prob, {0.3 + pi});
  EXPECT_LT((inside.matrix() - outside.matrix()).norm(), 1e-13);
}

TEST(BlochHamiltonian, TwoDimensionalCell) {
  const PeriodicProblem prob{2, {2, 1}, {0.5, -0.5}, {4, 4}};
  const std::vector<double> k{0.2, -0.9};
  const auto dec = eig_hermitian(build_bloch_hamiltonian(prob, k));
  const double transverse = -2 * std::cos(k[1]);
  const double e = std::sqrt(0.25 + 4 * std::cos(k[0]) * std::cos(k[0]));
  EXPECT_NEAR(dec.eigenvalues(0), transverse - e, 1e-14);
  EXPECT_NEAR(dec.eigenvalues(1), transverse + e, 1e-14);
}

TEST(BandStructure, RangesAndGap) {
  const auto bs = band_structure(dimer(1.0, 256));
  EXPECT_NEAR(bs.band_min(0), -std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(bs.band_max(0), -1.0, 1e-12);
  EXPECT_NEAR(bs.band_min(1), 1.0, 1e-12);
  EXPECT_NEAR(bs.band_max(1), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(bs.margin, 2.0, 1e-12);

  const auto single = band_structure(chain(64));
  EXPECT_NEAR(single.band_min(0), -2.0, 1e-3);
  EXPECT_NEAR(single.band_max(0), 2.0, 1e-15);
}

TEST(BandStructure, SlopeAndCurvature) {
  const auto bs = band_structure(chain(32));
  for (const auto& pt : bs.points) {
    EXPECT_NEAR(pt.slope(0), 2 * std::sin(pt.k[0]), 1e-14);
    EXPECT_NEAR(pt.curvature(0), 2 * std::cos(pt.k[0]), 1e-14);
  }
  const double v = 1.0;
  const auto prob = dimer(v, 16);
  const auto db = band_structure(prob);
  for (const auto& pt : db.points) {
    const double k = pt.k[0];
    const double e = std::sqrt(v * v + 4 * std::cos(k) * std::cos(k));
    const double de = -4 * std::sin(k) * std::cos(k) / e;
    const double d2e = (-4 * std::cos(2 * k) - de * de) / e;
    EXPECT_NEAR(pt.slope(1), de, 1e-13);
    EXPECT_NEAR(pt.slope(0), -de, 1e-13);
    EXPECT_NEAR(pt.curvature(1), d2e, 1e-12);
    EXPECT_NEAR(pt.curvature(0), -d2e, 1e-12);
  }
}

TEST(BandStructure, PerturbativeSlopeMatchesDifferences) {
  const PeriodicProblem prob{1, {3}, {0.4, -0.1, 0.8}, {8}};
  const double k = 0.37;
  const auto pt = solve_band_point(prob, {k});
  std::vector<double> errs;
  for (double h : {1e-2, 5e-3}) {
    const auto plus = solve_band_point(prob, {k + h});
    const auto minus = solve_band_point(prob, {k - h});
    double err = 0.0;
    for (int n = 0; n < 3; ++n)
      err = std::max(err, std::abs((plus.energies(n) - minus.energies(n)) / (2 * h) - pt.slope(n)));
    errs.push_back(err);
  }
  EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.1);
  EXPECT_LT(errs[1], 1e-4);
}

TEST(BandStructure, DegenerateDimerIsRefused) {
  const auto bs = band_structure(dimer(0.0, 64));
  EXPECT_LT(bs.margin, 1e-8);
  EXPECT_THROW(conductivity_bloch_exact(bs, kInfinity, 0.5, 0.1), AssumptionViolated);
  EXPECT_THROW(off_diagonal_projector_form(bs, kInfinity, 0.5, 0.1), AssumptionViolated);
}

TEST(BlochConductivity, FreeChainReducesToMomentumForm) {
  const auto bs = band_structure(chain(4096));
  const ThermoParams warm{10.0, 0.0, 0.5, 0.0};
  const auto exact = conductivity_bloch_exact(bs, warm.beta, warm.mu, warm.lambda);
  EXPECT_NEAR(exact.total, solvable_conductivity(warm, Dispersion::lattice_chain()), 1e-10);
  EXPECT_EQ(exact.off_diagonal, 0.0);
  const auto cold = conductivity_bloch_exact(bs, kInfinity, 0.0, 0.5);
  EXPECT_NEAR(2 * 0.5 * cold.total, 2 / pi, 1e-6);
  EXPECT_EQ(conductivity_bloch_exact(bs, kInfinity, -3.0, 0.5).total, 0.0);
}

TEST(BlochConductivity, OffDiagonalAgreesWithProjectorForm) {
  const auto bs = band_structure(PeriodicProblem{1, {3}, {0.5, -0.4, 0.2}, {256}});
  for (double beta : {2.0, kInfinity})
    for (double mu : {-1.0, 0.3, 1.4}) {
      const auto exact = conductivity_bloch_exact(bs, beta, mu, 0.15);
      EXPECT_NEAR(exact.off_diagonal, off_diagonal_projector_form(bs, beta, mu, 0.15), 1e-12);
      EXPECT_LE(std::abs(exact.off_diagonal), exact.off_diagonal_bound);
    }
}

TEST(BlochConductivity, MatchesRealSpaceCellAverage) {
  const double v = 1.0;
  const ThermoParams p{20.0, 1.8, 0.3, 0.0};
  const auto bloch = conductivity_bloch_exact(band_structure(dimer(v, 1024)), p.beta, p.mu, p.lambda);
  const LatticeSpec lat{1, 150, Boundary::open};
  const PotentialSpec pot = PeriodicPotential{{2}, {v, -v}};
  const double avg = 0.5 * (kubo_conductivity(lat, pot, p, Site{0}) + kubo_conductivity(lat, pot, p, Site{1}));
  EXPECT_NEAR(avg / bloch.total, 1.0, 1e-3);
}

TEST(BlochConductivity, GridConvergence) {
  const auto prob_a = dimer(1.0, 256);
  auto prob_b = prob_a;
  prob_b.k_grid = {512};
  const double a = conductivity_bloch_exact(band_structure(prob_a), 5.0, 1.6, 0.2).total;
  const double b = conductivity_bloch_exact(band_structure(prob_b), 5.0, 1.6, 0.2).total;
  EXPECT_NEAR(a, b, 1e-10 * std::abs(b));
}

TEST(BlochConductivity, LeadingTermDifferenceIsLinearInDamping) {
  const auto bs = band_structure(dimer(1.0, 4096));
  std::vector<double> c;
  for (double lambda : {0.2, 0.1, 0.05}) {
    const double diff = conductivity_bloch_exact(bs, kInfinity, 1.8, lambda).total -
                        conductivity_bloch_leading(bs, kInfinity, 1.8, lambda);
    c.push_back(diff / lambda);
  }
  EXPECT_NEAR(c[1] / c[0], 1.0, 0.2);
  EXPECT_NEAR(c[2] / c[0], 1.0, 0.2);
}

TEST(BlochConductivity, InsulatorLeadingTermVanishes) {
  const auto bs = band_structure(dimer(1.0, 512));
  EXPECT_EQ(conductivity_bloch_leading(bs, kInfinity, 0.0, 0.1), 0.0);
  const auto exact = conductivity_bloch_exact(bs, kInfinity, 0.0, 0.1);
  EXPECT_EQ(exact.diagonal, 0.0);
  EXPECT_GT(exact.total, 0.0);
  EXPECT_LE(exact.total, exact.off_diagonal_bound);
}

TEST(BlochConductivity, LeadingNeedsFourPoints) {
  const auto bs = band_structure(chain(3));
  EXPECT_THROW(conductivity_bloch_leading(bs, 1.0, 0.0, 0.5), ParameterError);
}

TEST(BlochConductivity, DifferenceCurvatureMatchesPerturbation) {
  const auto bs = band_structure(dimer(0.8, 512));
  const auto curv = curvature_by_differences(bs);
  const double dk = bs.problem.grid_spacing(0);
  for (std::size_t j = 0; j < bs.points.size(); j += 37)
    for (int n = 0; n < 2; ++n)
      EXPECT_NEAR(curv[j][static_cast<std::size_t>(n)], bs.points[j].curvature(n), 5 * dk * dk * 10);
}

TEST(FermiSurface, HalfFilledChain) {
  const auto bs = band_structure(chain(4096));
  const auto fs = fermi_surface_conductivity(bs, 0.0, 0.5);
  ASSERT_EQ(fs.crossings.size(), 2u);
  for (const auto& c : fs.crossings) EXPECT_NEAR(std::abs(c.k[0]), pi / 2, 1e-12);
  EXPECT_NEAR(fs.conductivity, conductivity_bloch_leading(bs, kInfinity, 0.0, 0.5), 1e-6);
  EXPECT_NEAR(2 * 0.5 * fs.conductivity, 2 / pi, 1e-12);
}

TEST(FermiSurface, GapIsEmpty) {
  const auto fs = fermi_surface_conductivity(band_structure(dimer(1.0, 128)), 0.0, 0.2);
  EXPECT_TRUE(fs.crossings.empty());
  EXPECT_EQ(fs.conductivity, 0.0);
}

TEST(FermiSurface, DimerUpperBand) {
  const auto bs = band_structure(dimer(1.0, 2048));
  const auto fs = fermi_surface_conductivity(bs, 1.8, 0.1);
  ASSERT_EQ(fs.crossings.size(), 2u);  // |k| = arccos(0.748...) inside (-pi/2, pi/2]
  EXPECT_NEAR(std::abs(fs.crossings[0].k[0]), std::acos(std::sqrt(0.56)), 1e-12);
  EXPECT_NEAR(fs.conductivity, conductivity_bloch_leading(bs, kInfinity, 1.8, 0.1), 1e-5);
}

TEST(FermiSurface, ReflectionInvariant) {
  // an off-centre grid shift breaks the k -> -k symmetry of the samples
  const auto bs = band_structure(PeriodicProblem{1, {3}, {0.3, -0.6, 0.1}, {97}});
  const auto fs = fermi_surface_conductivity(bs, -0.4, 0.2);
  double left = 0.0, right = 0.0;
  for (const auto& c : fs.crossings) (c.k[0] < 0 ? left : right) += c.slope * c.normal;
  EXPECT_NEAR(left, right, 1e-10);
}

TEST(FermiSurface, SquareLatticeMatchesLeadingTerm) {
  const PeriodicProblem prob{2, {1, 1}, {0.0}, {256, 256}};
  const auto bs = band_structure(prob);
  for (double mu : {-1.0, 0.5}) {
    const double fs = fermi_surface_conductivity(bs, mu, 0.5).conductivity;
    const double lead = conductivity_bloch_leading(bs, kInfinity, mu, 0.5);
    EXPECT_NEAR(fs / lead, 1.0, 1e-3) << "mu " << mu;
  }
}

TEST(FermiSurface, ThreeDimensionsUnsupported) {
  const auto bs = band_structure(PeriodicProblem{3, {1, 1, 1}, {0.0}, {4, 4, 4}});
  EXPECT_THROW(fermi_surface_conductivity(bs, 0.0, 0.5), UnsupportedOperation);
  EXPECT_NO_THROW(conductivity_bloch_leading(bs, kInfinity, 0.0, 0.5));
}

TEST(GapCheck, Examples) {
  const auto d = band_structure(dimer(1.0, 256));
  const auto gap = gap_check(d, 0.0);
  EXPECT_EQ(gap.phase, Phase::insulator);
  EXPECT_NEAR(gap.gap_width, 2.0, 1e-12);
  EXPECT_EQ(gap.bands_below, 1);
  EXPECT_EQ(gap_check(band_structure(chain(64)), 0.0).phase, Phase::metal);
  const auto below = gap_check(d, -10.0);
  EXPECT_EQ(below.phase, Phase::insulator);
  EXPECT_EQ(below.bands_below, 0);
  EXPECT_TRUE(std::isinf(below.gap_width));
  EXPECT_EQ(gap_check(d, 1.8).phase, Phase::metal);
}

TEST(BandCsv, HeaderAndRows) {
  const auto bs = band_structure(PeriodicProblem{2, {2, 1}, {0.5, -0.5}, {4, 4}});
  std::ostringstream os;
  write_band_csv(os, bs);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "k_1,k_2,n,eps,d_eps,d2_eps");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 16 * 2);
}

TEST(PeriodicProblem, Validation) {
  EXPECT_THROW((PeriodicProblem{1, {2}, {1.0}, {8}}.validate()), ParameterError);
  EXPECT_THROW((PeriodicProblem{1, {1}, {0.0}, {1}}.validate()), ParameterError);
  EXPECT_THROW((PeriodicProblem{2, {1}, {0.0}, {8}}.validate()), ParameterError);
  const auto p = dimer(1.0, 8);
  EXPECT_NEAR(p.grid_point(7)[0], pi / 2, 1e-15);
  EXPECT_NEAR(p.grid_point(0)[0], -pi / 2 + pi / 8, 1e-15);
  EXPECT_DOUBLE_EQ(p.measure_factor(), 0.5);
}
