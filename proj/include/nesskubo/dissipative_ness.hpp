#ifndef NESSKUBO_DISSIPATIVE_NESS_HPP
#define NESSKUBO_DISSIPATIVE_NESS_HPP

// Covariance-matrix description of the damped one-particle dynamics
//
//   dR/dt = -i[h_E, R] - 2 lambda (R - F),     F = f_{beta,mu}(h),
//
// whose stationary point is the non-equilibrium steady state
//
//   R = 2 lambda \int_0^\infty e^{-2 lambda s} e^{-i s h_E} F e^{i s h_E} ds.
//
// Both the finite-time solution and the stationary state are evaluated in
// closed form in the eigenbasis of h_E: an oscillating mode with frequency
// e_a - e_b integrated against the exponential weight gives the resolvent
// factor 1 / (2 lambda + i (e_a - e_b)).
//
// Convention: omega(a*_x a_y) = <eta_y, R eta_x> = R(y, x).

#include <algorithm>
#include <span>

#include "nesskubo/spectral.hpp"

namespace nesskubo {

inline constexpr double kCovarianceTolerance = 1e-10;

/// Two-point function of a quasi-free state.
class CovarianceState {
 public:
  CovarianceState() = default;
  explicit CovarianceState(HermitianOperator r) : r_(std::move(r)) {}

  const HermitianOperator& covariance() const { return r_; }
  Index dim() const { return r_.dim(); }

  /// <a*_x a_x>.
  double density(Index site) const { return r_(site, site).real(); }

  /// Smallest and largest eigenvalue of R.
  std::pair<double, double> spectrum_range() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(r_.matrix(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("covariance eigensolver failed");
    const RealVector& ev = solver.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
  }

  bool within_bounds(double tolerance = kCovarianceTolerance) const {
    const auto [lo, hi] = spectrum_range();
    return lo >= -tolerance && hi <= 1.0 + tolerance;
  }

 private:
  HermitianOperator r_;
};

namespace detail {

inline void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ParameterError(concat("dissipation strength lambda must be > 0, got ", lambda));
}

/// U^H X U.
inline ComplexMatrix to_eigenbasis(const SpectralDecomposition& d, const ComplexMatrix& x) {
  return d.eigenvectors.adjoint() * x * d.eigenvectors;
}

inline ComplexMatrix from_eigenbasis(const SpectralDecomposition& d, const ComplexMatrix& x) {
  return d.eigenvectors * x * d.eigenvectors.adjoint();
}

}  // namespace detail

/// Stationary covariance for the field Hamiltonian decomposition `field`
/// and the equilibrium covariance `equilibrium` = f_{beta,mu}(h).
inline CovarianceState ness_covariance(const SpectralDecomposition& field,
                                       const HermitianOperator& equilibrium, double lambda) {
  detail::require_positive_lambda(lambda);
  if (field.dim() != equilibrium.dim()) throw ParameterError("dimension mismatch in ness_covariance");
  const RealVector& e = field.eigenvalues;
  ComplexMatrix r = detail::to_eigenbasis(field, equilibrium.matrix());
  const double rate = 2.0 * lambda;
  for (Index b = 0; b < r.cols(); ++b)
    for (Index a = 0; a < r.rows(); ++a) r(a, b) *= rate / Complex(rate, e(a) - e(b));
  return CovarianceState(HermitianOperator(detail::from_eigenbasis(field, r)));
}

/// Covariance at time t >= 0 starting from `initial`.
inline CovarianceState evolve_covariance(const CovarianceState& initial, double t,
                                         const SpectralDecomposition& field,
                                         const HermitianOperator& equilibrium, double lambda) {
  detail::require_positive_lambda(lambda);
  if (!(t >= 0.0) || !std::isfinite(t))
    throw ParameterError(detail::concat("evolution time must be >= 0, got ", t));
  if (field.dim() != equilibrium.dim() || field.dim() != initial.dim())
    throw ParameterError("dimension mismatch in evolve_covariance");
  if (t == 0.0) return initial;

  const RealVector& e = field.eigenvalues;
  const ComplexMatrix r0 = detail::to_eigenbasis(field, initial.covariance().matrix());
  const ComplexMatrix f = detail::to_eigenbasis(field, equilibrium.matrix());
  const double rate = 2.0 * lambda;
  ComplexMatrix r(r0.rows(), r0.cols());
  for (Index b = 0; b < r.cols(); ++b)
    for (Index a = 0; a < r.rows(); ++a) {
      const Complex z(rate, e(a) - e(b));
      const Complex decay = std::exp(-z * t);
      r(a, b) = decay * r0(a, b) + rate * f(a, b) * (1.0 - decay) / z;
    }
  return CovarianceState(HermitianOperator(detail::from_eigenbasis(field, r)));
}

/// Which bond combination site_current evaluates.
enum class CurrentForm {
  /// Mean of the particle flow x - e -> x and x -> x + e, oriented along +e.
  symmetrized,
  /// The four-term expression with a*_x a_{x+e} repeated. Not Hermitian, the
  /// real part is returned. Kept for diagnostics only.
  repeated_term,
};

/// Expected current through site x along `direction` (1-based).
///
/// symmetrized: Im R(x+e, x) + Im R(x, x-e), i.e. the expectation of
/// (i/2)(a*_{x+e} a_x - a*_x a_{x+e} + a*_x a_{x-e} - a*_{x-e} a_x).
inline double site_current(const CovarianceState& state, const LatticeSpec& lattice,
                           std::span<const int> x, int direction,
                           CurrentForm form = CurrentForm::symmetrized) {
  if (direction < 1 || direction > lattice.dimension)
    throw ParameterError(detail::concat("direction must be in 1..", lattice.dimension));
  if (state.dim() != lattice.site_count())
    throw ParameterError("covariance dimension does not match the lattice");
  Site fwd, bwd;
  if (!lattice.contains(x) || !lattice.shifted(x, direction - 1, +1, fwd) ||
      !lattice.shifted(x, direction - 1, -1, bwd))
    throw RangeError("site current needs both neighbours inside the box");
  const Index i = lattice.index_of(x);
  const Index ip = lattice.index_of(fwd);
  const Index im = lattice.index_of(bwd);
  const ComplexMatrix& r = state.covariance().matrix();
  switch (form) {
    case CurrentForm::symmetrized:
      return r(ip, i).imag() + r(i, im).imag();
    case CurrentForm::repeated_term:
      // (i/2)(R(x, x-e) - R(x, x+e))
      return (0.5 * kI * (r(i, im) - r(i, ip))).real();
  }
  return 0.0;
}

/// Everything needed to evaluate observables of the steady state.
struct SteadyStateSolution {
  HermitianOperator hamiltonian;
  HermitianOperator equilibrium;
  SpectralDecomposition field_spectrum;
  CovarianceState ness;
};

inline SteadyStateSolution solve_steady_state(const LatticeSpec& lattice,
                                              const PotentialSpec& potential,
                                              const ThermoParams& params, int direction = 1) {
  params.validate();
  HermitianOperator h = build_hamiltonian(lattice, potential);
  const HermitianOperator q = build_position(lattice, direction);
  HermitianOperator f = fermi_operator(eig_hermitian(h), params.beta, params.mu);
  SpectralDecomposition field = eig_hermitian(build_field_hamiltonian(h, q, params.field));
  CovarianceState ness = ness_covariance(field, f, params.lambda);
  return {std::move(h), std::move(f), std::move(field), std::move(ness)};
}

/// Current in the steady state at site x along `direction`.
inline double steady_current(const LatticeSpec& lattice, const PotentialSpec& potential,
                             const ThermoParams& params, std::span<const int> x,
                             int direction = 1) {
  const auto sol = solve_steady_state(lattice, potential, params, direction);
  return site_current(sol.ness, lattice, x, direction);
}

}  // namespace nesskubo

#endif  // NESSKUBO_DISSIPATIVE_NESS_HPP
