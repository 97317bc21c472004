#ifndef NESSKUBO_KUBO_CONDUCTIVITY_HPP
#define NESSKUBO_KUBO_CONDUCTIVITY_HPP

// Site-resolved linear-response conductivity of the dissipative steady state
//
//   sigma_x = Re \int_0^\infty e^{-2 lambda s}
//                <eta_x, e^{-i s h} i[Q, F] e^{i s h} v eta_x> ds,
//
// evaluated as an exact resolvent sum in the eigenbasis of h, and the
// finite-difference derivative of the steady-state current used to check it.

#include <span>

#include "nesskubo/dissipative_ness.hpp"

namespace nesskubo {

/// sigma_x given the response operator A = i[Q, F] directly. Degenerate
/// pairs (eps_n = eps_m) contribute with the finite factor 1 / (2 lambda).
inline double conductivity_site_from_response(const SpectralDecomposition& h_spectrum,
                                              const HermitianOperator& response,
                                              const HermitianOperator& velocity, double lambda,
                                              Index site) {
  detail::require_positive_lambda(lambda);
  const Index n = h_spectrum.dim();
  if (response.dim() != n || velocity.dim() != n)
    throw ParameterError("dimension mismatch in conductivity_site");
  if (site < 0 || site >= n) throw RangeError("site index outside the operator dimension");

  const ComplexMatrix& u = h_spectrum.eigenvectors;
  const RealVector& e = h_spectrum.eigenvalues;
  const ComplexMatrix a = detail::to_eigenbasis(h_spectrum, response.matrix());
  const ComplexVector w = u.adjoint() * velocity.matrix().col(site);  // U^H v eta_x
  const ComplexVector c = u.row(site).transpose();                     // conj(U^H eta_x)
  const double rate = 2.0 * lambda;
  Complex total = 0.0;
  for (Index m = 0; m < n; ++m) {
    Complex col = 0.0;
    for (Index k = 0; k < n; ++k) col += c(k) * a(k, m) / Complex(rate, e(k) - e(m));
    total += col * w(m);
  }
  return total.real();
}

/// sigma_x with A = i[Q, F] built from the position operator.
inline double conductivity_site(const SpectralDecomposition& h_spectrum,
                                const HermitianOperator& equilibrium,
                                const HermitianOperator& position,
                                const HermitianOperator& velocity, double lambda, Index site) {
  return conductivity_site_from_response(h_spectrum, commutator_i(position, equilibrium), velocity,
                                         lambda, site);
}

/// Builds h, F, i[Q, F] and v for the lattice and evaluates sigma at site x.
/// Works on the torus too, where i[Q, .] uses minimum-image separations.
inline double kubo_conductivity(const LatticeSpec& lattice, const PotentialSpec& potential,
                                const ThermoParams& params, std::span<const int> x,
                                int direction = 1) {
  params.validate();
  const HermitianOperator h = build_hamiltonian(lattice, potential);
  const SpectralDecomposition spectrum = eig_hermitian(h);
  const HermitianOperator f = fermi_operator(spectrum, params.beta, params.mu);
  const HermitianOperator response = position_commutator(lattice, f, direction);
  const HermitianOperator velocity = lattice_velocity(lattice, h, direction);
  return conductivity_site_from_response(spectrum, response, velocity, params.lambda,
                                         lattice.index_of(x));
}

inline constexpr double kDefaultFieldStep = 1e-4;

/// (j(dE) - j(-dE)) / (2 dE); the field in `params` is ignored.
inline double conductivity_finite_difference(const LatticeSpec& lattice,
                                             const PotentialSpec& potential, ThermoParams params,
                                             std::span<const int> x,
                                             double field_step = kDefaultFieldStep,
                                             int direction = 1) {
  if (!(field_step != 0.0) || !std::isfinite(field_step))
    throw ParameterError("finite-difference field step must be nonzero and finite");
  params.validate();
  const HermitianOperator h = build_hamiltonian(lattice, potential);
  const HermitianOperator q = build_position(lattice, direction);
  const HermitianOperator f = fermi_operator(eig_hermitian(h), params.beta, params.mu);
  auto current_at = [&](double field) {
    const auto spectrum = eig_hermitian(build_field_hamiltonian(h, q, field));
    return site_current(ness_covariance(spectrum, f, params.lambda), lattice, x, direction);
  };
  return (current_at(field_step) - current_at(-field_step)) / (2.0 * field_step);
}

/// Centered differences at dE and dE/2 against a reference value. For a
/// smooth current the deviation shrinks by ~4 when the step is halved.
struct RichardsonCheck {
  double step_value = 0.0;
  double half_step_value = 0.0;
  double extrapolated = 0.0;  ///< (4 half - full) / 3
  double deviation_ratio = 0.0;  ///< |full - ref| / |half - ref|
};

inline RichardsonCheck richardson_check(const LatticeSpec& lattice, const PotentialSpec& potential,
                                        const ThermoParams& params, std::span<const int> x,
                                        double reference, double field_step = kDefaultFieldStep,
                                        int direction = 1) {
  RichardsonCheck out;
  out.step_value = conductivity_finite_difference(lattice, potential, params, x, field_step, direction);
  out.half_step_value =
      conductivity_finite_difference(lattice, potential, params, x, 0.5 * field_step, direction);
  out.extrapolated = (4.0 * out.half_step_value - out.step_value) / 3.0;
  const double half_dev = std::abs(out.half_step_value - reference);
  out.deviation_ratio = half_dev > 0.0 ? std::abs(out.step_value - reference) / half_dev : kInfinity;
  return out;
}

}  // namespace nesskubo

#endif  // NESSKUBO_KUBO_CONDUCTIVITY_HPP
