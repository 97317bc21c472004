#ifndef NESSKUBO_SPECTRAL_HPP
#define NESSKUBO_SPECTRAL_HPP

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "nesskubo/lattice_model.hpp"

namespace nesskubo {

/// Thermodynamic and driving parameters. beta may be +infinity.
struct ThermoParams {
  double beta = 1.0;
  double mu = 0.0;
  double lambda = 0.5;
  double field = 0.0;

  bool operator==(const ThermoParams&) const = default;

  bool zero_temperature() const { return std::isinf(beta); }

  void validate() const {
    if (!(beta > 0.0)) throw ParameterError(detail::concat("beta must be > 0, got ", beta));
    if (!std::isfinite(mu)) throw ParameterError("mu must be finite");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw ParameterError(detail::concat("lambda must be a positive finite number, got ", lambda));
    if (!std::isfinite(field)) throw ParameterError("field must be finite");
  }
};

/// 1 / (1 + exp(beta (eps - mu))). At beta = inf this is the step with value
/// 1/2 exactly at the chemical potential.
inline double fermi_dirac(double eps, double beta, double mu) {
  const double x = eps - mu;
  if (std::isinf(beta)) {
    if (x < 0.0) return 1.0;
    if (x > 0.0) return 0.0;
    return 0.5;
  }
  const double y = beta * x;
  if (y >= 0.0) {
    const double e = std::exp(-y);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(y));
}

/// d/d(eps) of fermi_dirac for finite beta.
inline double fermi_dirac_derivative(double eps, double beta, double mu) {
  if (std::isinf(beta))
    throw ParameterError("Fermi-Dirac derivative is a delta function at beta = inf");
  const double e = std::exp(-std::abs(beta * (eps - mu)));
  return -beta * e / ((1.0 + e) * (1.0 + e));
}

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct SpectralDecomposition {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }

  HermitianOperator reconstruct() const {
    return HermitianOperator(eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint());
  }
};

inline SpectralDecomposition eig_hermitian(const HermitianOperator& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a.matrix());
  if (solver.info() != Eigen::Success)
    throw NumericalError(detail::concat("Hermitian eigensolver did not converge (dim ", a.dim(), ")"));
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// U diag(g(eps)) U^H.
template <class Fn>
HermitianOperator matrix_function(const SpectralDecomposition& decomp, Fn&& g) {
  RealVector values(decomp.dim());
  for (Index n = 0; n < decomp.dim(); ++n) values(n) = g(decomp.eigenvalues(n));
  const ComplexMatrix& u = decomp.eigenvectors;
  return HermitianOperator(u * values.asDiagonal() * u.adjoint());
}

/// f_{beta,mu}(h), the equilibrium covariance.
inline HermitianOperator fermi_operator(const SpectralDecomposition& decomp, double beta,
                                        double mu) {
  if (std::isinf(beta)) {
    for (Index n = 0; n < decomp.dim(); ++n)
      if (std::abs(decomp.eigenvalues(n) - mu) < 1e-12)
        log::warn("eigenvalue ", decomp.eigenvalues(n),
                  " sits on the chemical potential at beta = inf; occupation set to 1/2");
  }
  return matrix_function(decomp, [&](double e) { return fermi_dirac(e, beta, mu); });
}

/// i(AB - BA).
inline HermitianOperator commutator_i(const HermitianOperator& a, const HermitianOperator& b) {
  HermitianOperator::require_same_dim(a, b);
  const ComplexMatrix ab = a.matrix() * b.matrix();
  return HermitianOperator(kI * (ab - ab.adjoint()));
}

}  // namespace nesskubo

#endif  // NESSKUBO_SPECTRAL_HPP
