#ifndef NESSKUBO_ORACLES_HPP
#define NESSKUBO_ORACLES_HPP

// Closed-form reference models computed by scalar quadrature, independent of
// the matrix engine:
//
//  * the free lattice chain, where the steady state is the multiplication
//    operator R(k) = 2 lambda \int_0^\infty e^{-2 lambda s} f(eps(k + sE)) ds
//    and the current is Lorentzian in the field;
//  * the free continuum, whose current is exactly linear in E (Drude).
//
// Orientation: currents are positive along the field, and the conductivity
// is (1/2 lambda) (1/2 pi) \int f eps'' dk = (1/2 lambda) (1/2 pi) \int (-f') eps'^2 dk.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nesskubo/spectral.hpp"

namespace nesskubo {

/// Band dispersion with its first two derivatives.
struct Dispersion {
  enum class Kind { cosine, quadratic };

  Kind kind = Kind::cosine;
  double amplitude = 2.0;  ///< eps(k) = -amplitude cos k for the cosine kind

  bool operator==(const Dispersion&) const = default;

  /// Nearest-neighbour chain with unit hopping: -2 cos k.
  static Dispersion lattice_chain() { return {Kind::cosine, 2.0}; }
  static Dispersion cosine(double amplitude) { return {Kind::cosine, amplitude}; }
  /// Free continuum k^2 / 2.
  static Dispersion quadratic() { return {Kind::quadratic, 1.0}; }

  bool periodic() const { return kind == Kind::cosine; }

  double value(double k) const {
    return kind == Kind::cosine ? -amplitude * std::cos(k) : 0.5 * k * k;
  }
  double slope(double k) const { return kind == Kind::cosine ? amplitude * std::sin(k) : k; }
  double curvature(double k) const { return kind == Kind::cosine ? amplitude * std::cos(k) : 1.0; }
};

namespace quadrature {

inline constexpr double kTolerance = 1e-11;
inline constexpr unsigned kMaxDepth = 15;

/// Adaptive Gauss-Kronrod over [a, b], split at the given interior points.
template <class Fn>
double integrate(Fn&& fn, double a, double b, std::vector<double> breaks = {}) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > a && x < b); }),
               breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  double lo = a;
  breaks.push_back(b);
  for (double hi : breaks) {
    if (hi > lo)
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(fn, lo, hi, kMaxDepth,
                                                                             kTolerance);
    lo = hi;
  }
  return total;
}

/// Points in (a, b) where phi changes sign, located by sampling then
/// bisection.
template <class Fn>
std::vector<double> sign_changes(Fn&& phi, double a, double b, int samples) {
  std::vector<double> roots;
  const double h = (b - a) / samples;
  double xa = a, pa = phi(a);
  for (int i = 1; i <= samples; ++i) {
    const double xb = a + i * h;
    const double pb = phi(xb);
    if ((pa < 0.0) != (pb < 0.0)) {
      double lo = xa, hi = xb;
      const bool rising = pa < 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((phi(mid) < 0.0) == rising)
          lo = mid;
        else
          hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    xa = xb;
    pa = pb;
  }
  return roots;
}

}  // namespace quadrature

/// The damped s-integral is truncated where e^{-2 lambda s} < 1e-14.
inline double damping_horizon(double lambda) { return std::log(1e14) / (2.0 * lambda); }

/// R(k) = 2 lambda \int_0^\infty e^{-2 lambda s} f(eps(k + s E)) ds.
inline double solvable_ness_distribution(double k, const ThermoParams& params,
                                         const Dispersion& dispersion) {
  params.validate();
  const double f0 = fermi_dirac(dispersion.value(k), params.beta, params.mu);
  if (params.field == 0.0) return f0;
  const double rate = 2.0 * params.lambda;
  const double horizon = damping_horizon(params.lambda);
  auto occupation = [&](double s) {
    return fermi_dirac(dispersion.value(k + s * params.field), params.beta, params.mu);
  };
  // Fermi crossings along the path; resolve them as breakpoints.
  const double travel = std::abs(params.field) * horizon;
  const int samples = std::max(64, static_cast<int>(travel * 16.0));
  auto breaks = quadrature::sign_changes(
      [&](double s) { return dispersion.value(k + s * params.field) - params.mu; }, 0.0, horizon,
      samples);
  const double value = quadrature::integrate(
      [&](double s) { return rate * std::exp(-rate * s) * occupation(s); }, 0.0, horizon, breaks);
  return std::clamp(value, 0.0, 1.0);
}

/// (1/2 pi) \int_{-pi}^{pi} f(eps(k)) eps''(k) dk for a periodic dispersion.
inline double band_curvature_weight(double beta, double mu, const Dispersion& dispersion) {
  if (!dispersion.periodic())
    throw ParameterError("the lattice current needs a 2 pi-periodic dispersion");
  const double pi = std::numbers::pi;
  auto breaks = quadrature::sign_changes(
      [&](double k) { return dispersion.value(k) - mu; }, -pi, pi, 4096);
  return quadrature::integrate(
             [&](double k) {
               return fermi_dirac(dispersion.value(k), beta, mu) * dispersion.curvature(k);
             },
             -pi, pi, breaks) /
         (2.0 * pi);
}

/// Site-independent steady current of the free chain:
/// 2 lambda E / (4 lambda^2 + E^2) * (1/2 pi) \int f eps'' dk.
inline double solvable_current(const ThermoParams& params, const Dispersion& dispersion) {
  params.validate();
  if (params.field == 0.0) return 0.0;
  const double lam = params.lambda, e = params.field;
  return 2.0 * lam * e / (4.0 * lam * lam + e * e) *
         band_curvature_weight(params.beta, params.mu, dispersion);
}

/// dj/dE at E = 0: (1/2 lambda) (1/2 pi) \int f eps'' dk.
inline double solvable_conductivity(const ThermoParams& params, const Dispersion& dispersion) {
  params.validate();
  return band_curvature_weight(params.beta, params.mu, dispersion) / (2.0 * params.lambda);
}

/// rho = \int_R f(k^2/2) dk.
inline double drude_density(double beta, double mu) {
  if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
  const double kf = mu > 0.0 ? std::sqrt(2.0 * mu) : 0.0;
  if (std::isinf(beta)) return 2.0 * kf;
  // beyond k_max the occupation is below e^{-60}
  const double kmax = std::sqrt(2.0 * (std::max(mu, 0.0) + 60.0 / beta));
  auto occ = [&](double k) { return fermi_dirac(0.5 * k * k, beta, mu); };
  std::vector<double> breaks;
  if (kf > 0.0) {
    // resolve the thermal edge around the Fermi momentum
    const double width = 1.0 / (beta * kf);
    for (double w : {-8.0, -1.0, 0.0, 1.0, 8.0}) breaks.push_back(kf + w * width);
  }
  return 2.0 * quadrature::integrate(occ, 0.0, kmax, breaks);
}

/// Continuum current j = E rho / (2 lambda).
inline double drude_current(const ThermoParams& params) {
  params.validate();
  if (params.field == 0.0) return 0.0;
  return params.field * drude_density(params.beta, params.mu) / (2.0 * params.lambda);
}

}  // namespace nesskubo

#endif  // NESSKUBO_ORACLES_HPP
