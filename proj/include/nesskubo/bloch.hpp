#ifndef NESSKUBO_BLOCH_HPP
#define NESSKUBO_BLOCH_HPP

// Periodic potentials: Bloch Hamiltonians h_k on the unit cell, band
// structures on a Brillouin-zone grid and the band-basis form of the
// dissipative conductivity.
//
// Measure: all Brillouin-zone integrals are \int_B dk / (2 pi)^d, which is
// the grid average divided by the cell size |Lambda| = prod p_l. With this
// normalisation the results equal the per-site (cell averaged) real-space
// conductivity.
//
// Gauge: band_structure differentiates h_k in the gauge where every hop
// carries the phase e^{i k . delta} of its real-space displacement delta.
// Only in that gauge does d/dk_1 represent i[Q_1, .]; the boundary-phase
// gauge differs by the intracell position term, which leaves eigenvalues and
// the leading 1/(2 lambda) term unchanged but not the O(lambda) correction.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "nesskubo/spectral.hpp"

namespace nesskubo {

inline constexpr double kDegeneracyThreshold = 1e-8;

struct PeriodicProblem {
  int dimension = 1;
  std::vector<int> periods{1};
  std::vector<double> cell_potential{0.0};  ///< row-major over 0 <= m_l < p_l
  std::vector<int> k_grid{256};              ///< samples per axis

  bool operator==(const PeriodicProblem&) const = default;

  int cell_size() const {
    int n = 1;
    for (int p : periods) n *= p;
    return n;
  }

  Index grid_size() const {
    Index n = 1;
    for (int m : k_grid) n *= m;
    return n;
  }

  void validate() const {
    if (dimension < 1) throw ParameterError("periodic problem dimension must be >= 1");
    if (static_cast<int>(periods.size()) != dimension || static_cast<int>(k_grid.size()) != dimension)
      throw ParameterError("periods and k_grid need one entry per dimension");
    for (int p : periods)
      if (p < 1) throw ParameterError(detail::concat("period must be positive, got ", p));
    for (int m : k_grid)
      if (m < 2) throw ParameterError(detail::concat("k grid needs >= 2 points per axis, got ", m));
    if (static_cast<int>(cell_potential.size()) != cell_size())
      throw ParameterError(detail::concat("cell potential has ", cell_potential.size(),
                                          " values, expected ", cell_size()));
    for (double v : cell_potential)
      if (!std::isfinite(v)) throw ParameterError("cell potential values must be finite");
  }

  std::vector<int> cell_site(int idx) const {
    std::vector<int> m(static_cast<std::size_t>(dimension));
    for (int l = dimension - 1; l >= 0; --l) {
      const int p = periods[static_cast<std::size_t>(l)];
      m[static_cast<std::size_t>(l)] = idx % p;
      idx /= p;
    }
    return m;
  }

  int cell_index(std::span<const int> m) const {
    int idx = 0;
    for (int l = 0; l < dimension; ++l) idx = idx * periods[static_cast<std::size_t>(l)] + m[static_cast<std::size_t>(l)];
    return idx;
  }

  double zone_half_width(int axis) const {
    return std::numbers::pi / periods[static_cast<std::size_t>(axis)];
  }

  double grid_spacing(int axis) const {
    return 2.0 * zone_half_width(axis) / k_grid[static_cast<std::size_t>(axis)];
  }

  /// Per-axis indices of grid point `idx`.
  std::vector<int> grid_indices(Index idx) const {
    std::vector<int> j(static_cast<std::size_t>(dimension));
    for (int l = dimension - 1; l >= 0; --l) {
      const int m = k_grid[static_cast<std::size_t>(l)];
      j[static_cast<std::size_t>(l)] = static_cast<int>(idx % m);
      idx /= m;
    }
    return j;
  }

  Index grid_index(std::span<const int> j) const {
    Index idx = 0;
    for (int l = 0; l < dimension; ++l) {
      const int m = k_grid[static_cast<std::size_t>(l)];
      idx = idx * m + ((j[static_cast<std::size_t>(l)] % m) + m) % m;
    }
    return idx;
  }

  /// k_l = -pi/p_l + (j_l + 1) dk_l, so the grid covers (-pi/p, pi/p].
  std::vector<double> grid_point(Index idx) const {
    const auto j = grid_indices(idx);
    std::vector<double> k(static_cast<std::size_t>(dimension));
    for (int l = 0; l < dimension; ++l)
      k[static_cast<std::size_t>(l)] = -zone_half_width(l) + (j[static_cast<std::size_t>(l)] + 1) * grid_spacing(l);
    return k;
  }

  /// Converts a grid average into \int_B dk / (2 pi)^d.
  double measure_factor() const { return 1.0 / cell_size(); }

  static PeriodicProblem from_potential(const PeriodicPotential& v, std::vector<int> k_grid) {
    PeriodicProblem p;
    p.dimension = static_cast<int>(v.periods.size());
    p.periods = v.periods;
    p.cell_potential = v.cell_values;
    p.k_grid = std::move(k_grid);
    return p;
  }
};

enum class BlochGauge {
  /// phases e^{+-i k_l p_l} only on hops leaving the cell
  boundary,
  /// every hop with displacement delta carries e^{i k . delta}
  position,
};

/// (d/dk_axis)^order of the Bloch matrix; order 0 gives h_k itself.
inline ComplexMatrix bloch_matrix(const PeriodicProblem& prob, std::span<const double> k,
                                  BlochGauge gauge, int axis = 0, int order = 0) {
  const int n = prob.cell_size();
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const auto m = prob.cell_site(a);
    if (order == 0) h(a, a) += prob.cell_potential[static_cast<std::size_t>(a)];
    for (int l = 0; l < prob.dimension; ++l) {
      const int p = prob.periods[static_cast<std::size_t>(l)];
      for (int step : {-1, +1}) {
        auto target = m;
        int c = m[static_cast<std::size_t>(l)] + step;
        const int wrap = c < 0 ? -1 : (c >= p ? 1 : 0);
        c -= wrap * p;
        target[static_cast<std::size_t>(l)] = c;
        const int b = prob.cell_index(target);
        const double shift = gauge == BlochGauge::boundary ? static_cast<double>(wrap * p)
                                                           : static_cast<double>(step);
        if (gauge == BlochGauge::boundary && wrap == 0) {
          if (order == 0) h(a, b) += -1.0;
          continue;
        }
        const Complex phase = std::exp(kI * k[static_cast<std::size_t>(l)] * shift);
        Complex factor = -1.0;
        for (int r = 0; r < order; ++r) factor *= kI * (l == axis ? shift : 0.0);
        h(a, b) += factor * phase;
      }
    }
  }
  return h;
}

/// h_k in the boundary-phase gauge. k outside the zone is wrapped back with
/// a warning.
inline HermitianOperator build_bloch_hamiltonian(const PeriodicProblem& prob,
                                                 std::vector<double> k,
                                                 BlochGauge gauge = BlochGauge::boundary) {
  prob.validate();
  if (static_cast<int>(k.size()) != prob.dimension)
    throw ParameterError("k needs one component per dimension");
  for (int l = 0; l < prob.dimension; ++l) {
    const double half = prob.zone_half_width(l);
    double& kl = k[static_cast<std::size_t>(l)];
    if (kl <= -half || kl > half) {
      const double wrapped = kl - 2.0 * half * std::ceil((kl - half) / (2.0 * half));
      log::warn("k_", l + 1, " = ", kl, " outside the Brillouin zone, wrapped to ", wrapped);
      kl = wrapped;
    }
  }
  return HermitianOperator(bloch_matrix(prob, k, gauge));
}

/// Eigen-data of h_k at one k, in the position gauge.
struct BandPoint {
  std::vector<double> k;
  RealVector energies;         ///< ascending
  ComplexMatrix states;        ///< columns psi^n
  ComplexMatrix velocity;      ///< <psi^n| d_1 h |psi^m>
  RealVector second_derivative_diag;  ///< <psi^n| d_1^2 h |psi^n>

  int bands() const { return static_cast<int>(energies.size()); }

  /// d_1 eps^n by Hellmann-Feynman.
  double slope(int n) const { return velocity(n, n).real(); }

  /// d_1^2 eps^n by second-order perturbation theory.
  double curvature(int n) const {
    double c = second_derivative_diag(n);
    for (int m = 0; m < bands(); ++m)
      if (m != n) c += 2.0 * std::norm(velocity(n, m)) / (energies(n) - energies(m));
    return c;
  }
};

inline BandPoint solve_band_point(const PeriodicProblem& prob, std::vector<double> k) {
  BandPoint pt;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(bloch_matrix(prob, k, BlochGauge::position));
  if (solver.info() != Eigen::Success) throw NumericalError("Bloch eigensolver did not converge");
  pt.energies = solver.eigenvalues();
  pt.states = solver.eigenvectors();
  const ComplexMatrix d1 = bloch_matrix(prob, k, BlochGauge::position, 0, 1);
  const ComplexMatrix d2 = bloch_matrix(prob, k, BlochGauge::position, 0, 2);
  pt.velocity = pt.states.adjoint() * d1 * pt.states;
  pt.second_derivative_diag = (pt.states.adjoint() * d2 * pt.states).diagonal().real();
  pt.k = std::move(k);
  return pt;
}

/// Gradient of band n at an arbitrary k (all axes), by Hellmann-Feynman.
inline std::vector<double> band_gradient(const PeriodicProblem& prob, std::span<const double> k,
                                         const ComplexVector& state) {
  std::vector<double> g(static_cast<std::size_t>(prob.dimension));
  for (int l = 0; l < prob.dimension; ++l)
    g[static_cast<std::size_t>(l)] =
        (state.adjoint() * bloch_matrix(prob, k, BlochGauge::position, l, 1) * state)(0, 0).real();
  return g;
}

struct BandStructure {
  PeriodicProblem problem;
  std::vector<BandPoint> points;  ///< grid order, see PeriodicProblem::grid_point
  /// min over k and n != m of |eps^n_k - eps^m_k|
  double margin = kInfinity;

  int bands() const { return problem.cell_size(); }

  double band_min(int n) const {
    double v = kInfinity;
    for (const auto& p : points) v = std::min(v, p.energies(n));
    return v;
  }
  double band_max(int n) const {
    double v = -kInfinity;
    for (const auto& p : points) v = std::max(v, p.energies(n));
    return v;
  }

  void require_nondegenerate() const {
    if (!(margin > kDegeneracyThreshold))
      throw AssumptionViolated(detail::concat(
          "bands are degenerate somewhere on the grid (margin ", margin,
          "); the band-basis conductivity requires nondegenerate h_k"));
  }
};

inline BandStructure band_structure(const PeriodicProblem& prob) {
  prob.validate();
  BandStructure bs;
  bs.problem = prob;
  bs.points.reserve(static_cast<std::size_t>(prob.grid_size()));
  for (Index i = 0; i < prob.grid_size(); ++i) {
    bs.points.push_back(solve_band_point(prob, prob.grid_point(i)));
    const RealVector& e = bs.points.back().energies;
    for (Index n = 0; n + 1 < e.size(); ++n) bs.margin = std::min(bs.margin, e(n + 1) - e(n));
  }
  if (bs.margin < kDegeneracyThreshold)
    log::warn("band nondegeneracy margin ", bs.margin, " is below ", kDegeneracyThreshold,
              "; conductivity formulas that assume nondegenerate bands will refuse this input");
  return bs;
}

namespace detail {

/// Mean over a periodic 1D grid of f_inf(phi) g where f_inf is the
/// zero-temperature occupation (phi < 0 occupied) and both phi and g are
/// linearly interpolated inside each grid cell.
inline double occupied_mean_1d(const std::vector<double>& phi, const std::vector<double>& g) {
  const std::size_t m = phi.size();
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t jn = (j + 1) % m;
    const double a = phi[j], b = phi[jn];
    const double ga = g[j], gb = g[jn];
    if (a < 0.0 && b < 0.0) {
      sum += 0.5 * (ga + gb);
    } else if (a < 0.0 || b < 0.0) {
      const double t = a / (a - b);  // crossing point in [0, 1]
      const double slope = gb - ga;
      if (a < 0.0)
        sum += ga * t + 0.5 * slope * t * t;
      else
        sum += ga * (1.0 - t) + 0.5 * slope * (1.0 - t * t);
    }
  }
  return sum / static_cast<double>(m);
}

/// Grid mean of occupation(eps^n) * g(point, n), summed over bands, for a
/// curvature-type g = d_1^2 eps^n. At beta = inf a band that does not cross
/// mu is constant-occupied and its integral of a total derivative vanishes,
/// so it is skipped.
template <class G>
double occupied_curvature_mean(const BandStructure& bs, double beta, double mu, G&& g) {
  const auto& prob = bs.problem;
  auto crosses = [&](int n) { return bs.band_min(n) <= mu && mu <= bs.band_max(n); };
  if (std::isinf(beta) && prob.dimension == 1) {
    double total = 0.0;
    const std::size_t m = bs.points.size();
    std::vector<double> phi(m), vals(m);
    for (int n = 0; n < bs.bands(); ++n) {
      if (!crosses(n)) continue;
      for (std::size_t j = 0; j < m; ++j) {
        phi[j] = bs.points[j].energies(n) - mu;
        vals[j] = g(j, n);
      }
      total += occupied_mean_1d(phi, vals);
    }
    return total;
  }
  double total = 0.0;
  for (int n = 0; n < bs.bands(); ++n) {
    if (std::isinf(beta) && !crosses(n)) continue;
    for (std::size_t j = 0; j < bs.points.size(); ++j)
      total += fermi_dirac(bs.points[j].energies(n), beta, mu) * g(j, n);
  }
  return total / static_cast<double>(bs.points.size());
}

}  // namespace detail

/// Exact band-basis conductivity split into the intraband (diagonal) and
/// interband (off-diagonal) parts.
struct BlochConductivity {
  double total = 0.0;
  double diagonal = 0.0;
  double off_diagonal = 0.0;
  /// (4 lambda / C') sum_{n != m} \int Tr P^n (d P^m)^2, C' = band margin.
  double off_diagonal_bound = 0.0;
  /// off_diagonal_bound / lambda
  double bound_coefficient = 0.0;
  double margin = 0.0;
};

/// sum_{n != m} \int_B Tr P^n (d_1 P^m)^2 dk / (2 pi)^d.
inline double projector_derivative_weight(const BandStructure& bs) {
  double total = 0.0;
  for (const auto& pt : bs.points)
    for (int n = 0; n < pt.bands(); ++n)
      for (int m = 0; m < pt.bands(); ++m)
        if (n != m) {
          const double gap = pt.energies(m) - pt.energies(n);
          total += std::norm(pt.velocity(m, n)) / (gap * gap);
        }
  return total / static_cast<double>(bs.points.size()) * bs.problem.measure_factor();
}

/// sigma = -Re \int_B sum_{n,m} Tr P^n d f(h_k) P^m d h_k / (2 lambda + i(eps^n - eps^m)).
///
/// With the divided difference f[n,m], (d f(h))_{nm} = f[n,m] (d h)_{nm}. For
/// n = m and finite beta this gives (1/2 lambda) (-f') (d eps)^2; at
/// beta = inf the intraband part is integrated by parts to
/// (1/2 lambda) f d^2 eps.
inline BlochConductivity conductivity_bloch_exact(const BandStructure& bs, double beta, double mu,
                                                  double lambda) {
  ThermoParams{beta, mu, lambda, 0.0}.validate();
  bs.require_nondegenerate();
  const double rate = 2.0 * lambda;
  const double scale = bs.problem.measure_factor();
  BlochConductivity out;
  out.margin = bs.margin;

  if (std::isinf(beta)) {
    out.diagonal = detail::occupied_curvature_mean(bs, beta, mu, [&](std::size_t j, int n) {
                     return bs.points[j].curvature(n);
                   }) / rate;
  } else {
    double d = 0.0;
    for (const auto& pt : bs.points)
      for (int n = 0; n < pt.bands(); ++n)
        d -= fermi_dirac_derivative(pt.energies(n), beta, mu) * pt.slope(n) * pt.slope(n);
    out.diagonal = d / static_cast<double>(bs.points.size()) / rate;
  }
  out.diagonal *= scale;

  double off = 0.0;
  for (const auto& pt : bs.points)
    for (int n = 0; n < pt.bands(); ++n)
      for (int m = 0; m < pt.bands(); ++m) {
        if (n == m) continue;
        const double gap = pt.energies(n) - pt.energies(m);
        const double divided =
            (fermi_dirac(pt.energies(n), beta, mu) - fermi_dirac(pt.energies(m), beta, mu)) / gap;
        off -= divided * std::norm(pt.velocity(n, m)) * rate / (rate * rate + gap * gap);
      }
  out.off_diagonal = off / static_cast<double>(bs.points.size()) * scale;
  out.total = out.diagonal + out.off_diagonal;

  out.bound_coefficient = 4.0 / bs.margin * projector_derivative_weight(bs);
  out.off_diagonal_bound = lambda * out.bound_coefficient;
  if (std::abs(out.off_diagonal) > out.off_diagonal_bound * (1.0 + 1e-9) + 1e-14)
    throw NumericalError(detail::concat("interband term ", out.off_diagonal,
                                        " exceeds its bound ", out.off_diagonal_bound));
  return out;
}

/// The interband part rewritten through band projectors:
/// sum_{n != m} f(eps^m) (eps^n - eps^m) 4 lambda / (4 lambda^2 + (eps^n - eps^m)^2)
///   Tr P^n (d P^m)^2.
inline double off_diagonal_projector_form(const BandStructure& bs, double beta, double mu,
                                          double lambda) {
  bs.require_nondegenerate();
  double total = 0.0;
  for (const auto& pt : bs.points)
    for (int n = 0; n < pt.bands(); ++n)
      for (int m = 0; m < pt.bands(); ++m) {
        if (n == m) continue;
        const double gap = pt.energies(n) - pt.energies(m);
        const double trace = std::norm(pt.velocity(m, n)) / (gap * gap);
        total += fermi_dirac(pt.energies(m), beta, mu) * gap * 4.0 * lambda /
                 (4.0 * lambda * lambda + gap * gap) * trace;
      }
  return total / static_cast<double>(bs.points.size()) * bs.problem.measure_factor();
}

/// d_1^2 eps^n on the grid by centered differences with wrap-around; exact
/// (from h_k) when the cell has a single site.
inline std::vector<std::vector<double>> curvature_by_differences(const BandStructure& bs) {
  const auto& prob = bs.problem;
  const double dk = prob.grid_spacing(0);
  std::vector<std::vector<double>> out(bs.points.size(), std::vector<double>(static_cast<std::size_t>(bs.bands())));
  for (std::size_t j = 0; j < bs.points.size(); ++j) {
    if (bs.bands() == 1) {
      out[j][0] = bs.points[j].second_derivative_diag(0);
      continue;
    }
    auto idx = prob.grid_indices(static_cast<Index>(j));
    auto fwd = idx, bwd = idx;
    fwd[0] += 1;
    bwd[0] -= 1;
    const auto& pf = bs.points[static_cast<std::size_t>(prob.grid_index(fwd))];
    const auto& pb = bs.points[static_cast<std::size_t>(prob.grid_index(bwd))];
    for (int n = 0; n < bs.bands(); ++n)
      out[j][static_cast<std::size_t>(n)] =
          (pf.energies(n) - 2.0 * bs.points[j].energies(n) + pb.energies(n)) / (dk * dk);
  }
  return out;
}

/// (1/2 lambda) sum_n \int_B f(eps^n) d_1^2 eps^n dk / (2 pi)^d.
inline double conductivity_bloch_leading(const BandStructure& bs, double beta, double mu,
                                         double lambda) {
  ThermoParams{beta, mu, lambda, 0.0}.validate();
  for (int m : bs.problem.k_grid)
    if (m < 4) throw ParameterError("leading-term conductivity needs >= 4 grid points per axis");
  const auto curv = curvature_by_differences(bs);
  const double mean = detail::occupied_curvature_mean(
      bs, beta, mu, [&](std::size_t j, int n) { return curv[j][static_cast<std::size_t>(n)]; });
  return mean * bs.problem.measure_factor() / (2.0 * lambda);
}

// --- Fermi surface ----------------------------------------------------------

struct FermiCrossing {
  std::vector<double> k;  ///< point (1D) or segment midpoint (2D)
  int band = 0;           ///< 0-based
  double slope = 0.0;     ///< d_1 eps at k
  double normal = 0.0;    ///< first component of the outward unit normal of {eps <= mu}
  double length = 1.0;    ///< segment length (1 for 1D points)
};

struct FermiSurface {
  double conductivity = 0.0;
  std::vector<FermiCrossing> crossings;
  bool touches_band_edge = false;
};

namespace detail {

inline double band_energy(const PeriodicProblem& prob, std::span<const double> k, int n,
                          ComplexVector* state = nullptr) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(bloch_matrix(prob, k, BlochGauge::position));
  if (solver.info() != Eigen::Success) throw NumericalError("Bloch eigensolver did not converge");
  if (state) *state = solver.eigenvectors().col(n);
  return solver.eigenvalues()(n);
}

}  // namespace detail

/// (1/2 lambda) sum_n \int_{dB^n_mu} d_1 eps^n n_1 dS / (2 pi)^d, the
/// zero-temperature Fermi-surface form. The Fermi set is located on the
/// grid, then refined by bisection on the true band (1D) or by linear
/// interpolation with marching squares (2D). Velocities come from h_k at the
/// located points, independent of the grid curvature.
inline FermiSurface fermi_surface_conductivity(const BandStructure& bs, double mu, double lambda) {
  ThermoParams{kInfinity, mu, lambda, 0.0}.validate();
  const auto& prob = bs.problem;
  if (prob.dimension > 2)
    throw UnsupportedOperation("Fermi-surface extraction is implemented for d = 1 and d = 2");
  FermiSurface fs;
  double integral = 0.0;

  if (prob.dimension == 1) {
    const std::size_t m = bs.points.size();
    const double dk = prob.grid_spacing(0);
    for (int n = 0; n < bs.bands(); ++n) {
      for (std::size_t j = 0; j < m; ++j) {
        const double pa = bs.points[j].energies(n) - mu;
        const double pb = bs.points[(j + 1) % m].energies(n) - mu;
        if ((pa < 0.0) == (pb < 0.0)) continue;
        double lo = bs.points[j].k[0], hi = lo + dk;
        const bool rising = pa < 0.0;  // occupied on the left
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double pm = detail::band_energy(prob, std::vector<double>{mid}, n) - mu;
          if ((pm < 0.0) == rising)
            lo = mid;
          else
            hi = mid;
        }
        double kc = 0.5 * (lo + hi);
        ComplexVector state;
        detail::band_energy(prob, std::vector<double>{kc}, n, &state);
        const double slope = band_gradient(prob, std::vector<double>{kc}, state)[0];
        const double half = prob.zone_half_width(0);
        if (kc > half) kc -= 2.0 * half;
        FermiCrossing c{{kc}, n, slope, rising ? 1.0 : -1.0, 1.0};
        if (std::abs(slope) < 1e-8) fs.touches_band_edge = true;
        integral += c.slope * c.normal;
        fs.crossings.push_back(std::move(c));
      }
    }
    integral /= 2.0 * std::numbers::pi;
  } else {
    const int m0 = prob.k_grid[0], m1 = prob.k_grid[1];
    const double d0 = prob.grid_spacing(0), d1 = prob.grid_spacing(1);
    for (int n = 0; n < bs.bands(); ++n) {
      auto phi = [&](int i, int j) {
        const int idx[2] = {i, j};
        return bs.points[static_cast<std::size_t>(prob.grid_index(idx))].energies(n) - mu;
      };
      for (int i = 0; i < m0; ++i)
        for (int j = 0; j < m1; ++j) {
          const auto base = prob.grid_point(prob.grid_index(std::array<int, 2>{i, j}));
          const double k0 = base[0], k1 = base[1];
          // corners c0 (i,j), c1 (i+1,j), c2 (i+1,j+1), c3 (i,j+1)
          const double v[4] = {phi(i, j), phi(i + 1, j), phi(i + 1, j + 1), phi(i, j + 1)};
          const double cx[4] = {k0, k0 + d0, k0 + d0, k0};
          const double cy[4] = {k1, k1, k1 + d1, k1 + d1};
          std::array<std::array<double, 2>, 4> pts{};
          std::array<bool, 4> cut{};
          int cuts = 0;
          for (int e = 0; e < 4; ++e) {
            const int a = e, b = (e + 1) % 4;
            if ((v[a] < 0.0) == (v[b] < 0.0)) continue;
            const double t = v[a] / (v[a] - v[b]);
            pts[static_cast<std::size_t>(e)] = {cx[a] + t * (cx[b] - cx[a]), cy[a] + t * (cy[b] - cy[a])};
            cut[static_cast<std::size_t>(e)] = true;
            ++cuts;
          }
          if (cuts == 0) continue;
          std::vector<std::pair<int, int>> segs;
          if (cuts == 2) {
            int first = -1, second = -1;
            for (int e = 0; e < 4; ++e)
              if (cut[static_cast<std::size_t>(e)]) (first < 0 ? first : second) = e;
            segs.emplace_back(first, second);
          } else {
            const bool center_inside = 0.25 * (v[0] + v[1] + v[2] + v[3]) < 0.0;
            if (center_inside == (v[0] < 0.0))
              segs = {{0, 1}, {2, 3}};
            else
              segs = {{3, 0}, {1, 2}};
          }
          for (auto [ea, eb] : segs) {
            const auto& pa = pts[static_cast<std::size_t>(ea)];
            const auto& pb = pts[static_cast<std::size_t>(eb)];
            const double len = std::hypot(pb[0] - pa[0], pb[1] - pa[1]);
            if (len == 0.0) continue;
            std::vector<double> km{0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])};
            ComplexVector state;
            detail::band_energy(prob, km, n, &state);
            const auto grad = band_gradient(prob, km, state);
            const double gnorm = std::hypot(grad[0], grad[1]);
            if (gnorm < 1e-8) {
              fs.touches_band_edge = true;
              continue;
            }
            FermiCrossing c{km, n, grad[0], grad[0] / gnorm, len};
            integral += c.slope * c.normal * c.length;
            fs.crossings.push_back(std::move(c));
          }
        }
    }
    integral /= 4.0 * std::numbers::pi * std::numbers::pi;
  }
  if (fs.touches_band_edge)
    log::warn("chemical potential ", mu, " touches a band edge; the Fermi surface is degenerate");
  fs.conductivity = integral / (2.0 * lambda);
  return fs;
}

// --- gaps -------------------------------------------------------------------

enum class Phase { metal, insulator };

inline std::string_view to_string(Phase p) { return p == Phase::metal ? "metal" : "insulator"; }

struct GapReport {
  Phase phase = Phase::metal;
  /// width of the gap containing mu; +inf when mu is outside every band
  double gap_width = 0.0;
  int bands_below = 0;  ///< bands lying entirely below mu
};

inline GapReport gap_check(const BandStructure& bs, double mu) {
  GapReport r;
  const int nb = bs.bands();
  for (int n = 0; n < nb; ++n) {
    const double lo = bs.band_min(n), hi = bs.band_max(n);
    if (lo <= mu && mu <= hi) {
      r.phase = Phase::metal;
      r.bands_below = n;
      return r;
    }
    if (hi < mu) r.bands_below = n + 1;
  }
  r.phase = Phase::insulator;
  if (r.bands_below == 0 || r.bands_below == nb)
    r.gap_width = kInfinity;
  else
    r.gap_width = bs.band_min(r.bands_below) - bs.band_max(r.bands_below - 1);
  return r;
}

// --- export -----------------------------------------------------------------

/// CSV with columns k_1..k_d, n, eps, d_eps, d2_eps (derivatives along k_1,
/// band index 1-based).
inline void write_band_csv(std::ostream& os, const BandStructure& bs) {
  const auto old_precision = os.precision(17);
  for (int l = 1; l <= bs.problem.dimension; ++l) os << "k_" << l << ',';
  os << "n,eps,d_eps,d2_eps\n";
  for (const auto& pt : bs.points)
    for (int n = 0; n < pt.bands(); ++n) {
      for (double kl : pt.k) os << kl << ',';
      os << n + 1 << ',' << pt.energies(n) << ',' << pt.slope(n) << ',' << pt.curvature(n) << '\n';
    }
  os.precision(old_precision);
}

}  // namespace nesskubo

#endif  // NESSKUBO_BLOCH_HPP
