#ifndef NESSKUBO_LATTICE_MODEL_HPP
#define NESSKUBO_LATTICE_MODEL_HPP

// One-particle operators of a tight-binding model on the truncated box
// [-N, N]^d: the hopping Hamiltonian with on-site potential, the position
// operator, the velocity and the Hamiltonian in a uniform field.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "nesskubo/core.hpp"

namespace nesskubo {

/// Integer lattice point; one coordinate per dimension.
using Site = std::vector<int>;

enum class Boundary { open, periodic };

inline std::string_view to_string(Boundary b) {
  return b == Boundary::open ? "open" : "periodic";
}

/// The box [-N, N]^d. Sites are flattened row-major with the first
/// coordinate most significant.
struct LatticeSpec {
  int dimension = 1;
  int half_width = 1;
  Boundary boundary = Boundary::open;

  int side() const { return 2 * half_width + 1; }

  Index site_count() const {
    Index n = 1;
    for (int l = 0; l < dimension; ++l) n *= side();
    return n;
  }

  void validate() const {
    if (dimension < 1)
      throw ParameterError(detail::concat("lattice dimension must be >= 1, got ", dimension));
    if (half_width < 1)
      throw ParameterError(detail::concat("lattice half_width must be >= 1, got ", half_width));
  }

  bool contains(std::span<const int> x) const {
    if (static_cast<int>(x.size()) != dimension) return false;
    return std::all_of(x.begin(), x.end(),
                       [&](int c) { return c >= -half_width && c <= half_width; });
  }

  Index index_of(std::span<const int> x) const {
    if (!contains(x)) throw RangeError("site outside the lattice box");
    Index idx = 0;
    for (int c : x) idx = idx * side() + (c + half_width);
    return idx;
  }

  Site site_at(Index idx) const {
    Site x(static_cast<std::size_t>(dimension));
    for (int l = dimension - 1; l >= 0; --l) {
      x[static_cast<std::size_t>(l)] = static_cast<int>(idx % side()) - half_width;
      idx /= side();
    }
    return x;
  }

  /// Neighbour of `x` shifted by `step` along axis `axis` (0-based). Wraps on
  /// the torus; returns false when the step leaves an open box.
  bool shifted(std::span<const int> x, int axis, int step, Site& out) const {
    out.assign(x.begin(), x.end());
    int& c = out[static_cast<std::size_t>(axis)];
    c += step;
    if (c >= -half_width && c <= half_width) return true;
    if (boundary == Boundary::open) return false;
    c = ((c + half_width) % side() + side()) % side() - half_width;
    return true;
  }

  /// Signed separation a_axis - b_axis; minimum image on the torus.
  int displacement(std::span<const int> a, std::span<const int> b, int axis) const {
    int d = a[static_cast<std::size_t>(axis)] - b[static_cast<std::size_t>(axis)];
    if (boundary == Boundary::periodic) {
      const int L = side();
      d = ((d % L) + L) % L;
      if (d > L / 2) d -= L;
    }
    return d;
  }

  Site center() const { return Site(static_cast<std::size_t>(dimension), 0); }
};

// --- potentials -----------------------------------------------------------

struct ZeroPotential {
  bool operator==(const ZeroPotential&) const = default;
};

/// Explicit per-site values; every site of the box must be present.
struct TablePotential {
  std::map<Site, double> values;
  bool operator==(const TablePotential&) const = default;
};

/// V(x) = cell_values[x mod p], cell flattened row-major over 0 <= m_l < p_l.
struct PeriodicPotential {
  std::vector<int> periods;
  std::vector<double> cell_values;

  bool operator==(const PeriodicPotential&) const = default;

  std::size_t cell_size() const {
    std::size_t n = 1;
    for (int p : periods) n *= static_cast<std::size_t>(p);
    return n;
  }

  void validate() const {
    if (periods.empty()) throw ConfigError("periodic potential needs at least one period");
    for (int p : periods)
      if (p < 1) throw ConfigError(detail::concat("period must be positive, got ", p));
    if (cell_values.size() != cell_size())
      throw ConfigError(detail::concat("periodic potential has ", cell_values.size(),
                                       " cell values, expected ", cell_size()));
    for (double v : cell_values)
      if (!std::isfinite(v)) throw ConfigError("potential values must be finite");
  }

  double at(std::span<const int> x) const {
    if (x.size() != periods.size())
      throw ConfigError("periodic potential dimension does not match the lattice");
    std::size_t idx = 0;
    for (std::size_t l = 0; l < x.size(); ++l) {
      const int p = periods[l];
      idx = idx * static_cast<std::size_t>(p) + static_cast<std::size_t>(((x[l] % p) + p) % p);
    }
    return cell_values[idx];
  }
};

using PotentialSpec = std::variant<ZeroPotential, TablePotential, PeriodicPotential>;

inline double potential_at(const PotentialSpec& potential, std::span<const int> x) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ZeroPotential>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, TablePotential>) {
          auto it = v.values.find(Site(x.begin(), x.end()));
          if (it == v.values.end()) {
            std::ostringstream os;
            os << "potential table has no value for site (";
            for (std::size_t i = 0; i < x.size(); ++i) os << (i ? " " : "") << x[i];
            os << ")";
            throw ConfigError(os.str());
          }
          return it->second;
        } else {
          return v.at(x);
        }
      },
      potential);
}

/// Reads "x1 ... xd value" lines; '#' starts a comment.
inline TablePotential read_potential_table(std::istream& in, int dimension) {
  TablePotential table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (static_cast<int>(tokens.size()) != dimension + 1)
      throw ConfigError(detail::concat("potential table line ", line_no, ": expected ",
                                       dimension + 1, " fields, got ", tokens.size()));
    Site x(static_cast<std::size_t>(dimension));
    try {
      for (int l = 0; l < dimension; ++l) {
        std::size_t used = 0;
        x[static_cast<std::size_t>(l)] = std::stoi(tokens[static_cast<std::size_t>(l)], &used);
        if (used != tokens[static_cast<std::size_t>(l)].size()) throw std::invalid_argument("");
      }
      std::size_t used = 0;
      const double value = std::stod(tokens.back(), &used);
      if (used != tokens.back().size() || !std::isfinite(value)) throw std::invalid_argument("");
      if (!table.values.emplace(x, value).second)
        throw ConfigError(detail::concat("potential table line ", line_no, ": duplicate site"));
    } catch (const std::logic_error&) {
      throw ConfigError(detail::concat("potential table line ", line_no, ": malformed entry"));
    }
  }
  return table;
}

inline TablePotential load_potential_table(const std::string& path, int dimension) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential table '" + path + "'");
  return read_potential_table(in, dimension);
}

/// Uniform i.i.d. values in [-amplitude, amplitude] on every site of the box.
inline TablePotential random_potential(const LatticeSpec& lattice, double amplitude,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  TablePotential table;
  for (Index i = 0; i < lattice.site_count(); ++i) table.values.emplace(lattice.site_at(i), dist(rng));
  return table;
}

// --- operators ------------------------------------------------------------

inline constexpr double kHermiticityTolerance = 1e-12;

/// Dense complex matrix equal to its own conjugate transpose. The check is
/// relative to max(1, largest entry); the stored matrix is the exact
/// Hermitian part of the input.
class HermitianOperator {
 public:
  HermitianOperator() = default;

  explicit HermitianOperator(ComplexMatrix m, double tolerance = kHermiticityTolerance) {
    if (m.rows() != m.cols())
      throw ParameterError(detail::concat("operator must be square, got ", m.rows(), "x", m.cols()));
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = m.rows() ? (m - m.adjoint()).cwiseAbs().maxCoeff() : 0.0;
    if (!(asym <= tolerance * scale))
      throw NumericalError(detail::concat("matrix is not Hermitian (max |A - A^H| = ", asym, ")"));
    m_ = 0.5 * (m + m.adjoint());
  }

  static HermitianOperator identity(Index n) {
    return HermitianOperator(ComplexMatrix::Identity(n, n));
  }
  static HermitianOperator zero(Index n) { return HermitianOperator(ComplexMatrix::Zero(n, n)); }

  Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  Complex operator()(Index row, Index col) const { return m_(row, col); }

  friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
    require_same_dim(a, b);
    return HermitianOperator(a.m_ + b.m_);
  }
  friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
    require_same_dim(a, b);
    return HermitianOperator(a.m_ - b.m_);
  }
  friend HermitianOperator operator*(double s, const HermitianOperator& a) {
    return HermitianOperator(s * a.m_);
  }

  static void require_same_dim(const HermitianOperator& a, const HermitianOperator& b) {
    if (a.dim() != b.dim())
      throw ParameterError(detail::concat("dimension mismatch: ", a.dim(), " vs ", b.dim()));
  }

 private:
  ComplexMatrix m_;
};

/// -sum over nearest neighbours plus V on the diagonal.
inline HermitianOperator build_hamiltonian(const LatticeSpec& lattice,
                                           const PotentialSpec& potential) {
  lattice.validate();
  if (const auto* p = std::get_if<PeriodicPotential>(&potential)) {
    p->validate();
    if (static_cast<int>(p->periods.size()) != lattice.dimension)
      throw ConfigError("periodic potential dimension does not match the lattice");
  }
  const Index n = lattice.site_count();
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  Site y;
  for (Index i = 0; i < n; ++i) {
    const Site x = lattice.site_at(i);
    h(i, i) = potential_at(potential, x);
    for (int axis = 0; axis < lattice.dimension; ++axis) {
      // forward bond only; the backward one is its transpose
      if (lattice.shifted(x, axis, +1, y)) {
        const Index j = lattice.index_of(y);
        h(i, j) += -1.0;
        h(j, i) += -1.0;
      }
    }
  }
  return HermitianOperator(std::move(h));
}

/// Diagonal matrix of the coordinate along `direction` (1-based).
inline HermitianOperator build_position(const LatticeSpec& lattice, int direction) {
  lattice.validate();
  if (lattice.boundary != Boundary::open)
    throw UnsupportedOperation("position operator is undefined on the periodic torus");
  if (direction < 1 || direction > lattice.dimension)
    throw ParameterError(detail::concat("direction must be in 1..", lattice.dimension));
  const Index n = lattice.site_count();
  ComplexMatrix q = ComplexMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    q(i, i) = static_cast<double>(lattice.site_at(i)[static_cast<std::size_t>(direction - 1)]);
  return HermitianOperator(std::move(q));
}

/// i(hq - qh).
inline HermitianOperator build_velocity(const HermitianOperator& h, const HermitianOperator& q) {
  HermitianOperator::require_same_dim(h, q);
  const ComplexMatrix hq = h.matrix() * q.matrix();
  return HermitianOperator(kI * (hq - hq.adjoint()));
}

/// h - E q.
inline HermitianOperator build_field_hamiltonian(const HermitianOperator& h,
                                                 const HermitianOperator& q, double field) {
  HermitianOperator::require_same_dim(h, q);
  return HermitianOperator(h.matrix() - field * q.matrix());
}

/// i[Q, X] built entrywise as i (y - x)_direction X_{yx}. Uses the minimum
/// image separation on the torus, where Q itself does not exist; on an open
/// box it equals the exact commutator with build_position.
inline HermitianOperator position_commutator(const LatticeSpec& lattice,
                                             const HermitianOperator& x_op, int direction) {
  if (direction < 1 || direction > lattice.dimension)
    throw ParameterError(detail::concat("direction must be in 1..", lattice.dimension));
  if (x_op.dim() != lattice.site_count())
    throw ParameterError("operator dimension does not match the lattice");
  const Index n = lattice.site_count();
  std::vector<Site> sites;
  sites.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) sites.push_back(lattice.site_at(i));
  ComplexMatrix out(n, n);
  for (Index col = 0; col < n; ++col)
    for (Index row = 0; row < n; ++row) {
      const int d = lattice.displacement(sites[static_cast<std::size_t>(row)],
                                         sites[static_cast<std::size_t>(col)], direction - 1);
      out(row, col) = kI * static_cast<double>(d) * x_op(row, col);
    }
  return HermitianOperator(std::move(out));
}

/// Velocity i[h, Q] for nearest-neighbour h; valid on both boundaries.
inline HermitianOperator lattice_velocity(const LatticeSpec& lattice, const HermitianOperator& h,
                                          int direction) {
  return HermitianOperator(-position_commutator(lattice, h, direction).matrix());
}

}  // namespace nesskubo

#endif  // NESSKUBO_LATTICE_MODEL_HPP
