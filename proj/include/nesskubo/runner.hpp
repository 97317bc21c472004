#ifndef NESSKUBO_RUNNER_HPP
#define NESSKUBO_RUNNER_HPP

// Executes a RunConfig and renders the result as CSV or JSON.

#include <atomic>
#include <exception>
#include <ostream>
#include <thread>
#include <variant>

#include "json.hpp"

#include "nesskubo/config.hpp"

namespace nesskubo {

using Value = std::variant<double, long long, std::string>;

struct Row {
  std::vector<std::pair<std::string, Value>> cells;

  Row& add(std::string name, Value v) {
    cells.emplace_back(std::move(name), std::move(v));
    return *this;
  }

  const Value& operator[](std::string_view name) const {
    for (const auto& [k, v] : cells)
      if (k == name) return v;
    throw RangeError("no column '" + std::string(name) + "'");
  }

  double number(std::string_view name) const {
    const Value& v = (*this)[name];
    if (auto d = std::get_if<double>(&v)) return *d;
    if (auto i = std::get_if<long long>(&v)) return static_cast<double>(*i);
    throw RangeError("column '" + std::string(name) + "' is not numeric");
  }
};

using Table = std::vector<Row>;

namespace run_detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + config_detail::format_double(x);
  return s;
}

inline PotentialSpec make_potential(const RunConfig& cfg) {
  switch (cfg.potential.kind) {
    case PotentialKind::zero:
      return ZeroPotential{};
    case PotentialKind::table:
      return load_potential_table(cfg.potential.file, cfg.lattice.dimension);
    case PotentialKind::periodic:
      return PeriodicPotential{cfg.potential.periods, cfg.potential.values};
    case PotentialKind::random:
      return random_potential(cfg.lattice, cfg.potential.amplitude, cfg.potential.seed);
  }
  return ZeroPotential{};
}

inline std::string describe_potential(const PotentialConfig& p) {
  switch (p.kind) {
    case PotentialKind::zero:
      return "zero";
    case PotentialKind::table:
      return "table:" + p.file;
    case PotentialKind::periodic:
      return "periodic:" + join_ints(p.periods) + ":" + join_doubles(p.values);
    case PotentialKind::random:
      return "random:" + config_detail::format_double(p.amplitude) + ":" + std::to_string(p.seed);
  }
  return "?";
}

inline Site measurement_site(const RunConfig& cfg) {
  return cfg.site.empty() ? cfg.lattice.center() : cfg.site;
}

inline void echo_thermo(Row& row, const ThermoParams& t, bool with_field) {
  row.add("beta", t.beta).add("mu", t.mu).add("lambda", t.lambda);
  if (with_field) row.add("field", t.field);
}

inline void echo_lattice(Row& row, const RunConfig& cfg) {
  row.add("dimension", static_cast<long long>(cfg.lattice.dimension))
      .add("half_width", static_cast<long long>(cfg.lattice.half_width))
      .add("boundary", std::string(to_string(cfg.lattice.boundary)))
      .add("potential", describe_potential(cfg.potential))
      .add("site", join_ints(measurement_site(cfg)))
      .add("direction", static_cast<long long>(cfg.direction));
}

inline PeriodicProblem make_periodic_problem(const RunConfig& cfg) {
  return PeriodicProblem::from_potential(
      PeriodicPotential{cfg.potential.periods, cfg.potential.values}, cfg.k_grid);
}

inline void echo_bloch(Row& row, const RunConfig& cfg) {
  row.add("periods", join_ints(cfg.potential.periods))
      .add("cell_potential", join_doubles(cfg.potential.values))
      .add("k_grid", join_ints(cfg.k_grid));
}

/// Real-space quantity at N and 2N; logs the relative change.
template <class Fn>
void log_convergence(const RunConfig& cfg, std::string_view what, double value, Fn&& at_lattice) {
  if (!cfg.convergence_check) return;
  LatticeSpec doubled = cfg.lattice;
  doubled.half_width = 2 * cfg.lattice.half_width;
  const double wide = at_lattice(doubled);
  const double rel = std::abs(wide - value) / std::max(std::abs(wide), 1e-300);
  std::ostringstream os;
  os.precision(17);
  os << what << ": N=" << cfg.lattice.half_width << " -> " << value << ", N="
     << doubled.half_width << " -> " << wide << ", relative change " << rel;
  log::write(log::Level::warn, "convergence", os.str());
}

inline Table run_ness(const RunConfig& cfg, bool full) {
  const PotentialSpec potential = make_potential(cfg);
  const Site x = measurement_site(cfg);
  const auto sol = solve_steady_state(cfg.lattice, potential, cfg.thermo, cfg.direction);
  const double j = site_current(sol.ness, cfg.lattice, x, cfg.direction);
  log_convergence(cfg, "current", j, [&](const LatticeSpec& l) {
    return steady_current(l, potential, cfg.thermo, x, cfg.direction);
  });
  Row row;
  row.add("command", std::string(full ? "ness" : "current"));
  echo_lattice(row, cfg);
  echo_thermo(row, cfg.thermo, true);
  row.add("current", j);
  if (full) {
    const auto [lo, hi] = sol.ness.spectrum_range();
    row.add("density", sol.ness.density(cfg.lattice.index_of(x)))
        .add("covariance_min", lo)
        .add("covariance_max", hi);
    if (!sol.ness.within_bounds())
      throw NumericalError(detail::concat("steady-state covariance left [0, 1]: spectrum [", lo,
                                          ", ", hi, "]"));
  }
  return {row};
}

inline Table run_conductivity(const RunConfig& cfg) {
  const PotentialSpec potential = make_potential(cfg);
  const Site x = measurement_site(cfg);
  const double sigma = kubo_conductivity(cfg.lattice, potential, cfg.thermo, x, cfg.direction);
  log_convergence(cfg, "conductivity", sigma, [&](const LatticeSpec& l) {
    return kubo_conductivity(l, potential, cfg.thermo, x, cfg.direction);
  });
  Row row;
  row.add("command", std::string("conductivity"));
  echo_lattice(row, cfg);
  echo_thermo(row, cfg.thermo, false);
  row.add("field_step", cfg.field_step).add("sigma_kubo", sigma);
  if (cfg.lattice.boundary == Boundary::open)
    row.add("sigma_finite_difference",
            conductivity_finite_difference(cfg.lattice, potential, cfg.thermo, x, cfg.field_step,
                                           cfg.direction));
  else
    row.add("sigma_finite_difference", std::numeric_limits<double>::quiet_NaN());
  return {row};
}

inline Table run_bands(const RunConfig& cfg) {
  const BandStructure bs = band_structure(make_periodic_problem(cfg));
  Table out;
  for (const auto& pt : bs.points)
    for (int n = 0; n < pt.bands(); ++n) {
      Row row;
      for (std::size_t l = 0; l < pt.k.size(); ++l) row.add("k_" + std::to_string(l + 1), pt.k[l]);
      row.add("n", static_cast<long long>(n + 1))
          .add("eps", pt.energies(n))
          .add("d_eps", pt.slope(n))
          .add("d2_eps", pt.curvature(n));
      out.push_back(std::move(row));
    }
  return out;
}

inline Table run_bloch_conductivity(const RunConfig& cfg) {
  const BandStructure bs = band_structure(make_periodic_problem(cfg));
  const auto& t = cfg.thermo;
  const BlochConductivity exact = conductivity_bloch_exact(bs, t.beta, t.mu, t.lambda);
  const double leading = conductivity_bloch_leading(bs, t.beta, t.mu, t.lambda);
  double fermi = std::numeric_limits<double>::quiet_NaN();
  if (t.zero_temperature() && bs.problem.dimension <= 2)
    fermi = fermi_surface_conductivity(bs, t.mu, t.lambda).conductivity;
  const GapReport gap = gap_check(bs, t.mu);
  Row row;
  row.add("command", std::string("bloch-conductivity"));
  echo_bloch(row, cfg);
  echo_thermo(row, t, false);
  row.add("sigma_exact", exact.total)
      .add("sigma_diagonal", exact.diagonal)
      .add("sigma_off_diagonal", exact.off_diagonal)
      .add("off_diagonal_bound", exact.off_diagonal_bound)
      .add("sigma_leading", leading)
      .add("sigma_fermi_surface", fermi)
      .add("phase", std::string(to_string(gap.phase)))
      .add("gap_width", gap.gap_width)
      .add("band_margin", exact.margin);
  return {row};
}

inline Table run_solvable(const RunConfig& cfg) {
  Row row;
  row.add("command", std::string("solvable"))
      .add("dispersion", std::string(cfg.dispersion.kind == Dispersion::Kind::cosine ? "cosine" : "quadratic"))
      .add("amplitude", cfg.dispersion.amplitude);
  echo_thermo(row, cfg.thermo, true);
  row.add("current", solvable_current(cfg.thermo, cfg.dispersion))
      .add("conductivity", solvable_conductivity(cfg.thermo, cfg.dispersion));
  return {row};
}

inline Table run_drude(const RunConfig& cfg) {
  Row row;
  row.add("command", std::string("drude"));
  echo_thermo(row, cfg.thermo, true);
  row.add("density", drude_density(cfg.thermo.beta, cfg.thermo.mu))
      .add("current", drude_current(cfg.thermo))
      .add("conductivity", drude_density(cfg.thermo.beta, cfg.thermo.mu) / (2.0 * cfg.thermo.lambda));
  return {row};
}

inline Table run_single(const RunConfig& cfg, Command c) {
  switch (c) {
    case Command::ness:
      return run_ness(cfg, true);
    case Command::current:
      return run_ness(cfg, false);
    case Command::conductivity:
      return run_conductivity(cfg);
    case Command::bands:
      return run_bands(cfg);
    case Command::bloch_conductivity:
      return run_bloch_conductivity(cfg);
    case Command::solvable:
      return run_solvable(cfg);
    case Command::drude:
      return run_drude(cfg);
    case Command::sweep:
      break;
  }
  throw ConfigError("sweep cannot be nested");
}

inline RunConfig sweep_point(const RunConfig& cfg, double value) {
  RunConfig p = cfg;
  p.command = cfg.sweep.target;
  switch (cfg.sweep.axis) {
    case SweepAxis::half_width:
      if (value != std::floor(value)) throw ConfigError("sweep over N needs integer values");
      p.lattice.half_width = static_cast<int>(value);
      break;
    case SweepAxis::field:
      p.thermo.field = value;
      break;
    case SweepAxis::lambda:
      p.thermo.lambda = value;
      break;
    case SweepAxis::beta:
      p.thermo.beta = value;
      break;
    case SweepAxis::mu:
      p.thermo.mu = value;
      break;
  }
  validate_config(p);
  return p;
}

}  // namespace run_detail

/// Runs the configured command. Sweeps are spread over `threads` workers;
/// rows keep the order of the sweep values.
inline Table run(const RunConfig& cfg, int threads = 1) {
  validate_config(cfg);
  if (*cfg.command != Command::sweep) return run_detail::run_single(cfg, *cfg.command);

  const auto& values = cfg.sweep.values;
  std::vector<RunConfig> points;
  points.reserve(values.size());
  for (double v : values) points.push_back(run_detail::sweep_point(cfg, v));

  std::vector<Table> results(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
      try {
        results[i] = run_detail::run_single(points[i], cfg.sweep.target);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, points.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  Table out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    for (auto& row : results[i]) {
      Row r;
      r.add("sweep_axis", std::string(to_string(cfg.sweep.axis))).add("sweep_value", values[i]);
      r.cells.insert(r.cells.end(), row.cells.begin(), row.cells.end());
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace run_detail {

inline std::string csv_field(const Value& v) {
  if (auto d = std::get_if<double>(&v)) return config_detail::format_double(*d);
  if (auto i = std::get_if<long long>(&v)) return std::to_string(*i);
  const auto& s = std::get<std::string>(v);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace run_detail

/// Header from the first row; every number with 17 significant digits.
inline void write_csv(std::ostream& os, const Table& table) {
  if (table.empty()) return;
  for (std::size_t c = 0; c < table.front().cells.size(); ++c)
    os << (c ? "," : "") << table.front().cells[c].first;
  os << '\n';
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.cells.size(); ++c)
      os << (c ? "," : "") << run_detail::csv_field(row.cells[c].second);
    os << '\n';
  }
}

/// Array of objects; non-finite numbers are written as the strings inf, -inf, nan.
inline void write_json(std::ostream& os, const Table& table) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& row : table) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : row.cells)
      std::visit(
          [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, double>)
              obj[k] = std::isfinite(x) ? nlohmann::ordered_json(x)
                                        : nlohmann::ordered_json(config_detail::format_double(x));
            else
              obj[k] = x;
          },
          v);
    out.push_back(std::move(obj));
  }
  os << out.dump(2) << '\n';
}

}  // namespace nesskubo

#endif  // NESSKUBO_RUNNER_HPP
