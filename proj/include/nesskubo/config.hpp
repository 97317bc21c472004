#ifndef NESSKUBO_CONFIG_HPP
#define NESSKUBO_CONFIG_HPP

// Plain-text run configuration:
//
//   command = conductivity      # optional if given on the command line
//   [lattice]
//   dimension = 1
//   half_width = 100
//   [thermo]
//   beta = inf
//   ...
//
// '#' starts a comment, keys are unique per section, unknown sections or keys
// are errors.

#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nesskubo/bloch.hpp"
#include "nesskubo/kubo_conductivity.hpp"
#include "nesskubo/oracles.hpp"

namespace nesskubo {

enum class Command { ness, current, conductivity, bands, bloch_conductivity, solvable, drude, sweep };
enum class SweepAxis { half_width, field, lambda, beta, mu };
enum class OutputFormat { csv, json };
enum class PotentialKind { zero, table, periodic, random };

inline constexpr std::pair<Command, std::string_view> kCommandNames[] = {
    {Command::ness, "ness"},
    {Command::current, "current"},
    {Command::conductivity, "conductivity"},
    {Command::bands, "bands"},
    {Command::bloch_conductivity, "bloch-conductivity"},
    {Command::solvable, "solvable"},
    {Command::drude, "drude"},
    {Command::sweep, "sweep"},
};

inline constexpr std::pair<SweepAxis, std::string_view> kSweepAxisNames[] = {
    {SweepAxis::half_width, "N"},
    {SweepAxis::field, "E"},
    {SweepAxis::lambda, "lambda"},
    {SweepAxis::beta, "beta"},
    {SweepAxis::mu, "mu"},
};

inline constexpr std::pair<PotentialKind, std::string_view> kPotentialNames[] = {
    {PotentialKind::zero, "zero"},
    {PotentialKind::table, "table"},
    {PotentialKind::periodic, "periodic"},
    {PotentialKind::random, "random"},
};

template <class E, std::size_t N>
std::string_view enum_name(E value, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table)
    if (v == value) return name;
  return "?";
}

template <class E, std::size_t N>
std::optional<E> enum_from(std::string_view text, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table)
    if (name == text) return v;
  return std::nullopt;
}

inline std::string_view to_string(Command c) { return enum_name(c, kCommandNames); }
inline std::string_view to_string(SweepAxis a) { return enum_name(a, kSweepAxisNames); }
inline std::string_view to_string(PotentialKind k) { return enum_name(k, kPotentialNames); }

struct PotentialConfig {
  PotentialKind kind = PotentialKind::zero;
  std::string file;             ///< table
  std::vector<int> periods;     ///< periodic
  std::vector<double> values;   ///< periodic cell values, row-major
  double amplitude = 1.0;       ///< random
  std::uint64_t seed = 0;       ///< random

  bool operator==(const PotentialConfig&) const = default;
};

struct SweepConfig {
  SweepAxis axis = SweepAxis::lambda;
  Command target = Command::conductivity;
  std::vector<double> values;

  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  std::optional<Command> command;
  LatticeSpec lattice;
  PotentialConfig potential;
  ThermoParams thermo;
  Site site;  ///< empty: lattice center
  int direction = 1;
  double field_step = kDefaultFieldStep;
  bool convergence_check = false;
  std::vector<int> k_grid;
  Dispersion dispersion = Dispersion::lattice_chain();
  SweepConfig sweep;
  std::string output_path;
  OutputFormat format = OutputFormat::csv;

  bool operator==(const RunConfig& o) const {
    return command == o.command && lattice.dimension == o.lattice.dimension &&
           lattice.half_width == o.lattice.half_width && lattice.boundary == o.lattice.boundary &&
           potential == o.potential && thermo == o.thermo && site == o.site &&
           direction == o.direction && field_step == o.field_step &&
           convergence_check == o.convergence_check && k_grid == o.k_grid &&
           dispersion == o.dispersion && sweep == o.sweep && output_path == o.output_path &&
           format == o.format;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

/// 17 significant digits; "inf" for infinity.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> text(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto it = entries_.find(key);
    if (it != entries_.end())
      throw ConfigError(detail::concat("line ", it->second.line, ": ", key, ": ", msg));
    throw ConfigError(key + ": " + msg);
  }

  double parse_double(const std::string& key, const std::string& s) const {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size()) fail(key, "expected a number, got '" + s + "'");
    return v;
  }

  long long parse_int(const std::string& key, const std::string& s) const {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

  void read(const std::string& key, double& out) const {
    if (auto t = text(key)) out = parse_double(key, *t);
  }
  void read(const std::string& key, int& out) const {
    if (auto t = text(key)) out = static_cast<int>(parse_int(key, *t));
  }
  void read(const std::string& key, std::uint64_t& out) const {
    if (auto t = text(key)) {
      const long long v = parse_int(key, *t);
      if (v < 0) fail(key, "must be non-negative");
      out = static_cast<std::uint64_t>(v);
    }
  }
  void read(const std::string& key, bool& out) const {
    if (auto t = text(key)) {
      if (*t == "true" || *t == "1" || *t == "yes")
        out = true;
      else if (*t == "false" || *t == "0" || *t == "no")
        out = false;
      else
        fail(key, "expected true/false, got '" + *t + "'");
    }
  }
  void read(const std::string& key, std::string& out) const {
    if (auto t = text(key)) out = *t;
  }
  void read(const std::string& key, std::vector<double>& out) const {
    if (auto t = text(key)) {
      out.clear();
      for (const auto& tok : split_ws(*t)) out.push_back(parse_double(key, tok));
    }
  }
  void read(const std::string& key, std::vector<int>& out) const {
    if (auto t = text(key)) {
      out.clear();
      for (const auto& tok : split_ws(*t)) out.push_back(static_cast<int>(parse_int(key, tok)));
    }
  }
  template <class E, std::size_t N>
  void read_enum(const std::string& key, E& out,
                 const std::pair<E, std::string_view> (&table)[N]) const {
    if (auto t = text(key)) {
      if (auto v = enum_from(*t, table)) {
        out = *v;
        return;
      }
      std::string allowed;
      for (const auto& [_, name] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
      fail(key, "unknown value '" + *t + "' (allowed: " + allowed + ")");
    }
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "command",
      "lattice.dimension",      "lattice.half_width",   "lattice.boundary",
      "potential.kind",         "potential.file",       "potential.periods",
      "potential.values",       "potential.amplitude",  "potential.seed",
      "thermo.beta",            "thermo.mu",            "thermo.lambda",
      "thermo.field",
      "measure.site",           "measure.direction",    "measure.field_step",
      "measure.convergence_check",
      "bloch.k_grid",
      "dispersion.kind",        "dispersion.amplitude",
      "sweep.axis",             "sweep.target",         "sweep.values",
      "sweep.start",            "sweep.stop",           "sweep.step",
      "output.path",            "output.format",
  };
  return keys;
}

inline std::vector<std::string> required_keys(std::optional<Command> command,
                                              std::optional<Command> target) {
  const Command c = command.value_or(Command::conductivity);
  const Command effective = c == Command::sweep ? target.value_or(Command::conductivity) : c;
  std::vector<std::string> keys;
  if (!command) keys.push_back("command");
  if (c == Command::sweep) {
    keys.push_back("sweep.axis");
    keys.push_back("sweep.target");
  }
  switch (effective) {
    case Command::ness:
    case Command::current:
      keys.insert(keys.end(), {"lattice.dimension", "lattice.half_width", "thermo.beta",
                               "thermo.mu", "thermo.lambda", "thermo.field"});
      break;
    case Command::conductivity:
      keys.insert(keys.end(), {"lattice.dimension", "lattice.half_width", "thermo.beta",
                               "thermo.mu", "thermo.lambda"});
      break;
    case Command::bands:
      keys.insert(keys.end(), {"potential.kind", "potential.periods", "potential.values",
                               "bloch.k_grid"});
      break;
    case Command::bloch_conductivity:
      keys.insert(keys.end(), {"potential.kind", "potential.periods", "potential.values",
                               "bloch.k_grid", "thermo.beta", "thermo.mu", "thermo.lambda"});
      break;
    case Command::solvable:
    case Command::drude:
      keys.insert(keys.end(), {"thermo.beta", "thermo.mu", "thermo.lambda", "thermo.field"});
      break;
    case Command::sweep:
      break;
  }
  return keys;
}

}  // namespace config_detail

/// Checks ranges and cross-field consistency; throws ConfigError.
inline void validate_config(const RunConfig& cfg) {
  if (!cfg.command) throw ConfigError("no command given (config key 'command' or CLI argument)");
  const Command c = *cfg.command;
  const Command effective = c == Command::sweep ? cfg.sweep.target : c;
  if (effective == Command::sweep) throw ConfigError("sweep.target cannot itself be 'sweep'");
  try {
    cfg.thermo.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("thermo: ") + e.what());
  }
  const bool real_space = effective == Command::ness || effective == Command::current ||
                          effective == Command::conductivity;
  const bool bloch = effective == Command::bands || effective == Command::bloch_conductivity;
  if (real_space) {
    try {
      cfg.lattice.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("lattice: ") + e.what());
    }
    if (cfg.direction < 1 || cfg.direction > cfg.lattice.dimension)
      throw ConfigError(detail::concat("measure.direction must be in 1..", cfg.lattice.dimension));
    if (!cfg.site.empty() && static_cast<int>(cfg.site.size()) != cfg.lattice.dimension)
      throw ConfigError("measure.site needs one coordinate per dimension");
    if (!(cfg.field_step != 0.0) || !std::isfinite(cfg.field_step))
      throw ConfigError("measure.field_step must be nonzero and finite");
    if (cfg.potential.kind == PotentialKind::table && cfg.potential.file.empty())
      throw ConfigError("potential.file is required for kind = table");
    if (cfg.potential.kind == PotentialKind::random && !(cfg.potential.amplitude >= 0.0))
      throw ConfigError("potential.amplitude must be >= 0");
  }
  if (cfg.potential.kind == PotentialKind::periodic) {
    PeriodicPotential p{cfg.potential.periods, cfg.potential.values};
    p.validate();
    if (real_space && static_cast<int>(p.periods.size()) != cfg.lattice.dimension)
      throw ConfigError("potential.periods needs one entry per lattice dimension");
  }
  if (bloch) {
    if (cfg.potential.kind != PotentialKind::periodic)
      throw ConfigError("band computations need potential.kind = periodic");
    if (cfg.k_grid.size() != cfg.potential.periods.size())
      throw ConfigError("bloch.k_grid needs one entry per period");
    for (int m : cfg.k_grid)
      if (m < 4) throw ConfigError("bloch.k_grid entries must be >= 4");
  }
  if (c == Command::sweep) {
    if (cfg.sweep.values.empty()) throw ConfigError("sweep has no values");
    for (double v : cfg.sweep.values)
      if (!std::isfinite(v) && !(cfg.sweep.axis == SweepAxis::beta && v > 0))
        throw ConfigError("sweep values must be finite");
    if (cfg.sweep.axis == SweepAxis::half_width && !real_space)
      throw ConfigError("sweep over N only applies to real-space commands");
  }
}

/// Parses and validates a configuration text. A command given here takes
/// precedence over the 'command' key.
inline RunConfig parse_config(const std::string& text,
                              std::optional<Command> command = std::nullopt) {
  using config_detail::Entry;
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = config_detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(detail::concat("line ", line_no, ": malformed section header"));
      section = config_detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(detail::concat("line ", line_no, ": expected 'key = value'"));
    const std::string key = config_detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = config_detail::trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    if (!config_detail::known_keys().count(full))
      throw ConfigError(detail::concat("line ", line_no, ": unknown key '", key, "'",
                                       section.empty() ? std::string() : " in section [" + section + "]"));
    if (entries.count(full))
      throw ConfigError(detail::concat("line ", line_no, ": duplicate key '", full, "'"));
    entries.emplace(full, Entry{value, line_no});
  }

  const config_detail::Reader r(std::move(entries));
  RunConfig cfg;
  if (r.has("command")) {
    Command c{};
    r.read_enum("command", c, kCommandNames);
    cfg.command = c;
  }
  if (command) cfg.command = command;
  if (r.has("sweep.target")) r.read_enum("sweep.target", cfg.sweep.target, kCommandNames);

  std::vector<std::string> missing;
  r.read_enum("sweep.axis", cfg.sweep.axis, kSweepAxisNames);
  std::string swept;
  if (cfg.command == Command::sweep && r.has("sweep.axis")) {
    static const std::map<SweepAxis, std::string> swept_key = {
        {SweepAxis::half_width, "lattice.half_width"}, {SweepAxis::field, "thermo.field"},
        {SweepAxis::lambda, "thermo.lambda"},          {SweepAxis::beta, "thermo.beta"},
        {SweepAxis::mu, "thermo.mu"}};
    swept = swept_key.at(cfg.sweep.axis);
  }
  for (const auto& key : config_detail::required_keys(
           cfg.command, r.has("sweep.target") ? std::optional<Command>(cfg.sweep.target) : std::nullopt))
    if (!r.has(key) && key != swept) missing.push_back(key);
  if (!missing.empty()) {
    std::string msg = "missing required keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }

  r.read("lattice.dimension", cfg.lattice.dimension);
  r.read("lattice.half_width", cfg.lattice.half_width);
  if (auto b = r.text("lattice.boundary")) {
    if (*b == "open")
      cfg.lattice.boundary = Boundary::open;
    else if (*b == "periodic")
      cfg.lattice.boundary = Boundary::periodic;
    else
      r.fail("lattice.boundary", "expected open or periodic, got '" + *b + "'");
  }

  r.read_enum("potential.kind", cfg.potential.kind, kPotentialNames);
  r.read("potential.file", cfg.potential.file);
  r.read("potential.periods", cfg.potential.periods);
  r.read("potential.values", cfg.potential.values);
  r.read("potential.amplitude", cfg.potential.amplitude);
  r.read("potential.seed", cfg.potential.seed);

  r.read("thermo.beta", cfg.thermo.beta);
  r.read("thermo.mu", cfg.thermo.mu);
  r.read("thermo.lambda", cfg.thermo.lambda);
  r.read("thermo.field", cfg.thermo.field);

  r.read("measure.site", cfg.site);
  r.read("measure.direction", cfg.direction);
  r.read("measure.field_step", cfg.field_step);
  r.read("measure.convergence_check", cfg.convergence_check);

  r.read("bloch.k_grid", cfg.k_grid);

  if (auto k = r.text("dispersion.kind")) {
    if (*k == "cosine")
      cfg.dispersion.kind = Dispersion::Kind::cosine;
    else if (*k == "quadratic")
      cfg.dispersion = Dispersion::quadratic();
    else
      r.fail("dispersion.kind", "expected cosine or quadratic, got '" + *k + "'");
  }
  r.read("dispersion.amplitude", cfg.dispersion.amplitude);

  const bool has_list = r.has("sweep.values");
  const bool has_range = r.has("sweep.start") || r.has("sweep.stop") || r.has("sweep.step");
  if (has_list && has_range)
    throw ConfigError("sweep: give either values or start/stop/step, not both");
  if (has_list) r.read("sweep.values", cfg.sweep.values);
  if (has_range) {
    if (!(r.has("sweep.start") && r.has("sweep.stop") && r.has("sweep.step")))
      throw ConfigError("sweep: start, stop and step must all be given");
    double start = 0, stop = 0, step = 0;
    r.read("sweep.start", start);
    r.read("sweep.stop", stop);
    r.read("sweep.step", step);
    if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step) || step == 0.0 ||
        (stop - start) / step < 0.0)
      throw ConfigError("sweep: range must be finite and step must move start towards stop");
    const long long count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 1000000) throw ConfigError("sweep: more than 10^6 points");
    for (long long i = 0; i < count; ++i) cfg.sweep.values.push_back(start + static_cast<double>(i) * step);
  }

  r.read("output.path", cfg.output_path);
  if (auto f = r.text("output.format")) {
    if (*f == "csv")
      cfg.format = OutputFormat::csv;
    else if (*f == "json")
      cfg.format = OutputFormat::json;
    else
      r.fail("output.format", "expected csv or json, got '" + *f + "'");
  }

  if (cfg.command) validate_config(cfg);
  return cfg;
}

/// Writes a configuration that parses back to `cfg`.
inline std::string emit_config(const RunConfig& cfg) {
  using config_detail::format_double;
  std::ostringstream os;
  auto ints = [](const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
    return s;
  };
  auto doubles = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + format_double(x);
    return s;
  };
  if (cfg.command) os << "command = " << to_string(*cfg.command) << "\n";
  os << "\n[lattice]\n"
     << "dimension = " << cfg.lattice.dimension << "\n"
     << "half_width = " << cfg.lattice.half_width << "\n"
     << "boundary = " << to_string(cfg.lattice.boundary) << "\n";
  os << "\n[potential]\n"
     << "kind = " << to_string(cfg.potential.kind) << "\n";
  if (!cfg.potential.file.empty()) os << "file = " << cfg.potential.file << "\n";
  if (!cfg.potential.periods.empty()) os << "periods = " << ints(cfg.potential.periods) << "\n";
  if (!cfg.potential.values.empty()) os << "values = " << doubles(cfg.potential.values) << "\n";
  os << "amplitude = " << format_double(cfg.potential.amplitude) << "\n"
     << "seed = " << cfg.potential.seed << "\n";
  os << "\n[thermo]\n"
     << "beta = " << format_double(cfg.thermo.beta) << "\n"
     << "mu = " << format_double(cfg.thermo.mu) << "\n"
     << "lambda = " << format_double(cfg.thermo.lambda) << "\n"
     << "field = " << format_double(cfg.thermo.field) << "\n";
  os << "\n[measure]\n";
  if (!cfg.site.empty()) os << "site = " << ints(cfg.site) << "\n";
  os << "direction = " << cfg.direction << "\n"
     << "field_step = " << format_double(cfg.field_step) << "\n"
     << "convergence_check = " << (cfg.convergence_check ? "true" : "false") << "\n";
  if (!cfg.k_grid.empty()) os << "\n[bloch]\nk_grid = " << ints(cfg.k_grid) << "\n";
  os << "\n[dispersion]\n"
     << "kind = " << (cfg.dispersion.kind == Dispersion::Kind::cosine ? "cosine" : "quadratic") << "\n"
     << "amplitude = " << format_double(cfg.dispersion.amplitude) << "\n";
  os << "\n[sweep]\n"
     << "axis = " << to_string(cfg.sweep.axis) << "\n"
     << "target = " << to_string(cfg.sweep.target) << "\n";
  if (!cfg.sweep.values.empty()) os << "values = " << doubles(cfg.sweep.values) << "\n";
  os << "\n[output]\n";
  if (!cfg.output_path.empty()) os << "path = " << cfg.output_path << "\n";
  os << "format = " << (cfg.format == OutputFormat::csv ? "csv" : "json") << "\n";
  return os.str();
}

}  // namespace nesskubo

#endif  // NESSKUBO_CONFIG_HPP
