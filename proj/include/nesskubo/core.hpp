#ifndef NESSKUBO_CORE_HPP
#define NESSKUBO_CORE_HPP

#include <atomic>
#include <complex>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace nesskubo {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr Complex kI{0.0, 1.0};

// Error hierarchy. The CLI maps ConfigError to exit code 2 and everything
// derived from NumericalError to exit code 3.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation requires an assumption the input violates
/// (e.g. nondegenerate bands).
class AssumptionViolated : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace log {

enum class Level { debug = 0, info = 1, warn = 2, silent = 3 };

namespace detail {
inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::warn};
  return level;
}
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void set_level(Level level) { detail::threshold().store(level); }
inline Level level() { return detail::threshold().load(); }

template <class... Args>
void write(Level lvl, std::string_view tag, const Args&... args) {
  if (lvl < level()) return;
  std::ostringstream os;
  os << "[nesskubo:" << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::lock_guard<std::mutex> lock(detail::sink_mutex());
  std::cerr << os.str();
}

template <class... Args>
void warn(const Args&... args) {
  write(Level::warn, "warn", args...);
}

template <class... Args>
void info(const Args&... args) {
  write(Level::info, "info", args...);
}

template <class... Args>
void debug(const Args&... args) {
  write(Level::debug, "debug", args...);
}

}  // namespace log

namespace detail {

template <class... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

}  // namespace nesskubo

#endif  // NESSKUBO_CORE_HPP
