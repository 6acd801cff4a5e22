#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace arraysel {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;

constexpr double deg2rad(double deg) { return deg / kDegPerRad; }
constexpr double rad2deg(double rad) { return rad * kDegPerRad; }

// Error kinds. Precondition failures use std::invalid_argument directly.
class UnsupportedConfiguration : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InsufficientSubarray : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LabelingFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Order-sensitive seed derivation (splitmix64 finalizer chained over the parts).
// Used wherever work items need independent, schedule-free random streams.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
// interleaved assignment. fn must only write to per-index state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Number of workers to use when a config asks for 0 ("auto").
unsigned resolve_threads(unsigned requested);

void log_warning(const std::string& message);
void log_info(const std::string& message);
// "quiet" | "warn" | "info" (default info); messages go to stderr.
void set_log_level(const std::string& level);

// Decimal seed or count parsing helpers shared by the config and geometry readers.
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace arraysel
