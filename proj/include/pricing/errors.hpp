#pragma once

#include <stdexcept>
#include <string>

namespace pricing {

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasibleQuantileError : std::domain_error {
  using std::domain_error::domain_error;
};

struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateDistributionError : std::domain_error {
  using std::domain_error::domain_error;
};

struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

struct UnsupportedError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& field_path, const std::string& what)
      : std::invalid_argument(field_path + ": " + what), field(field_path) {}
  std::string field;
};

}  // namespace pricing
