#pragma once

#include <stdexcept>
#include <string>

namespace asep {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query outside the time range covered by a schedule.
class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Violated precondition of a quadrature or test-function contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The chain reached a state with zero total rate and no pending breakpoint.
class AbsorbingStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace asep
